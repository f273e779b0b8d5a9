#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace policygnn::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class NnError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A trainable tensor. Gradients accumulate across backward passes until
/// zero_grad().
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Message layout for neighborhood aggregation, grouped by receiving node.
/// Messages for node i occupy [offsets[i], offsets[i+1]) and are ordered by
/// ascending source index. Self-loops are included when requested at build time.
struct MessageGraph {
  std::size_t num_nodes = 0;
  std::vector<std::uint32_t> offsets;  // num_nodes + 1
  std::vector<std::uint32_t> sources;  // one per message
  std::vector<std::uint32_t> targets;  // one per message

  static MessageGraph build(std::size_t num_nodes, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                            bool add_self_loops);
  std::size_t num_messages() const { return sources.size(); }
};

enum class Aggregation { max, sum, mean };

/// Handle to a value on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode tape. Each op computes its value eagerly and, when recording,
/// registers a closure that propagates the output gradient to its inputs.
/// A non-recording tape only evaluates (no caches, no parameter writes), so
/// several can share one set of parameters concurrently.
class Tape {
public:
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(Matrix value);
  /// Reads parameter values by reference; backward adds into `p.grad`.
  Var parameter(Parameter& p);
  Var parameter(const Parameter& p);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward root with respect to `v`.
  const Matrix& grad(Var v) const;

  /// x * W^T + b, with W shaped (out, in) and b (1, out). `b` may be omitted.
  Var linear(Var x, Var w, Var b);
  Var linear(Var x, Var w);
  Var relu(Var x);
  /// Adds a (1, cols) row to every row of x.
  Var add_bias(Var x, Var b);
  Var add(Var a, Var b);
  Var scale(Var x, double factor);
  Var concat_cols(const std::vector<Var>& parts);

  /// One row per message m = (j -> i): [x_j, p_j - p_i].
  Var relative_messages(Var x, const Matrix& positions, const MessageGraph& graph);
  /// Reduces message rows onto receiving nodes. For max, ties go to the
  /// lowest-index source.
  Var aggregate(Var messages, const MessageGraph& graph, Aggregation mode);

  /// Single-head graph attention on projected features z:
  ///   logit(i,j) = leaky_relu(a_src . z_j + a_dst . z_i), softmax over j in N(i),
  ///   out_i = sum_j alpha_ij z_j.
  /// `attention` (optional) receives alpha per message.
  Var attention(Var z, Var a_src, Var a_dst, const MessageGraph& graph, double negative_slope,
                std::vector<double>* attention = nullptr);

  /// Mean squared error against a fixed target column; returns a 1x1 value.
  Var mse(Var prediction, const Matrix& target);
  /// Sum of elementwise products with fixed weights; returns a 1x1 value.
  Var weighted_sum(Var x, const Matrix& weights);

  /// Seeds d(root)/d(root) = 1 and runs the recorded closures in reverse.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_; }

private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Parameter* param = nullptr;
    Matrix grad;
    std::function<void()> backprop;

    const Matrix& value() const { return ref ? *ref : owned; }
  };

  Var push(Matrix value, std::function<void()> backprop = {});
  Node& node(Var v);
  const Node& node(Var v) const;
  Matrix& grad_slot(Var v);

  bool record_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;  // stable addresses across appends
};

}  // namespace policygnn::nn
