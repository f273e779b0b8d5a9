#include "policygnn/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace policygnn::nn {

MessageGraph MessageGraph::build(std::size_t num_nodes,
                                 const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                                 bool add_self_loops) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> by_target;  // (target, source)
  by_target.reserve(edges.size() + (add_self_loops ? num_nodes : 0));
  for (const auto& [src, dst] : edges) {
    if (src >= num_nodes || dst >= num_nodes) throw NnError("edge index out of range");
    if (src == dst && add_self_loops) continue;
    by_target.emplace_back(dst, src);
  }
  if (add_self_loops) {
    for (std::uint32_t i = 0; i < num_nodes; ++i) by_target.emplace_back(i, i);
  }
  std::sort(by_target.begin(), by_target.end());
  by_target.erase(std::unique(by_target.begin(), by_target.end()), by_target.end());

  MessageGraph g;
  g.num_nodes = num_nodes;
  g.offsets.assign(num_nodes + 1, 0);
  g.sources.reserve(by_target.size());
  g.targets.reserve(by_target.size());
  for (const auto& [dst, src] : by_target) {
    ++g.offsets[dst + 1];
    g.sources.push_back(src);
    g.targets.push_back(dst);
  }
  for (std::size_t i = 0; i < num_nodes; ++i) g.offsets[i + 1] += g.offsets[i];
  return g;
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw NnError("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw NnError("variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::push(Matrix value, std::function<void()> backprop) {
  Node n;
  n.owned = std::move(value);
  if (record_) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Matrix& Tape::grad_slot(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value().rows(), n.value().cols());
  return n.grad;
}

Var Tape::constant(Matrix value) { return push(std::move(value)); }

Var Tape::parameter(Parameter& p) {
  Node n;
  n.ref = &p.value;
  if (record_) n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(const Parameter& p) {
  if (record_) throw NnError("a recording tape needs mutable parameters");
  Node n;
  n.ref = &p.value;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const { return node(v).value(); }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!backward_done_) throw NnError("gradient requested before backward");
  static const Matrix empty;
  return n.grad.size() ? n.grad : empty;
}

Var Tape::linear(Var x, Var w, Var b) {
  const Matrix& X = value(x);
  const Matrix& W = value(w);
  const Matrix& B = value(b);
  if (X.cols() != W.cols()) {
    throw NnError("linear: input width " + std::to_string(X.cols()) + " does not match weight width " +
                  std::to_string(W.cols()));
  }
  if (B.rows() != 1 || B.cols() != W.rows()) throw NnError("linear: bias shape mismatch");
  Matrix out(X.rows(), W.rows());
  out.noalias() = X * W.transpose();
  out.rowwise() += B.row(0);
  const Var y{nodes_.size()};
  return push(std::move(out), [this, x, w, b, y] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    grad_slot(x).noalias() += G * value(w);
    grad_slot(w).noalias() += G.transpose() * value(x);
    grad_slot(b) += G.colwise().sum();
  });
}

Var Tape::linear(Var x, Var w) {
  const Matrix& X = value(x);
  const Matrix& W = value(w);
  if (X.cols() != W.cols()) {
    throw NnError("linear: input width " + std::to_string(X.cols()) + " does not match weight width " +
                  std::to_string(W.cols()));
  }
  Matrix out(X.rows(), W.rows());
  out.noalias() = X * W.transpose();
  const Var y{nodes_.size()};
  return push(std::move(out), [this, x, w, y] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    grad_slot(x).noalias() += G * value(w);
    grad_slot(w).noalias() += G.transpose() * value(x);
  });
}

Var Tape::relu(Var x) {
  Matrix out = value(x).cwiseMax(0.0);
  const Var y{nodes_.size()};
  return push(std::move(out), [this, x, y] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    grad_slot(x).array() += (value(x).array() > 0.0).select(G.array(), 0.0);
  });
}

Var Tape::add_bias(Var x, Var b) {
  const Matrix& B = value(b);
  if (B.rows() != 1 || B.cols() != value(x).cols()) throw NnError("add_bias: shape mismatch");
  Matrix out = value(x);
  out.rowwise() += B.row(0);
  const Var y{nodes_.size()};
  return push(std::move(out), [this, x, b, y] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    grad_slot(x) += G;
    grad_slot(b) += G.colwise().sum();
  });
}

Var Tape::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) throw NnError("add: shape mismatch");
  Matrix out = value(a) + value(b);
  const Var y{nodes_.size()};
  return push(std::move(out), [this, a, b, y] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    grad_slot(a) += G;
    grad_slot(b) += G;
  });
}

Var Tape::scale(Var x, double factor) {
  Matrix out = value(x) * factor;
  const Var y{nodes_.size()};
  return push(std::move(out), [this, x, y, factor] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    grad_slot(x) += factor * G;
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw NnError("concat_cols: no inputs");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw NnError("concat_cols: row mismatch");
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  const Var y{nodes_.size()};
  return push(std::move(out), [this, parts, y] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index c = value(p).cols();
      grad_slot(p) += G.middleCols(at, c);
      at += c;
    }
  });
}

Var Tape::relative_messages(Var x, const Matrix& positions, const MessageGraph& graph) {
  const Matrix& X = value(x);
  if (static_cast<std::size_t>(X.rows()) != graph.num_nodes || positions.rows() != X.rows()) {
    throw NnError("relative_messages: node count mismatch");
  }
  const Eigen::Index f = X.cols();
  const Eigen::Index pd = positions.cols();
  const auto m = static_cast<Eigen::Index>(graph.num_messages());
  Matrix out(m, f + pd);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto j = graph.sources[static_cast<std::size_t>(k)];
    const auto i = graph.targets[static_cast<std::size_t>(k)];
    out.row(k).head(f) = X.row(j);
    out.row(k).tail(pd) = positions.row(j) - positions.row(i);
  }
  const Var y{nodes_.size()};
  return push(std::move(out), [this, x, y, f, &graph] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    Matrix& gx = grad_slot(x);
    for (Eigen::Index k = 0; k < G.rows(); ++k) {
      gx.row(graph.sources[static_cast<std::size_t>(k)]) += G.row(k).head(f);
    }
  });
}

Var Tape::aggregate(Var messages, const MessageGraph& graph, Aggregation mode) {
  const Matrix& M = value(messages);
  if (static_cast<std::size_t>(M.rows()) != graph.num_messages()) throw NnError("aggregate: message count mismatch");
  const auto n = static_cast<Eigen::Index>(graph.num_nodes);
  const Eigen::Index c = M.cols();
  Matrix out = Matrix::Zero(n, c);
  std::vector<std::uint32_t> argmax;
  if (mode == Aggregation::max) {
    argmax.assign(static_cast<std::size_t>(n * c), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto begin = graph.offsets[static_cast<std::size_t>(i)];
      const auto end = graph.offsets[static_cast<std::size_t>(i) + 1];
      if (begin == end) continue;
      out.row(i) = M.row(begin);
      std::uint32_t* arg = argmax.data() + i * c;
      std::fill(arg, arg + c, begin);
      for (auto k = begin + 1; k < end; ++k) {
        for (Eigen::Index col = 0; col < c; ++col) {
          // Strict comparison keeps the earliest (lowest source) message on ties.
          if (M(k, col) > out(i, col)) {
            out(i, col) = M(k, col);
            arg[col] = k;
          }
        }
      }
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto begin = graph.offsets[static_cast<std::size_t>(i)];
      const auto end = graph.offsets[static_cast<std::size_t>(i) + 1];
      for (auto k = begin; k < end; ++k) out.row(i) += M.row(k);
      if (mode == Aggregation::mean && end > begin) out.row(i) /= static_cast<double>(end - begin);
    }
  }
  const Var y{nodes_.size()};
  return push(std::move(out), [this, messages, y, mode, &graph, argmax = std::move(argmax)] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    Matrix& gm = grad_slot(messages);
    const Eigen::Index c = G.cols();
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
      const auto begin = graph.offsets[static_cast<std::size_t>(i)];
      const auto end = graph.offsets[static_cast<std::size_t>(i) + 1];
      if (begin == end) continue;
      if (mode == Aggregation::max) {
        const std::uint32_t* arg = argmax.data() + i * c;
        for (Eigen::Index col = 0; col < c; ++col) gm(arg[col], col) += G(i, col);
      } else {
        const double w = mode == Aggregation::mean ? 1.0 / static_cast<double>(end - begin) : 1.0;
        for (auto k = begin; k < end; ++k) gm.row(k) += w * G.row(i);
      }
    }
  });
}

Var Tape::attention(Var z, Var a_src, Var a_dst, const MessageGraph& graph, double negative_slope,
                    std::vector<double>* attention_out) {
  const Matrix& Z = value(z);
  const Matrix& As = value(a_src);
  const Matrix& Ad = value(a_dst);
  if (static_cast<std::size_t>(Z.rows()) != graph.num_nodes) throw NnError("attention: node count mismatch");
  if (As.rows() != 1 || As.cols() != Z.cols() || Ad.rows() != 1 || Ad.cols() != Z.cols()) {
    throw NnError("attention: attention vector shape mismatch");
  }
  const Vector s = Z * As.row(0).transpose();
  const Vector d = Z * Ad.row(0).transpose();
  const std::size_t m = graph.num_messages();
  std::vector<double> pre(m);
  std::vector<double> alpha(m);
  Matrix out = Matrix::Zero(Z.rows(), Z.cols());
  for (std::size_t i = 0; i < graph.num_nodes; ++i) {
    const auto begin = graph.offsets[i];
    const auto end = graph.offsets[i + 1];
    if (begin == end) continue;
    double peak = -std::numeric_limits<double>::infinity();
    for (auto k = begin; k < end; ++k) {
      pre[k] = s(graph.sources[k]) + d(static_cast<Eigen::Index>(i));
      const double e = pre[k] > 0.0 ? pre[k] : negative_slope * pre[k];
      alpha[k] = e;
      peak = std::max(peak, e);
    }
    double total = 0.0;
    for (auto k = begin; k < end; ++k) {
      alpha[k] = std::exp(alpha[k] - peak);
      total += alpha[k];
    }
    for (auto k = begin; k < end; ++k) {
      alpha[k] /= total;
      out.row(static_cast<Eigen::Index>(i)) += alpha[k] * Z.row(graph.sources[k]);
    }
  }
  if (attention_out) *attention_out = alpha;
  const Var y{nodes_.size()};
  if (!record_) return push(std::move(out));
  return push(std::move(out), [this, z, a_src, a_dst, y, negative_slope, &graph, pre = std::move(pre),
                               alpha = std::move(alpha)] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    const Matrix& Z = value(z);
    const auto n = static_cast<Eigen::Index>(graph.num_nodes);
    Matrix& gz = grad_slot(z);
    Vector gs = Vector::Zero(n);
    Vector gd = Vector::Zero(n);
    std::vector<double> galpha;
    for (std::size_t i = 0; i < graph.num_nodes; ++i) {
      const auto begin = graph.offsets[i];
      const auto end = graph.offsets[i + 1];
      if (begin == end) continue;
      const auto gi = G.row(static_cast<Eigen::Index>(i));
      galpha.resize(end - begin);
      double weighted = 0.0;
      for (auto k = begin; k < end; ++k) {
        const auto j = graph.sources[k];
        gz.row(j) += alpha[k] * gi;
        galpha[k - begin] = gi.dot(Z.row(j));
        weighted += alpha[k] * galpha[k - begin];
      }
      for (auto k = begin; k < end; ++k) {
        const double ge = alpha[k] * (galpha[k - begin] - weighted);
        const double gpre = pre[k] > 0.0 ? ge : negative_slope * ge;
        gs(graph.sources[k]) += gpre;
        gd(static_cast<Eigen::Index>(i)) += gpre;
      }
    }
    // s = Z a_src^T, d = Z a_dst^T
    gz.noalias() += gs * value(a_src).row(0);
    gz.noalias() += gd * value(a_dst).row(0);
    grad_slot(a_src).row(0).noalias() += (Z.transpose() * gs).transpose();
    grad_slot(a_dst).row(0).noalias() += (Z.transpose() * gd).transpose();
  });
}

Var Tape::mse(Var prediction, const Matrix& target) {
  const Matrix& P = value(prediction);
  if (P.rows() != target.rows() || P.cols() != target.cols()) throw NnError("mse: shape mismatch");
  if (P.size() == 0) throw NnError("mse: empty input");
  Matrix out(1, 1);
  out(0, 0) = (P - target).squaredNorm() / static_cast<double>(P.size());
  const Var y{nodes_.size()};
  return push(std::move(out), [this, prediction, y, target] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    const Matrix& P = value(prediction);
    grad_slot(prediction) += (2.0 * G(0, 0) / static_cast<double>(P.size())) * (P - target);
  });
}

Var Tape::weighted_sum(Var x, const Matrix& weights) {
  const Matrix& X = value(x);
  if (X.rows() != weights.rows() || X.cols() != weights.cols()) throw NnError("weighted_sum: shape mismatch");
  Matrix out(1, 1);
  out(0, 0) = X.cwiseProduct(weights).sum();
  const Var y{nodes_.size()};
  return push(std::move(out), [this, x, y, weights] {
    const Matrix& G = node(y).grad;
    if (G.size() == 0) return;
    grad_slot(x) += G(0, 0) * weights;
  });
}

void Tape::backward(Var root) {
  if (!record_) throw NnError("backward on a non-recording tape");
  Node& r = node(root);
  if (r.value().size() != 1) throw NnError("backward root must be a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  r.grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    if (nodes_[i].backprop) nodes_[i].backprop();
  }
  for (auto& n : nodes_) {
    if (n.param && n.grad.size()) n.param->grad += n.grad;
  }
  backward_done_ = true;
}

}  // namespace policygnn::nn
