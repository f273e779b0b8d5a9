#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "policygnn/surrogate.hpp"

namespace httplib {
class Server;
}

namespace policygnn {

/// A request the service refuses, with the HTTP status to answer.
class RequestError : public std::runtime_error {
public:
  RequestError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

private:
  int status_;
};

struct ServiceOptions {
  std::size_t max_edges = 5000;  // cap on explicit edge ids per request (413 above)
  std::string cors_origin = "*";
};

/// What-if endpoints over an immutable surrogate. Handlers keep no state
/// besides request counters and may run concurrently.
class PolicyService {
public:
  explicit PolicyService(Surrogate surrogate, ServiceOptions options = {});

  nlohmann::json health() const;
  nlohmann::json network() const;
  nlohmann::json districts() const;
  /// Throws RequestError on a malformed or oversized request.
  nlohmann::json predict(const nlohmann::json& request) const;
  /// Parses a raw body, then `predict`.
  nlohmann::json predict_body(const std::string& body) const;

  /// Registers every route (and CORS handling) on `server`.
  void mount(httplib::Server& server) const;

  const Surrogate& surrogate() const { return surrogate_; }
  std::size_t requests_served() const { return served_.load(); }

private:
  Surrogate surrogate_;
  ServiceOptions options_;
  nlohmann::json network_payload_;
  nlohmann::json districts_payload_;
  mutable std::atomic<std::size_t> served_{0};
};

/// Builds a surrogate from a dataset directory (network.json, base.csv) and a
/// checkpoint directory.
Surrogate load_surrogate(const std::filesystem::path& dataset_dir, const std::filesystem::path& checkpoint_dir);

/// Blocks serving on host:port until the process is stopped.
void serve(const PolicyService& service, const std::string& host, int port);

}  // namespace policygnn
