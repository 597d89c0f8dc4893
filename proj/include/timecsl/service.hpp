#ifndef TIMECSL_SERVICE_HPP
#define TIMECSL_SERVICE_HPP

#include <filesystem>
#include <memory>
#include <string>

#include "timecsl/core.hpp"
#include "timecsl/dataio.hpp"

namespace timecsl {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 0;                          // 0 picks an ephemeral port
  std::filesystem::path model_path;      // fine-tuned models land beside it
  std::string cors_origin = "*";
  int tsne_iterations = 1000;
};

/// HTTP/JSON front end over one dataset and one active model. Model-derived
/// responses carry the `snapshot` generation they were computed from.
class Service {
 public:
  Service(Dataset dataset, ModelFile model, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; returns the bound port. Throws Error with
  /// code "bind_error" when the address is unavailable.
  int bind();
  /// Serves until stop(); requires bind().
  void listen();
  /// Stops accepting requests, cancels running jobs and joins workers.
  void stop();

  int port() const;
  std::uint64_t generation() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace timecsl

#endif  // TIMECSL_SERVICE_HPP
