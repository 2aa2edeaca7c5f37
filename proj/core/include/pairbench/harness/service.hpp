#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <thread>

#include "pairbench/harness/store.hpp"
#include "pairbench/metrics/evaluate.hpp"

namespace pairbench::harness {

struct SubtrackConfig {
  gate::SubtrackRules rules;
  double masked_fpr = 1e-4;
  double mr_fpr = 1e-6;
};

struct ServiceConfig {
  std::map<std::string, SubtrackConfig> subtracks;
  metrics::EvalOptions eval;
  std::size_t latency_batch = 8;
  std::size_t latency_warmup = 10;
  std::size_t latency_reps = 50;

  // The two shipped subtracks with their published constraint sets.
  static ServiceConfig defaults();
  static ServiceConfig from_json(const std::string& json_text);
};

// Submission queue plus a single evaluation worker, persisted through the
// EventStore. Ingestion validates synchronously and rejects malformed
// payloads; evaluation (gate -> evaluate per protocol -> weighted score ->
// leaderboard) runs asynchronously, one submission at a time so latency
// measurements are undisturbed.
class Service {
 public:
  Service(std::string data_dir, ServiceConfig config);
  ~Service();

  // Returns the submission id; throws Error on a malformed payload.
  std::uint64_t submit(const std::string& payload_json);

  std::optional<SubmissionRecord> status(std::uint64_t id) const;
  std::vector<metrics::LeaderboardEntry> leaderboard(const std::string& subtrack) const;

  // Blocks until the queue is empty and the worker is idle.
  void drain();

  EventStore& store() { return store_; }
  const ServiceConfig& config() const { return config_; }

 private:
  void worker_loop();
  void process(std::uint64_t id);

  ServiceConfig config_;
  EventStore store_;
  std::deque<std::uint64_t> queue_;
  mutable std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

// HTTP facade: POST /submit, GET /status/{id}, GET /leaderboard/{subtrack}.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Binds to an OS-assigned port when port == 0; returns the bound port.
  int start(const std::string& host, int port);
  void wait_until_ready();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pairbench::harness
