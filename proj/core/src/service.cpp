#include "pairbench/harness/service.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "pairbench/core/embeddings.hpp"
#include "pairbench/core/error.hpp"
#include "pairbench/core/manifest_io.hpp"
#include "pairbench/metrics/metrics.hpp"

namespace pairbench::harness {

namespace fs = std::filesystem;
using nlohmann::json;

ServiceConfig ServiceConfig::defaults() {
  ServiceConfig cfg;
  cfg.subtracks["ms1m"] = {gate::rules_preset("ms1m"), 1e-4, 1e-6};
  cfg.subtracks["glint360k"] = {gate::rules_preset("glint360k"), 1e-4, 1e-6};
  return cfg;
}

ServiceConfig ServiceConfig::from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("service config: malformed JSON: ") + e.what());
  }
  ServiceConfig cfg;
  for (auto it = j.at("subtracks").begin(); it != j.at("subtracks").end(); ++it) {
    SubtrackConfig sub;
    sub.rules = gate::parse_rules_json(it.value().at("rules").dump());
    sub.masked_fpr = it.value().value("masked_fpr", 1e-4);
    sub.mr_fpr = it.value().value("mr_fpr", 1e-6);
    cfg.subtracks[it.key()] = std::move(sub);
  }
  if (j.contains("eval")) {
    cfg.eval.block_size = j["eval"].value("block_size", cfg.eval.block_size);
    cfg.eval.workers = j["eval"].value("workers", cfg.eval.workers);
  }
  cfg.latency_batch = j.value("latency_batch", cfg.latency_batch);
  cfg.latency_warmup = j.value("latency_warmup", cfg.latency_warmup);
  cfg.latency_reps = j.value("latency_reps", cfg.latency_reps);
  if (cfg.subtracks.empty()) throw Error("service config: no subtracks");
  return cfg;
}

namespace {

// Built-in extractor for testing the model-submission route: input bytes are
// taken verbatim as `dim` float32 values, with an optional artificial cost
// per image.
class PassthroughExtractor : public gate::EmbeddingExtractor {
 public:
  PassthroughExtractor(std::uint32_t dim, double sleep_ms) : dim_(dim), sleep_ms_(sleep_ms) {}

  std::uint32_t feature_dim() const override { return dim_; }

  std::vector<float> extract(std::span<const std::uint8_t> input) override {
    if (input.size() != dim_ * sizeof(float)) {
      throw Error("passthrough extractor: expected " + std::to_string(dim_ * sizeof(float)) +
                  " bytes, got " + std::to_string(input.size()));
    }
    if (sleep_ms_ > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(sleep_ms_));
    }
    std::vector<float> out(dim_);
    std::memcpy(out.data(), input.data(), input.size());
    return out;
  }

 private:
  std::uint32_t dim_;
  double sleep_ms_;
};

std::unique_ptr<gate::EmbeddingExtractor> make_extractor(const json& spec) {
  const std::string name = spec.at("name").get<std::string>();
  if (name == "passthrough") {
    return std::make_unique<PassthroughExtractor>(spec.at("dim").get<std::uint32_t>(),
                                                  spec.value("sleep_ms", 0.0));
  }
  throw Error("unknown extractor: '" + name + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Service::Service(std::string data_dir, ServiceConfig config)
    : config_(std::move(config)), store_(std::move(data_dir)) {
  // A submission caught mid-run by a crash is terminal; queued ones resume.
  for (const auto& rec : store_.all()) {
    if (rec.state == SubmissionState::Running) {
      store_.mark_failed(rec.id, "interrupted by service restart");
    }
  }
  for (std::uint64_t id : store_.pending()) queue_.push_back(id);
  worker_ = std::thread([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
  store_.write_snapshot();
}

std::uint64_t Service::submit(const std::string& payload_json) {
  json payload;
  try {
    payload = json::parse(payload_json);
  } catch (const json::exception& e) {
    throw Error(std::string("submit: malformed JSON payload: ") + e.what());
  }
  const std::string participant = payload.value("participant", "");
  if (participant.empty()) throw Error("submit: missing participant");
  const std::string subtrack = payload.value("subtrack", "");
  if (!config_.subtracks.contains(subtrack)) {
    throw Error("submit: unknown subtrack '" + subtrack + "'");
  }
  if (!payload.contains("manifest") || !fs::exists(payload["manifest"].get<std::string>())) {
    throw Error("submit: manifest file missing");
  }
  const bool has_embeddings =
      payload.contains("embeddings") && fs::exists(payload["embeddings"].get<std::string>());
  const bool has_extractor = payload.contains("extractor") && payload.contains("raw") &&
                             fs::exists(payload["raw"].get<std::string>());
  if (!has_embeddings && !has_extractor) {
    throw Error("submit: payload needs either an embeddings file or an extractor + raw file");
  }
  if (!payload.contains("meta")) throw Error("submit: missing meta");

  const std::uint64_t id = store_.submit(participant, subtrack, payload.dump());
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(id);
  }
  queue_cv_.notify_one();
  return id;
}

std::optional<SubmissionRecord> Service::status(std::uint64_t id) const {
  return store_.get(id);
}

std::vector<metrics::LeaderboardEntry> Service::leaderboard(const std::string& subtrack) const {
  if (!config_.subtracks.contains(subtrack)) {
    throw Error("unknown subtrack '" + subtrack + "'");
  }
  return store_.leaderboard(subtrack);
}

void Service::drain() {
  std::unique_lock lock(queue_mutex_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

void Service::worker_loop() {
  for (;;) {
    std::uint64_t id;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      busy_ = true;
    }
    process(id);
    {
      std::lock_guard lock(queue_mutex_);
      busy_ = false;
    }
    idle_cv_.notify_all();
  }
}

void Service::process(std::uint64_t id) {
  store_.mark_running(id);
  try {
    const auto rec = store_.get(id);
    if (!rec) throw Error("submission vanished from the store");
    const json payload = json::parse(rec->payload_json);
    const SubtrackConfig& subtrack = config_.subtracks.at(rec->subtrack);
    const json& meta_obj = payload.at("meta");

    gate::SubmissionMeta meta;
    meta.participant = rec->participant;
    meta.declared_dim = meta_obj.at("declared_dim").get<std::uint32_t>();
    meta.model_bytes = meta_obj.at("model_bytes").get<std::uint64_t>();
    meta.artifact_digest = meta_obj.value("digest", "");

    const Manifest manifest = load_manifest(payload.at("manifest").get<std::string>());

    EmbeddingSet set;
    gate::MeasuredProfile profile;
    if (payload.contains("extractor")) {
      // Model route: run the extractor over the raw rows, timing a probe
      // batch first.
      const EmbeddingSet raw =
          load_embeddings(payload.at("raw").get<std::string>(), manifest.size());
      auto extractor = make_extractor(payload["extractor"]);
      std::vector<std::vector<std::uint8_t>> batch;
      const std::size_t batch_n = std::min(config_.latency_batch, raw.rows());
      for (std::size_t i = 0; i < batch_n; ++i) {
        const auto row = raw.row(i);
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(row.data());
        batch.emplace_back(bytes, bytes + row.size_bytes());
      }
      profile = gate::measure_latency(*extractor, batch, config_.latency_warmup,
                                      config_.latency_reps, meta.declared_dim);
      std::vector<float> features;
      features.reserve(raw.rows() * meta.declared_dim);
      for (std::size_t i = 0; i < raw.rows(); ++i) {
        const auto row = raw.row(i);
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(row.data());
        const auto out = extractor->extract({bytes, row.size_bytes()});
        features.insert(features.end(), out.begin(), out.end());
      }
      set = EmbeddingSet(raw.rows(), meta.declared_dim, std::move(features));
    } else {
      set = load_embeddings(payload.at("embeddings").get<std::string>(), manifest.size());
      profile.ms_per_image = meta_obj.value("ms_per_image", 0.0);
      profile.batch_size = manifest.size();
    }

    const gate::GateVerdict verdict = gate_submission(meta, profile, subtrack.rules);
    if (!verdict.pass) {
      store_.mark_gated(id, verdict);
      return;
    }

    set = normalize(std::move(set));

    ProtocolSpec masked = protocol_preset("masked");
    masked.fpr_targets = {subtrack.masked_fpr};
    const metrics::MetricReport masked_report =
        metrics::evaluate(set, manifest, masked, config_.eval);

    ProtocolSpec mr = protocol_preset("mr");
    mr.fpr_targets = {subtrack.mr_fpr};
    const metrics::MetricReport mr_report = metrics::evaluate(set, manifest, mr, config_.eval);

    const auto group_percent = [&](const char* label, double fallback) {
      for (const auto& [name, sub] : mr_report.groups) {
        if (name == label) return sub.entries[0].tpr_percent;
      }
      return fallback;
    };

    metrics::LeaderboardEntry scores;
    scores.participant = rec->participant;
    scores.tpr_mask = masked_report.entries[0].tpr_percent;
    // A manifest without demographic annotations scores MR-All on the full
    // scope; absent groups report as zero.
    scores.tpr_mr_all = group_percent("MR-All", mr_report.entries[0].tpr_percent);
    scores.tpr_african = group_percent("African", 0.0);
    scores.tpr_caucasian = group_percent("Caucasian", 0.0);
    scores.tpr_south_asian = group_percent("SouthAsian", 0.0);
    scores.tpr_east_asian = group_percent("EastAsian", 0.0);
    scores.size_mb = static_cast<double>(meta.model_bytes) / (1024.0 * 1024.0);
    scores.time_ms = profile.ms_per_image;
    scores.feat_dim = meta.declared_dim;
    scores.weighted_score = metrics::weighted_score(scores.tpr_mask, scores.tpr_mr_all);

    const json reports{{"masked", json::parse(metrics::report_to_json(masked_report))},
                       {"mr", json::parse(metrics::report_to_json(mr_report))}};
    store_.mark_done(id, scores, reports.dump());
  } catch (const std::exception& e) {
    store_.mark_failed(id, e.what());
  }
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit Impl(Service& svc) : service(svc) {
    server.Post("/submit", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const std::uint64_t id = service.submit(req.body);
        res.set_content(json{{"id", id}}.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      }
    });
    server.Get(R"(/status/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::uint64_t id = std::stoull(req.matches[1]);
      const auto rec = service.status(id);
      if (!rec) {
        res.status = 404;
        res.set_content(json{{"error", "unknown submission"}}.dump(), "application/json");
        return;
      }
      res.set_content(record_to_json(*rec), "application/json");
    });
    server.Get(R"(/leaderboard/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 try {
                   const auto entries = service.leaderboard(req.matches[1]);
                   json body;
                   body["subtrack"] = std::string(req.matches[1]);
                   body["entries"] = json::parse(metrics::leaderboard_to_json(entries));
                   body["table"] = metrics::leaderboard_table(entries);
                   res.set_content(body.dump(2), "application/json");
                 } catch (const std::exception& e) {
                   res.status = 404;
                   res.set_content(json{{"error", e.what()}}.dump(), "application/json");
                 }
               });
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
    if (impl_->port < 0) throw Error("cannot bind to " + host);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  } else {
    impl_->port = port;
    if (!impl_->server.bind_to_port(host, port)) {
      throw Error("cannot bind to " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  }
  return impl_->port;
}

void HttpServer::wait_until_ready() {
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (impl_ && impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

}  // namespace pairbench::harness
