#include "pairbench/harness/store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>

#include <json.hpp>

#include "pairbench/core/error.hpp"
#include "pairbench/metrics/metrics.hpp"

namespace pairbench::harness {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(SubmissionState s) {
  switch (s) {
    case SubmissionState::Queued: return "queued";
    case SubmissionState::Running: return "running";
    case SubmissionState::Done: return "done";
    case SubmissionState::Failed: return "failed";
    case SubmissionState::Gated: return "gated";
  }
  return "queued";
}

SubmissionState parse_state(const std::string& s) {
  if (s == "queued") return SubmissionState::Queued;
  if (s == "running") return SubmissionState::Running;
  if (s == "done") return SubmissionState::Done;
  if (s == "failed") return SubmissionState::Failed;
  if (s == "gated") return SubmissionState::Gated;
  throw Error("unknown submission state: '" + s + "'");
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json verdict_to_obj(const gate::GateVerdict& v) {
  json reasons = json::array();
  for (const auto& r : v.reasons) reasons.push_back(json{{"code", r.code}, {"detail", r.detail}});
  return json{{"pass", v.pass}, {"reasons", reasons}};
}

gate::GateVerdict verdict_from_obj(const json& j) {
  gate::GateVerdict v;
  v.pass = j.at("pass").get<bool>();
  for (const auto& r : j.at("reasons")) {
    v.reasons.push_back({r.at("code").get<std::string>(), r.at("detail").get<std::string>()});
  }
  return v;
}

json scores_to_obj(const metrics::LeaderboardEntry& e) {
  return json{{"participant", e.participant},
              {"tpr_mask", e.tpr_mask},
              {"tpr_children", e.tpr_children},
              {"tpr_african", e.tpr_african},
              {"tpr_caucasian", e.tpr_caucasian},
              {"tpr_south_asian", e.tpr_south_asian},
              {"tpr_east_asian", e.tpr_east_asian},
              {"tpr_mr_all", e.tpr_mr_all},
              {"size_mb", e.size_mb},
              {"time_ms", e.time_ms},
              {"feat_dim", e.feat_dim},
              {"weighted_score", e.weighted_score}};
}

metrics::LeaderboardEntry scores_from_obj(const json& j) {
  metrics::LeaderboardEntry e;
  e.participant = j.at("participant").get<std::string>();
  e.tpr_mask = j.at("tpr_mask").get<double>();
  e.tpr_children = j.at("tpr_children").get<double>();
  e.tpr_african = j.at("tpr_african").get<double>();
  e.tpr_caucasian = j.at("tpr_caucasian").get<double>();
  e.tpr_south_asian = j.at("tpr_south_asian").get<double>();
  e.tpr_east_asian = j.at("tpr_east_asian").get<double>();
  e.tpr_mr_all = j.at("tpr_mr_all").get<double>();
  e.size_mb = j.at("size_mb").get<double>();
  e.time_ms = j.at("time_ms").get<double>();
  e.feat_dim = j.at("feat_dim").get<std::uint32_t>();
  e.weighted_score = j.at("weighted_score").get<double>();
  return e;
}

SubmissionRecord* find_record(std::vector<SubmissionRecord>& records, std::uint64_t id) {
  auto it = std::lower_bound(records.begin(), records.end(), id,
                             [](const SubmissionRecord& r, std::uint64_t v) { return r.id < v; });
  if (it == records.end() || it->id != id) return nullptr;
  return &*it;
}

void require_transition(const SubmissionRecord& rec, SubmissionState to) {
  const SubmissionState from = rec.state;
  const bool ok =
      (from == SubmissionState::Queued && to == SubmissionState::Running) ||
      (from == SubmissionState::Running &&
       (to == SubmissionState::Done || to == SubmissionState::Failed ||
        to == SubmissionState::Gated));
  if (!ok) {
    throw Error("submission " + std::to_string(rec.id) + ": illegal transition " +
                to_string(from) + " -> " + to_string(to));
  }
}

// The one place an event mutates state; used identically for live appends and
// for log replay.
void apply_event(const json& e, std::vector<SubmissionRecord>& records,
                 std::uint64_t& next_id) {
  const std::string type = e.at("type").get<std::string>();
  if (type == "submitted") {
    SubmissionRecord rec;
    rec.id = e.at("id").get<std::uint64_t>();
    rec.participant = e.at("participant").get<std::string>();
    rec.subtrack = e.at("subtrack").get<std::string>();
    rec.timestamp = e.at("timestamp").get<std::string>();
    rec.payload_json = e.at("payload").dump();
    rec.state = SubmissionState::Queued;
    records.push_back(std::move(rec));
    next_id = std::max(next_id, records.back().id + 1);
    return;
  }
  const std::uint64_t id = e.at("id").get<std::uint64_t>();
  SubmissionRecord* rec = find_record(records, id);
  if (!rec) throw Error("event references unknown submission " + std::to_string(id));
  if (type == "running") {
    require_transition(*rec, SubmissionState::Running);
    rec->state = SubmissionState::Running;
  } else if (type == "gated") {
    require_transition(*rec, SubmissionState::Gated);
    rec->state = SubmissionState::Gated;
    rec->verdict = verdict_from_obj(e.at("verdict"));
  } else if (type == "failed") {
    require_transition(*rec, SubmissionState::Failed);
    rec->state = SubmissionState::Failed;
    rec->failure = e.at("error").get<std::string>();
  } else if (type == "done") {
    require_transition(*rec, SubmissionState::Done);
    rec->state = SubmissionState::Done;
    rec->verdict.pass = true;
    rec->scores = scores_from_obj(e.at("scores"));
    rec->weighted_score = rec->scores.weighted_score;
    rec->reports_json = e.at("reports").dump();
  } else {
    throw Error("unknown event type: '" + type + "'");
  }
}

json record_to_obj(const SubmissionRecord& r) {
  json j;
  j["id"] = r.id;
  j["participant"] = r.participant;
  j["subtrack"] = r.subtrack;
  j["timestamp"] = r.timestamp;
  j["state"] = to_string(r.state);
  j["payload"] = json::parse(r.payload_json.empty() ? "{}" : r.payload_json);
  j["verdict"] = verdict_to_obj(r.verdict);
  if (r.state == SubmissionState::Done) {
    j["scores"] = scores_to_obj(r.scores);
    j["weighted_score"] = r.weighted_score;
    j["reports"] = json::parse(r.reports_json);
  }
  if (r.state == SubmissionState::Failed) j["failure"] = r.failure;
  return j;
}

SubmissionRecord record_from_obj(const json& j) {
  SubmissionRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.participant = j.at("participant").get<std::string>();
  r.subtrack = j.at("subtrack").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  r.state = parse_state(j.at("state").get<std::string>());
  r.payload_json = j.at("payload").dump();
  r.verdict = verdict_from_obj(j.at("verdict"));
  if (r.state == SubmissionState::Done) {
    r.scores = scores_from_obj(j.at("scores"));
    r.weighted_score = j.at("weighted_score").get<double>();
    r.reports_json = j.at("reports").dump();
  }
  if (r.state == SubmissionState::Failed) r.failure = j.at("failure").get<std::string>();
  return r;
}

}  // namespace

std::string record_to_json(const SubmissionRecord& record) {
  return record_to_obj(record).dump(2);
}

EventStore::EventStore(std::string data_dir) : data_dir_(std::move(data_dir)) {
  fs::create_directories(data_dir_);
  load();
  log_.open(data_dir_ + "/events.jsonl", std::ios::app);
  if (!log_) throw Error("cannot open event log in " + data_dir_);
}

void EventStore::load() {
  const std::string snap_path = data_dir_ + "/snapshot.json";
  if (fs::exists(snap_path)) {
    std::ifstream in(snap_path);
    json snap;
    try {
      in >> snap;
    } catch (const json::exception& e) {
      throw Error("corrupt snapshot in " + data_dir_ + ": " + e.what());
    }
    last_seq_ = snap.at("last_seq").get<std::uint64_t>();
    next_id_ = snap.at("next_id").get<std::uint64_t>();
    for (const auto& r : snap.at("records")) records_.push_back(record_from_obj(r));
  }
  const std::string log_path = data_dir_ + "/events.jsonl";
  if (fs::exists(log_path)) {
    std::ifstream in(log_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json e;
      try {
        e = json::parse(line);
      } catch (const json::exception& ex) {
        throw Error(log_path + ":" + std::to_string(line_no) + ": corrupt event: " + ex.what());
      }
      const std::uint64_t seq = e.at("seq").get<std::uint64_t>();
      if (seq <= last_seq_) continue;  // snapshot already covers it; replay is idempotent
      apply_event(e, records_, next_id_);
      last_seq_ = seq;
    }
  }
}

void EventStore::append_line(const std::string& line) {
  log_ << line << '\n';
  log_.flush();
  if (!log_) throw Error("event log write failed in " + data_dir_);
}

void EventStore::maybe_snapshot_locked() {
  if (++events_since_snapshot_ >= 16) write_snapshot_locked();
}

void EventStore::write_snapshot_locked() {
  json snap;
  snap["last_seq"] = last_seq_;
  snap["next_id"] = next_id_;
  json recs = json::array();
  for (const auto& r : records_) recs.push_back(record_to_obj(r));
  snap["records"] = recs;
  const std::string tmp = data_dir_ + "/snapshot.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << snap.dump();
    if (!out) throw Error("snapshot write failed in " + data_dir_);
  }
  fs::rename(tmp, data_dir_ + "/snapshot.json");
  events_since_snapshot_ = 0;
}

void EventStore::write_snapshot() {
  std::lock_guard lock(mutex_);
  write_snapshot_locked();
}

std::uint64_t EventStore::submit(const std::string& participant, const std::string& subtrack,
                                 const std::string& payload_json) {
  std::lock_guard lock(mutex_);
  json e;
  e["seq"] = ++last_seq_;
  e["type"] = "submitted";
  e["id"] = next_id_;
  e["participant"] = participant;
  e["subtrack"] = subtrack;
  e["timestamp"] = utc_now();
  e["payload"] = json::parse(payload_json);
  apply_event(e, records_, next_id_);
  append_line(e.dump());
  maybe_snapshot_locked();
  return records_.back().id;
}

void EventStore::mark_running(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  json e{{"seq", ++last_seq_}, {"type", "running"}, {"id", id}};
  apply_event(e, records_, next_id_);
  append_line(e.dump());
  maybe_snapshot_locked();
}

void EventStore::mark_gated(std::uint64_t id, const gate::GateVerdict& verdict) {
  std::lock_guard lock(mutex_);
  json e{{"seq", ++last_seq_}, {"type", "gated"}, {"id", id}, {"verdict", verdict_to_obj(verdict)}};
  apply_event(e, records_, next_id_);
  append_line(e.dump());
  maybe_snapshot_locked();
}

void EventStore::mark_failed(std::uint64_t id, const std::string& error) {
  std::lock_guard lock(mutex_);
  json e{{"seq", ++last_seq_}, {"type", "failed"}, {"id", id}, {"error", error}};
  apply_event(e, records_, next_id_);
  append_line(e.dump());
  maybe_snapshot_locked();
}

void EventStore::mark_done(std::uint64_t id, const metrics::LeaderboardEntry& scores,
                           const std::string& reports_json) {
  std::lock_guard lock(mutex_);
  json e{{"seq", ++last_seq_},
         {"type", "done"},
         {"id", id},
         {"scores", scores_to_obj(scores)},
         {"reports", json::parse(reports_json)}};
  apply_event(e, records_, next_id_);
  append_line(e.dump());
  maybe_snapshot_locked();
}

std::optional<SubmissionRecord> EventStore::get(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  auto it = std::lower_bound(
      records_.begin(), records_.end(), id,
      [](const SubmissionRecord& r, std::uint64_t v) { return r.id < v; });
  if (it == records_.end() || it->id != id) return std::nullopt;
  return *it;
}

std::vector<SubmissionRecord> EventStore::all() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<std::uint64_t> EventStore::pending() const {
  std::lock_guard lock(mutex_);
  std::vector<std::uint64_t> ids;
  for (const auto& r : records_) {
    if (r.state == SubmissionState::Queued) ids.push_back(r.id);
  }
  return ids;
}

std::vector<metrics::LeaderboardEntry> EventStore::leaderboard(
    const std::string& subtrack) const {
  std::lock_guard lock(mutex_);
  // Best score per participant; earlier submission wins ties so the ordering
  // is reproducible.
  std::vector<metrics::LeaderboardEntry> best;
  for (const auto& r : records_) {
    if (r.state != SubmissionState::Done || r.subtrack != subtrack) continue;
    auto it = std::find_if(best.begin(), best.end(), [&](const metrics::LeaderboardEntry& e) {
      return e.participant == r.participant;
    });
    if (it == best.end()) {
      best.push_back(r.scores);
    } else if (r.weighted_score > it->weighted_score) {
      *it = r.scores;
    }
  }
  if (best.empty()) return {};
  return metrics::rank_leaderboard(std::move(best));
}

}  // namespace pairbench::harness
