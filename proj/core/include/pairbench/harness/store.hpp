#pragma once

#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pairbench/gate/gate.hpp"
#include "pairbench/metrics/leaderboard.hpp"

namespace pairbench::harness {

enum class SubmissionState : std::uint8_t { Queued, Running, Done, Failed, Gated };

const char* to_string(SubmissionState s);
SubmissionState parse_state(const std::string& s);

struct SubmissionRecord {
  std::uint64_t id = 0;
  std::string participant;
  std::string subtrack;
  std::string timestamp;  // ISO 8601 UTC, assigned at submission
  SubmissionState state = SubmissionState::Queued;
  std::string payload_json;
  gate::GateVerdict verdict;           // gated or done
  metrics::LeaderboardEntry scores;    // done only
  double weighted_score = 0.0;         // done only
  std::string reports_json;            // done only; one report per protocol
  std::string failure;                 // failed only
};

// Append-only JSONL event log with a periodic snapshot. Replaying the log
// reconstructs the exact pre-crash state; events carry sequence numbers so a
// replayed event is applied at most once. State transitions are restricted to
// queued -> running -> {done, failed, gated}.
class EventStore {
 public:
  explicit EventStore(std::string data_dir);

  std::uint64_t submit(const std::string& participant, const std::string& subtrack,
                       const std::string& payload_json);
  void mark_running(std::uint64_t id);
  void mark_gated(std::uint64_t id, const gate::GateVerdict& verdict);
  void mark_failed(std::uint64_t id, const std::string& error);
  void mark_done(std::uint64_t id, const metrics::LeaderboardEntry& scores,
                 const std::string& reports_json);

  std::optional<SubmissionRecord> get(std::uint64_t id) const;
  std::vector<SubmissionRecord> all() const;
  std::vector<std::uint64_t> pending() const;  // queued ids in FIFO order

  // Done submissions of one subtrack, best weighted score per participant,
  // ranked.
  std::vector<metrics::LeaderboardEntry> leaderboard(const std::string& subtrack) const;

  void write_snapshot();

  const std::string& data_dir() const { return data_dir_; }

 private:
  void append_line(const std::string& line);
  void maybe_snapshot_locked();
  void write_snapshot_locked();
  void load();

  std::string data_dir_;
  mutable std::mutex mutex_;
  std::ofstream log_;
  std::uint64_t last_seq_ = 0;
  std::uint64_t next_id_ = 1;
  std::uint64_t events_since_snapshot_ = 0;
  std::vector<SubmissionRecord> records_;  // ordered by id
};

std::string record_to_json(const SubmissionRecord& record);

}  // namespace pairbench::harness
