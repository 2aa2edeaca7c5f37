#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pairbench::gate {

// Per-subtrack submission constraints. Latency and model size are strict
// upper bounds; the feature-dimension rule is inclusive (every accepted
// submission in the reference leaderboards reports exactly the cap).
struct SubtrackRules {
  std::string name;
  double max_size_mb = 0.0;
  std::uint32_t max_feat_dim = 0;
  double max_ms_per_image = 0.0;

  void validate() const;  // all bounds positive
};

// Shipped presets: "ms1m" (1024 MB, 512, 10 ms) and "glint360k"
// (1024 MB, 1024, 20 ms).
SubtrackRules rules_preset(const std::string& name);
SubtrackRules parse_rules_json(const std::string& json_text);
std::string rules_to_json(const SubtrackRules& rules);

struct SubmissionMeta {
  std::string participant;
  std::uint32_t declared_dim = 0;
  std::uint64_t model_bytes = 0;
  std::string artifact_digest;
};

struct MeasuredProfile {
  double ms_per_image = 0.0;  // median over timed reps
  std::size_t batch_size = 0;
  std::size_t warmup = 0;
  std::size_t reps = 0;
};

struct GateReason {
  std::string code;    // "model_size" | "feat_dim" | "latency"
  std::string detail;

  bool operator==(const GateReason&) const = default;
};

struct GateVerdict {
  bool pass = false;
  std::vector<GateReason> reasons;  // empty iff pass
};

// Pure function of (meta, profile, rules); every violated rule is listed.
GateVerdict gate_submission(const SubmissionMeta& meta, const MeasuredProfile& profile,
                            const SubtrackRules& rules);

std::string verdict_to_json(const GateVerdict& verdict);

// Bytes in, embedding out. Implementations declare their output dimension.
class EmbeddingExtractor {
 public:
  virtual ~EmbeddingExtractor() = default;
  virtual std::uint32_t feature_dim() const = 0;
  virtual std::vector<float> extract(std::span<const std::uint8_t> input) = 0;
};

// Runs the extractor serially over the probe batch: `warmup` untimed passes,
// then `reps` timed passes (reps >= 3); ms_per_image is the median per-image
// wall time. Every output is checked against declared_dim.
MeasuredProfile measure_latency(EmbeddingExtractor& extractor,
                                std::span<const std::vector<std::uint8_t>> probe_batch,
                                std::size_t warmup, std::size_t reps,
                                std::uint32_t declared_dim);

}  // namespace pairbench::gate
