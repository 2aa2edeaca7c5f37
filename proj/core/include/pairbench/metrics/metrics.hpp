#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pairbench/core/types.hpp"

namespace pairbench::metrics {

// Exact pair bookkeeping. The engine scores each unordered pair once
// (n_negative_engine); published statistics follow the ordered-minus-positive
// convention N*(N-1) - positives (n_negative_paper). Cosine is symmetric, so
// thresholds are taken from the engine counts while both conventions are
// reported.
struct PairStats {
  std::uint64_t n_images = 0;
  std::uint64_t n_positive = 0;
  std::uint64_t n_negative_engine = 0;
  std::uint64_t n_negative_paper = 0;

  // All-pairs convention from (N, positives) alone.
  static PairStats from_counts(std::uint64_t n_images, std::uint64_t n_positive);

  bool operator==(const PairStats&) const = default;
};

PairStats count_pairs(const Manifest& manifest, const ProtocolSpec& spec);

// One TPR@FPR operating point. k = floor(fpr_target * n_negative); the
// threshold is the k-th largest negative (the largest when k = 0) and the
// accept rule is strictly-greater-than, which pins achieved_fpr <= fpr_target
// under ties.
struct OperatingPoint {
  double fpr_target = 0.0;
  std::uint64_t k = 0;
  float threshold = 0.0f;
  double tpr = 0.0;
  double tpr_percent = 0.0;  // rounded to 3 decimals
  double achieved_fpr = 0.0;
  std::uint64_t pos_accepted = 0;
  std::uint64_t neg_above = 0;

  bool operator==(const OperatingPoint&) const = default;
};

// Materialized form; errors on an empty positive or negative set.
OperatingPoint tpr_at_fpr(std::span<const float> pos_scores, std::span<const float> neg_scores,
                          double fpr_target);

// Streaming back end: the negatives enter as (top-k' multiset, total count)
// with k' at least max(1, floor(fpr_target * n_negative)). pos_descending and
// neg_top_descending must be sorted descending.
OperatingPoint operating_point(std::span<const float> pos_descending,
                               std::span<const float> neg_top_descending,
                               std::uint64_t n_negative, double fpr_target);

struct DebugPair {
  float score;
  std::string image_a;
  std::string image_b;

  bool operator==(const DebugPair&) const = default;
};

struct MetricReport {
  std::string protocol;
  PairStats pair_stats;
  std::vector<OperatingPoint> entries;                          // one per fpr target
  std::vector<std::pair<std::string, MetricReport>> groups;     // breakdown + "MR-All"
  std::vector<DebugPair> debug_top_negatives;                   // debug mode only

  bool operator==(const MetricReport&) const = default;
};

std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& json_text);

// The challenge ranking criterion over percentages in [0,100]:
// 0.25 * TPR@Masked + 0.75 * TPR@MR-All.
double weighted_score(double tpr_mask_percent, double tpr_mr_all_percent);

double to_percent_3dp(double fraction);

}  // namespace pairbench::metrics
