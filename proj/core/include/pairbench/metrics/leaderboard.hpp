#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pairbench::metrics {

// One leaderboard row; TPR fields are percentages.
struct LeaderboardEntry {
  std::string participant;
  double tpr_mask = 0.0;
  double tpr_children = 0.0;
  double tpr_african = 0.0;
  double tpr_caucasian = 0.0;
  double tpr_south_asian = 0.0;
  double tpr_east_asian = 0.0;
  double tpr_mr_all = 0.0;
  double size_mb = 0.0;
  double time_ms = 0.0;
  std::uint32_t feat_dim = 0;
  double weighted_score = 0.0;

  bool operator==(const LeaderboardEntry&) const = default;
};

// Recomputes every weighted score, then orders by descending score; ties keep
// input order.
std::vector<LeaderboardEntry> rank_leaderboard(std::vector<LeaderboardEntry> entries);

std::vector<LeaderboardEntry> parse_leaderboard_json(const std::string& json_text);
std::string leaderboard_to_json(std::span<const LeaderboardEntry> entries);

// Fixed-width text table; columns follow the published leaderboards with the
// weighted score appended.
std::string leaderboard_table(std::span<const LeaderboardEntry> entries);

}  // namespace pairbench::metrics
