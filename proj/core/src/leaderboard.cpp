#include "pairbench/metrics/leaderboard.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "pairbench/core/error.hpp"
#include "pairbench/metrics/metrics.hpp"

namespace pairbench::metrics {

using nlohmann::json;

std::vector<LeaderboardEntry> rank_leaderboard(std::vector<LeaderboardEntry> entries) {
  if (entries.empty()) throw Error("rank_leaderboard: no entries");
  for (auto& e : entries) e.weighted_score = weighted_score(e.tpr_mask, e.tpr_mr_all);
  std::stable_sort(entries.begin(), entries.end(),
                   [](const LeaderboardEntry& x, const LeaderboardEntry& y) {
                     return x.weighted_score > y.weighted_score;
                   });
  return entries;
}

namespace {

LeaderboardEntry entry_from_json(const json& j) {
  LeaderboardEntry e;
  e.participant = j.at("participant").get<std::string>();
  e.tpr_mask = j.at("tpr_mask").get<double>();
  e.tpr_children = j.value("tpr_children", 0.0);
  e.tpr_african = j.value("tpr_african", 0.0);
  e.tpr_caucasian = j.value("tpr_caucasian", 0.0);
  e.tpr_south_asian = j.value("tpr_south_asian", 0.0);
  e.tpr_east_asian = j.value("tpr_east_asian", 0.0);
  e.tpr_mr_all = j.at("tpr_mr_all").get<double>();
  e.size_mb = j.value("size_mb", 0.0);
  e.time_ms = j.value("time_ms", 0.0);
  e.feat_dim = j.value("feat_dim", 0u);
  e.weighted_score = j.value("weighted_score", 0.0);
  return e;
}

json entry_to_json(const LeaderboardEntry& e) {
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

}  // namespace

std::vector<LeaderboardEntry> parse_leaderboard_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("leaderboard: malformed JSON: ") + e.what());
  }
  const json& rows = j.is_array() ? j : j.at("entries");
  std::vector<LeaderboardEntry> out;
  for (const auto& row : rows) out.push_back(entry_from_json(row));
  return out;
}

std::string leaderboard_to_json(std::span<const LeaderboardEntry> entries) {
  json rows = json::array();
  for (const auto& e : entries) rows.push_back(entry_to_json(e));
  return rows.dump(2);
}

std::string leaderboard_table(std::span<const LeaderboardEntry> entries) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-4s %-16s %8s %9s %8s %10s %11s %10s %8s %9s %9s %8s %9s\n",
                "Rank", "Participant", "Mask", "Children", "African", "Caucasian", "SouthAsian",
                "EastAsian", "MR-All", "Size(MB)", "Time(ms)", "FeatDim", "Weighted");
  out += line;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    std::snprintf(line, sizeof(line),
                  "%-4zu %-16s %8.3f %9.3f %8.3f %10.3f %11.3f %10.3f %8.3f %9.3f %9.3f %8u %9.5f\n",
                  i + 1, e.participant.c_str(), e.tpr_mask, e.tpr_children, e.tpr_african,
                  e.tpr_caucasian, e.tpr_south_asian, e.tpr_east_asian, e.tpr_mr_all, e.size_mb,
                  e.time_ms, e.feat_dim, e.weighted_score);
    out += line;
  }
  return out;
}

}  // namespace pairbench::metrics
