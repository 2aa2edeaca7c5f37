#include "pairbench/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "pairbench/core/error.hpp"
#include "pairbench/simsel/pairs.hpp"

namespace pairbench::metrics {

using nlohmann::json;

PairStats PairStats::from_counts(std::uint64_t n_images, std::uint64_t n_positive) {
  PairStats s;
  s.n_images = n_images;
  s.n_positive = n_positive;
  const std::uint64_t unordered_total = n_images * (n_images - 1) / 2;
  s.n_negative_engine = unordered_total - n_positive;
  s.n_negative_paper = n_images * (n_images - 1) - n_positive;
  return s;
}

PairStats count_pairs(const Manifest& manifest, const ProtocolSpec& spec) {
  const auto universe = simsel::resolve_universe(manifest, spec);
  if (spec.pairing == Pairing::AllPairs) {
    std::unordered_map<std::string_view, std::uint64_t> per_identity;
    for (std::uint32_t row : universe.a) ++per_identity[manifest.records[row].identity_id];
    std::uint64_t positives = 0;
    for (const auto& [_, n] : per_identity) positives += n * (n - 1) / 2;
    return PairStats::from_counts(universe.a.size(), positives);
  }
  std::unordered_map<std::string_view, std::uint64_t> probes, galleries;
  for (std::uint32_t row : universe.a) ++probes[manifest.records[row].identity_id];
  for (std::uint32_t row : universe.b) ++galleries[manifest.records[row].identity_id];
  std::uint64_t positives = 0;
  for (const auto& [id, np] : probes) {
    if (auto it = galleries.find(id); it != galleries.end()) positives += np * it->second;
  }
  PairStats s;
  s.n_images = universe.a.size() + universe.b.size();
  s.n_positive = positives;
  s.n_negative_engine =
      static_cast<std::uint64_t>(universe.a.size()) * universe.b.size() - positives;
  // Cross protocols have no ordered-pair convention to reconcile with.
  s.n_negative_paper = s.n_negative_engine;
  return s;
}

double to_percent_3dp(double fraction) {
  return std::round(fraction * 100.0 * 1000.0) / 1000.0;
}

OperatingPoint operating_point(std::span<const float> pos_descending,
                               std::span<const float> neg_top_descending,
                               std::uint64_t n_negative, double fpr_target) {
  if (pos_descending.empty()) throw Error("tpr_at_fpr: empty positive set");
  if (n_negative == 0 || neg_top_descending.empty()) {
    throw Error("tpr_at_fpr: empty negative stream");
  }
  if (!(fpr_target > 0.0 && fpr_target < 1.0)) {
    throw Error("tpr_at_fpr: fpr target outside (0,1)");
  }

  OperatingPoint op;
  op.fpr_target = fpr_target;
  op.k = static_cast<std::uint64_t>(std::floor(fpr_target * static_cast<double>(n_negative)));
  if (op.k > neg_top_descending.size()) {
    throw Error("tpr_at_fpr: selection holds " + std::to_string(neg_top_descending.size()) +
                " scores, k=" + std::to_string(op.k) + " requires more");
  }
  op.threshold = op.k >= 1 ? neg_top_descending[op.k - 1] : neg_top_descending[0];

  // Everything strictly above the threshold is inside the retained top-k.
  const auto gt = [](float v, float t) { return v > t; };
  op.neg_above = static_cast<std::uint64_t>(
      std::lower_bound(neg_top_descending.begin(), neg_top_descending.end(), op.threshold,
                       gt) -
      neg_top_descending.begin());
  op.pos_accepted = static_cast<std::uint64_t>(
      std::lower_bound(pos_descending.begin(), pos_descending.end(), op.threshold, gt) -
      pos_descending.begin());
  op.achieved_fpr = static_cast<double>(op.neg_above) / static_cast<double>(n_negative);
  op.tpr = static_cast<double>(op.pos_accepted) / static_cast<double>(pos_descending.size());
  op.tpr_percent = to_percent_3dp(op.tpr);
  return op;
}

OperatingPoint tpr_at_fpr(std::span<const float> pos_scores, std::span<const float> neg_scores,
                          double fpr_target) {
  if (pos_scores.empty()) throw Error("tpr_at_fpr: empty positive set");
  if (neg_scores.empty()) throw Error("tpr_at_fpr: empty negative stream");
  std::vector<float> pos(pos_scores.begin(), pos_scores.end());
  std::vector<float> neg(neg_scores.begin(), neg_scores.end());
  std::sort(pos.begin(), pos.end(), std::greater<float>());
  std::sort(neg.begin(), neg.end(), std::greater<float>());
  return operating_point(pos, neg, neg.size(), fpr_target);
}

double weighted_score(double tpr_mask_percent, double tpr_mr_all_percent) {
  if (tpr_mask_percent < 0.0 || tpr_mask_percent > 100.0 || tpr_mr_all_percent < 0.0 ||
      tpr_mr_all_percent > 100.0) {
    throw Error("weighted_score: TPR percentages must lie in [0,100]");
  }
  return 0.25 * tpr_mask_percent + 0.75 * tpr_mr_all_percent;
}

namespace {

json stats_to_json(const PairStats& s) {
  return json{{"n_images", s.n_images},
              {"n_positive", s.n_positive},
              {"n_negative_engine", s.n_negative_engine},
              {"n_negative_paper", s.n_negative_paper}};
}

PairStats stats_from_json(const json& j) {
  PairStats s;
  s.n_images = j.at("n_images").get<std::uint64_t>();
  s.n_positive = j.at("n_positive").get<std::uint64_t>();
  s.n_negative_engine = j.at("n_negative_engine").get<std::uint64_t>();
  s.n_negative_paper = j.at("n_negative_paper").get<std::uint64_t>();
  return s;
}

json entry_to_json(const OperatingPoint& e) {
  return json{{"fpr_target", e.fpr_target},
              {"k", e.k},
              {"threshold", e.threshold},
              {"tpr", e.tpr},
              {"tpr_percent", e.tpr_percent},
              {"achieved_fpr", e.achieved_fpr},
              {"pos_accepted", e.pos_accepted},
              {"neg_above", e.neg_above}};
}

OperatingPoint entry_from_json(const json& j) {
  OperatingPoint e;
  e.fpr_target = j.at("fpr_target").get<double>();
  e.k = j.at("k").get<std::uint64_t>();
  e.threshold = j.at("threshold").get<float>();
  e.tpr = j.at("tpr").get<double>();
  e.tpr_percent = j.at("tpr_percent").get<double>();
  e.achieved_fpr = j.at("achieved_fpr").get<double>();
  e.pos_accepted = j.at("pos_accepted").get<std::uint64_t>();
  e.neg_above = j.at("neg_above").get<std::uint64_t>();
  return e;
}

json report_to_json_obj(const MetricReport& r) {
  json j;
  j["protocol"] = r.protocol;
  j["pair_stats"] = stats_to_json(r.pair_stats);
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back(entry_to_json(e));
  j["entries"] = entries;
  if (!r.groups.empty()) {
    json groups = json::object();
    for (const auto& [name, sub] : r.groups) groups[name] = report_to_json_obj(sub);
    j["groups"] = groups;
  }
  if (!r.debug_top_negatives.empty()) {
    json dbg = json::array();
    for (const auto& p : r.debug_top_negatives) {
      dbg.push_back(json{{"score", p.score}, {"image_a", p.image_a}, {"image_b", p.image_b}});
    }
    j["debug_top_negatives"] = dbg;
  }
  return j;
}

MetricReport report_from_json_obj(const json& j) {
  MetricReport r;
  r.protocol = j.at("protocol").get<std::string>();
  r.pair_stats = stats_from_json(j.at("pair_stats"));
  for (const auto& e : j.at("entries")) r.entries.push_back(entry_from_json(e));
  if (j.contains("groups")) {
    for (auto it = j["groups"].begin(); it != j["groups"].end(); ++it) {
      r.groups.emplace_back(it.key(), report_from_json_obj(it.value()));
    }
  }
  if (j.contains("debug_top_negatives")) {
    for (const auto& p : j["debug_top_negatives"]) {
      r.debug_top_negatives.push_back({p.at("score").get<float>(),
                                       p.at("image_a").get<std::string>(),
                                       p.at("image_b").get<std::string>()});
    }
  }
  return r;
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
  return report_to_json_obj(report).dump(2);
}

MetricReport report_from_json(const std::string& json_text) {
  try {
    return report_from_json_obj(json::parse(json_text));
  } catch (const json::exception& e) {
    throw Error(std::string("report: malformed JSON: ") + e.what());
  }
}

}  // namespace pairbench::metrics
