#include "pairbench/syngen/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pairbench/core/error.hpp"

namespace pairbench::syngen {

namespace {

using metrics::MetricReport;
using metrics::OperatingPoint;
using metrics::PairStats;

struct ScoreBins {
  std::vector<float> positives;
  std::vector<float> negatives;
};

// Operating point recomputed from first principles over fully sorted scores.
OperatingPoint brute_point(const std::vector<float>& pos_desc,
                           const std::vector<float>& neg_desc, double fpr_target) {
  if (pos_desc.empty()) throw Error("oracle: empty positive set");
  if (neg_desc.empty()) throw Error("oracle: empty negative stream");
  OperatingPoint op;
  op.fpr_target = fpr_target;
  const std::uint64_t n_neg = neg_desc.size();
  op.k = static_cast<std::uint64_t>(std::floor(fpr_target * static_cast<double>(n_neg)));
  op.threshold = op.k >= 1 ? neg_desc[op.k - 1] : neg_desc[0];
  std::uint64_t above = 0;
  for (float v : neg_desc) {
    if (v > op.threshold) ++above;
    else break;  // sorted descending
  }
  op.neg_above = above;
  std::uint64_t accepted = 0;
  for (float v : pos_desc) {
    if (v > op.threshold) ++accepted;
    else break;
  }
  op.pos_accepted = accepted;
  op.achieved_fpr = static_cast<double>(op.neg_above) / static_cast<double>(n_neg);
  op.tpr = static_cast<double>(op.pos_accepted) / static_cast<double>(pos_desc.size());
  op.tpr_percent = metrics::to_percent_3dp(op.tpr);
  return op;
}

MetricReport report_for(const std::string& label, const PairStats& stats, ScoreBins& bins,
                        const std::vector<double>& targets) {
  std::sort(bins.positives.begin(), bins.positives.end(), std::greater<float>());
  std::sort(bins.negatives.begin(), bins.negatives.end(), std::greater<float>());
  if (bins.positives.size() != stats.n_positive ||
      bins.negatives.size() != stats.n_negative_engine) {
    throw Error("oracle: pair bookkeeping mismatch in scope '" + label + "'");
  }
  MetricReport r;
  r.protocol = label;
  r.pair_stats = stats;
  for (double t : targets) r.entries.push_back(brute_point(bins.positives, bins.negatives, t));
  return r;
}

}  // namespace

MetricReport oracle_evaluate(const EmbeddingSet& set, const Manifest& manifest,
                             const ProtocolSpec& spec) {
  manifest.validate();
  spec.validate();
  if (set.rows() != manifest.size()) {
    throw Error("oracle: embedding rows do not match manifest records");
  }
  if (set.rows() > kOracleMaxImages) {
    throw Error("oracle: " + std::to_string(set.rows()) + " images exceed the " +
                std::to_string(kOracleMaxImages) + "-image guard rail");
  }
  if (!is_normalized(set)) {
    throw Error("oracle: embeddings are not unit-normalized");
  }

  const auto& recs = manifest.records;
  const std::size_t n = recs.size();

  // Independent enumeration: membership flags straight from the records.
  std::vector<char> in_a(n, 0), in_b(n, 0);
  if (spec.pairing == Pairing::AllPairs) {
    for (std::size_t i = 0; i < n; ++i) in_a[i] = spec.scope_filter.matches(recs[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!spec.scope_filter.matches(recs[i])) continue;
      const bool p = spec.probe_filter.matches(recs[i]);
      const bool g = spec.gallery_filter.matches(recs[i]);
      if (p && g) {
        throw Error("oracle: probe and gallery sets overlap at image '" + recs[i].image_id +
                    "'");
      }
      in_a[i] = p;
      in_b[i] = g;
    }
  }

  const bool breakdown = spec.group_breakdown;
  std::vector<std::string> scope_labels = {spec.name};
  if (breakdown) {
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      scope_labels.push_back(to_string(static_cast<Group>(g)));
    }
    scope_labels.push_back("MR-All");
  }
  const std::size_t n_scopes = scope_labels.size();
  std::vector<ScoreBins> bins(n_scopes);
  std::vector<PairStats> stats(n_scopes);

  const auto pair_scopes = [&](std::size_t i, std::size_t j, auto&& emit) {
    emit(0);
    if (!breakdown) return;
    const Group gi = recs[i].group;
    const Group gj = recs[j].group;
    if (gi == Group::None || gj == Group::None) return;
    emit(5);
    if (gi == gj) emit(1 + static_cast<std::size_t>(gi));
  };

  const auto score_pair = [&](std::size_t i, std::size_t j) {
    const float s = dot_f32(set.row(i), set.row(j));
    const bool positive = recs[i].identity_id == recs[j].identity_id;
    pair_scopes(i, j, [&](std::size_t scope) {
      auto& bin = bins[scope];
      auto& st = stats[scope];
      if (positive) {
        bin.positives.push_back(s);
        ++st.n_positive;
      } else {
        bin.negatives.push_back(s);
        ++st.n_negative_engine;
      }
    });
  };

  if (spec.pairing == Pairing::AllPairs) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_a[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (in_a[j]) score_pair(i, j);
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_a[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (in_b[j]) score_pair(i, j);
      }
    }
  }

  // Image counts and the negative-pair conventions per scope.
  for (std::size_t scope = 0; scope < n_scopes; ++scope) {
    auto& st = stats[scope];
    std::uint64_t na = 0, nb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool member =
          scope == 0 ||
          (recs[i].group != Group::None &&
           (scope == 5 || static_cast<std::size_t>(recs[i].group) == scope - 1));
      if (!member) continue;
      if (in_a[i]) ++na;
      if (in_b[i]) ++nb;
    }
    if (spec.pairing == Pairing::AllPairs) {
      st.n_images = na;
      st.n_negative_paper = na * (na - 1) - st.n_positive;
    } else {
      st.n_images = na + nb;
      st.n_negative_paper = st.n_negative_engine;
    }
  }

  if (stats[0].n_images == 0) {
    throw Error("oracle: protocol '" + spec.name + "' admits no images");
  }

  MetricReport report;
  std::vector<std::pair<std::string, MetricReport>> subs;
  for (std::size_t scope = 0; scope < n_scopes; ++scope) {
    if (stats[scope].n_images == 0) continue;
    MetricReport sub = report_for(scope_labels[scope], stats[scope], bins[scope],
                                  spec.fpr_targets);
    if (scope == 0) {
      report.protocol = sub.protocol;
      report.pair_stats = sub.pair_stats;
      report.entries = std::move(sub.entries);
    } else {
      subs.emplace_back(scope_labels[scope], std::move(sub));
    }
  }
  std::sort(subs.begin(), subs.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  report.groups = std::move(subs);
  return report;
}

}  // namespace pairbench::syngen
