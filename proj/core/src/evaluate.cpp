#include "pairbench/metrics/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "pairbench/core/error.hpp"
#include "pairbench/simsel/kernel.hpp"
#include "pairbench/simsel/pairs.hpp"
#include "pairbench/simsel/topk.hpp"

namespace pairbench::metrics {

namespace {

// Scope indices: 0 = overall; with group breakdown 1..4 = the demographic
// groups (both endpoints inside), 5 = MR-All (both endpoints grouped).
constexpr std::size_t kOverall = 0;
constexpr std::size_t kMrAll = 5;
constexpr std::uint8_t kNoGroup = 4;

struct ScopePlan {
  std::string label;
  PairStats stats;
  std::size_t k_select = 1;
  bool active = false;
};

std::uint64_t floor_k(double fpr_target, std::uint64_t n_negative) {
  return static_cast<std::uint64_t>(
      std::floor(fpr_target * static_cast<double>(n_negative)));
}

struct WorkerState {
  std::vector<simsel::TopKSelector> selectors;  // one per scope
  std::vector<std::vector<float>> positives;    // one per scope
};

}  // namespace

MetricReport evaluate(const EmbeddingSet& set, const Manifest& manifest,
                      const ProtocolSpec& spec, const EvalOptions& options) {
  manifest.validate();
  spec.validate();
  if (set.rows() != manifest.size()) {
    throw Error("evaluate: embedding rows (" + std::to_string(set.rows()) +
                ") do not match manifest records (" + std::to_string(manifest.size()) + ")");
  }
  if (!is_normalized(set)) {
    throw Error("evaluate: embeddings are not unit-normalized; call normalize() first");
  }

  const auto universe = simsel::resolve_universe(manifest, spec);
  const auto& records = manifest.records;

  // Dense identity codes and group codes for cheap per-cell classification.
  std::vector<std::uint32_t> identity(records.size());
  std::vector<std::uint8_t> group(records.size());
  {
    std::unordered_map<std::string_view, std::uint32_t> ids;
    ids.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      identity[i] =
          ids.emplace(records[i].identity_id, static_cast<std::uint32_t>(ids.size()))
              .first->second;
      group[i] = static_cast<std::uint8_t>(records[i].group);
    }
  }

  const std::size_t n_scopes = spec.group_breakdown ? 6 : 1;
  std::vector<ScopePlan> scopes(n_scopes);
  scopes[kOverall].label = spec.name;
  if (spec.group_breakdown) {
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      scopes[1 + g].label = to_string(static_cast<Group>(g));
    }
    scopes[kMrAll].label = "MR-All";
  }

  // Exact per-scope pair counts from the manifest; the selection sizes and
  // the final bookkeeping cross-check both hang off these integers.
  {
    const auto member = [&](std::uint32_t row, std::size_t scope) {
      if (scope == kOverall) return true;
      if (scope == kMrAll) return group[row] != kNoGroup;
      return group[row] == static_cast<std::uint8_t>(scope - 1);
    };
    for (std::size_t s = 0; s < n_scopes; ++s) {
      auto& plan = scopes[s];
      if (spec.pairing == Pairing::AllPairs) {
        std::unordered_map<std::uint32_t, std::uint64_t> per_id;
        std::uint64_t n = 0;
        for (std::uint32_t row : universe.a) {
          if (!member(row, s)) continue;
          ++n;
          ++per_id[identity[row]];
        }
        std::uint64_t pos = 0;
        for (const auto& [_, c] : per_id) pos += c * (c - 1) / 2;
        plan.stats = PairStats::from_counts(n, pos);
      } else {
        std::unordered_map<std::uint32_t, std::uint64_t> probes, galleries;
        std::uint64_t np = 0, ng = 0;
        for (std::uint32_t row : universe.a) {
          if (!member(row, s)) continue;
          ++np;
          ++probes[identity[row]];
        }
        for (std::uint32_t row : universe.b) {
          if (!member(row, s)) continue;
          ++ng;
          ++galleries[identity[row]];
        }
        std::uint64_t pos = 0;
        for (const auto& [id, c] : probes) {
          if (auto it = galleries.find(id); it != galleries.end()) pos += c * it->second;
        }
        plan.stats.n_images = np + ng;
        plan.stats.n_positive = pos;
        plan.stats.n_negative_engine = np * ng - pos;
        plan.stats.n_negative_paper = plan.stats.n_negative_engine;
      }
      plan.active = plan.stats.n_images > 0;
      std::uint64_t k = 1;
      for (double t : spec.fpr_targets) {
        k = std::max(k, floor_k(t, plan.stats.n_negative_engine));
      }
      plan.k_select = static_cast<std::size_t>(k);
    }
  }

  if (!scopes[kOverall].active) {
    throw Error("evaluate: protocol '" + spec.name + "' admits no images");
  }

  const simsel::PairBlockCursor cursor(universe, options.block_size);
  const std::size_t n_blocks = cursor.block_count();
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.workers, std::max<std::size_t>(1, n_blocks)));

  std::vector<WorkerState> workers;
  workers.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    WorkerState ws;
    for (std::size_t s = 0; s < n_scopes; ++s) {
      const bool debug = options.debug_top_pairs && s == kOverall;
      ws.selectors.emplace_back(scopes[s].k_select, debug);
      ws.positives.emplace_back();
    }
    workers.push_back(std::move(ws));
  }

  std::atomic<std::size_t> next_block{0};
  const auto run_worker = [&](std::size_t w) {
    WorkerState& ws = workers[w];
    std::vector<float> tile(options.block_size * options.block_size);
    for (;;) {
      const std::size_t bi = next_block.fetch_add(1, std::memory_order_relaxed);
      if (bi >= n_blocks) break;
      const simsel::PairBlock blk = cursor.block(bi);
      const std::size_t nb = blk.rows_b.size();
      simsel::cosine_block_gather(set, blk.rows_a, blk.rows_b, tile.data());
      for (std::size_t ia = 0; ia < blk.rows_a.size(); ++ia) {
        const std::uint32_t ra = blk.rows_a[ia];
        const std::uint32_t id_a = identity[ra];
        const std::uint8_t g_a = group[ra];
        const float* tile_row = tile.data() + ia * nb;
        for (std::size_t ib = blk.diagonal ? ia + 1 : 0; ib < nb; ++ib) {
          const std::uint32_t rb = blk.rows_b[ib];
          const float score = tile_row[ib];
          const bool positive = id_a == identity[rb];
          const std::uint8_t g_b = group[rb];

          if (positive) {
            ws.positives[kOverall].push_back(score);
          } else {
            ws.selectors[kOverall].push(score, ra, rb);
          }
          if (n_scopes > 1 && g_a != kNoGroup && g_b != kNoGroup) {
            if (positive) {
              ws.positives[kMrAll].push_back(score);
              if (g_a == g_b) ws.positives[1 + g_a].push_back(score);
            } else {
              ws.selectors[kMrAll].push(score);
              if (g_a == g_b) ws.selectors[1 + g_a].push(score);
            }
          }
        }
      }
    }
  };

  if (n_workers == 1) {
    run_worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers - 1);
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(run_worker, w);
    run_worker(0);
    for (auto& t : pool) t.join();
  }

  // Deterministic reduction: selections merge by value multiset, positives
  // only ever get counted against the threshold.
  MetricReport report;
  report.protocol = spec.name;
  std::vector<std::pair<std::string, MetricReport>> subreports;
  for (std::size_t s = 0; s < n_scopes; ++s) {
    if (!scopes[s].active) continue;
    simsel::TopKSelector merged = workers[0].selectors[s];
    std::vector<float> positives = std::move(workers[0].positives[s]);
    for (std::size_t w = 1; w < n_workers; ++w) {
      merged.merge(workers[w].selectors[s]);
      const auto& wp = workers[w].positives[s];
      positives.insert(positives.end(), wp.begin(), wp.end());
    }
    if (merged.seen() != scopes[s].stats.n_negative_engine ||
        positives.size() != scopes[s].stats.n_positive) {
      throw Error("evaluate: pair bookkeeping mismatch in scope '" + scopes[s].label +
                  "': streamed " + std::to_string(merged.seen()) + " negatives / " +
                  std::to_string(positives.size()) + " positives, counted " +
                  std::to_string(scopes[s].stats.n_negative_engine) + " / " +
                  std::to_string(scopes[s].stats.n_positive));
    }
    std::sort(positives.begin(), positives.end(), std::greater<float>());
    const std::vector<float> top = merged.values_descending();

    MetricReport sub;
    sub.protocol = scopes[s].label;
    sub.pair_stats = scopes[s].stats;
    for (double t : spec.fpr_targets) {
      sub.entries.push_back(
          operating_point(positives, top, scopes[s].stats.n_negative_engine, t));
    }
    if (options.debug_top_pairs && s == kOverall) {
      auto pairs = merged.pairs_descending();
      const std::size_t limit = std::min(options.debug_top_limit, pairs.size());
      for (std::size_t i = 0; i < limit; ++i) {
        sub.debug_top_negatives.push_back({pairs[i].score, records[pairs[i].row_a].image_id,
                                           records[pairs[i].row_b].image_id});
      }
    }
    if (s == kOverall) {
      report.pair_stats = sub.pair_stats;
      report.entries = std::move(sub.entries);
      report.debug_top_negatives = std::move(sub.debug_top_negatives);
    } else {
      subreports.emplace_back(scopes[s].label, std::move(sub));
    }
  }
  std::sort(subreports.begin(), subreports.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  report.groups = std::move(subreports);
  return report;
}

}  // namespace pairbench::metrics
