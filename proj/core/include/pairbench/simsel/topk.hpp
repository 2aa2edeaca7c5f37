#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pairbench::simsel {

struct ScoredPair {
  float score;
  std::uint32_t row_a;
  std::uint32_t row_b;
};

// Exact streaming selection of the k largest scores (ties kept with
// multiplicity) in O(k) memory. The retained multiset depends only on the
// value multiset consumed, not on arrival order, so per-worker states merge
// into exactly the single-pass result.
class TopKSelector {
 public:
  explicit TopKSelector(std::size_t k, bool keep_pairs = false);

  void push(float score) { push(score, 0, 0); }
  void push(float score, std::uint32_t row_a, std::uint32_t row_b);

  void merge(const TopKSelector& other);  // k must match

  std::size_t k() const { return k_; }
  std::uint64_t seen() const { return seen_; }
  bool full() const { return entries_.size() == k_; }

  // The k-th largest score seen; requires seen() >= k.
  float kth_largest() const;

  std::vector<float> values_descending() const;
  std::vector<ScoredPair> pairs_descending() const;  // keep_pairs mode only

 private:
  std::size_t k_;
  bool keep_pairs_;
  std::uint64_t seen_ = 0;
  std::vector<ScoredPair> entries_;  // min-heap on score
};

struct KthResult {
  float kth;
  std::vector<float> top_descending;
};

// One-shot form over a materialized stream; errors when fewer than k scores.
KthResult select_kth_largest(std::span<const float> scores, std::size_t k);

// Deterministic parallel reduction; equivalent to a single sequential pass
// over the concatenated inputs.
TopKSelector merge_selections(std::span<const TopKSelector> states);

}  // namespace pairbench::simsel
