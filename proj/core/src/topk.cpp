#include "pairbench/simsel/topk.hpp"

#include <algorithm>

#include "pairbench/core/error.hpp"

namespace pairbench::simsel {

namespace {
// Min-heap on score: the root is the smallest of the retained k largest.
constexpr auto kHeapCmp = [](const ScoredPair& x, const ScoredPair& y) {
  return x.score > y.score;
};
}  // namespace

TopKSelector::TopKSelector(std::size_t k, bool keep_pairs)
    : k_(k), keep_pairs_(keep_pairs) {
  if (k_ == 0) throw Error("top-k selection requires k >= 1");
  entries_.reserve(k_);
}

void TopKSelector::push(float score, std::uint32_t row_a, std::uint32_t row_b) {
  ++seen_;
  if (!keep_pairs_) row_a = row_b = 0;
  if (entries_.size() < k_) {
    entries_.push_back({score, row_a, row_b});
    std::push_heap(entries_.begin(), entries_.end(), kHeapCmp);
    return;
  }
  if (score > entries_.front().score) {
    std::pop_heap(entries_.begin(), entries_.end(), kHeapCmp);
    entries_.back() = {score, row_a, row_b};
    std::push_heap(entries_.begin(), entries_.end(), kHeapCmp);
  }
}

void TopKSelector::merge(const TopKSelector& other) {
  if (other.k_ != k_) {
    throw Error("cannot merge selections with k=" + std::to_string(k_) + " and k=" +
                std::to_string(other.k_));
  }
  for (const auto& e : other.entries_) push(e.score, e.row_a, e.row_b);
  // push() counted the retained entries; account for the rest of the stream.
  seen_ += other.seen_ - other.entries_.size();
}

float TopKSelector::kth_largest() const {
  if (seen_ < k_) {
    throw Error("stream shorter than k: saw " + std::to_string(seen_) + " scores, k=" +
                std::to_string(k_));
  }
  return entries_.front().score;
}

std::vector<float> TopKSelector::values_descending() const {
  std::vector<float> v;
  v.reserve(entries_.size());
  for (const auto& e : entries_) v.push_back(e.score);
  std::sort(v.begin(), v.end(), std::greater<float>());
  return v;
}

std::vector<ScoredPair> TopKSelector::pairs_descending() const {
  if (!keep_pairs_) throw Error("selector was not built with keep_pairs");
  std::vector<ScoredPair> v(entries_.begin(), entries_.end());
  std::sort(v.begin(), v.end(), [](const ScoredPair& x, const ScoredPair& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.row_a != y.row_a) return x.row_a < y.row_a;
    return x.row_b < y.row_b;
  });
  return v;
}

KthResult select_kth_largest(std::span<const float> scores, std::size_t k) {
  TopKSelector sel(k);
  for (float s : scores) sel.push(s);
  return {sel.kth_largest(), sel.values_descending()};
}

TopKSelector merge_selections(std::span<const TopKSelector> states) {
  if (states.empty()) throw Error("merge_selections: no states");
  TopKSelector out = states[0];
  for (std::size_t i = 1; i < states.size(); ++i) out.merge(states[i]);
  return out;
}

}  // namespace pairbench::simsel
