#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pairbench/core/types.hpp"

namespace pairbench::simsel {

// Row-index scopes resolved from a manifest and protocol. AllPairs keeps the
// scope in `a` with `b` empty; CrossOnly puts probes in `a`, galleries in `b`
// and requires the two sets to be disjoint.
struct PairUniverse {
  Pairing pairing = Pairing::AllPairs;
  std::vector<std::uint32_t> a;
  std::vector<std::uint32_t> b;

  std::uint64_t pair_count_upper() const;  // admissible unordered pairs, positives included
};

PairUniverse resolve_universe(const Manifest& manifest, const ProtocolSpec& spec);

// One rectangular tile of the pair grid. When `diagonal` is set both axes
// alias the same scope slice and only cells with local ia < ib are pairs.
struct PairBlock {
  std::span<const std::uint32_t> rows_a;
  std::span<const std::uint32_t> rows_b;
  bool diagonal = false;
};

// Tiles the pair universe so that every admissible unordered pair lands in
// exactly one block, never as a self-pair and never twice in either order.
// Blocks are randomly addressable, which is what workers parallelize over.
class PairBlockCursor {
 public:
  PairBlockCursor(const PairUniverse& universe, std::size_t block_size);

  std::size_t block_count() const { return coords_.size(); }
  PairBlock block(std::size_t index) const;

  template <typename Fn>
  static void for_each_pair(const PairBlock& blk, Fn&& fn) {
    for (std::size_t ia = 0; ia < blk.rows_a.size(); ++ia) {
      const std::size_t jb = blk.diagonal ? ia + 1 : 0;
      for (std::size_t ib = jb; ib < blk.rows_b.size(); ++ib) {
        fn(blk.rows_a[ia], blk.rows_b[ib]);
      }
    }
  }

 private:
  const PairUniverse* universe_;
  std::size_t block_size_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> coords_;
};

}  // namespace pairbench::simsel
