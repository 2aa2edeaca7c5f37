#include "pairbench/simsel/pairs.hpp"

#include <unordered_set>

#include "pairbench/core/error.hpp"

namespace pairbench::simsel {

std::uint64_t PairUniverse::pair_count_upper() const {
  if (pairing == Pairing::AllPairs) {
    const std::uint64_t n = a.size();
    return n * (n - 1) / 2;
  }
  return static_cast<std::uint64_t>(a.size()) * b.size();
}

PairUniverse resolve_universe(const Manifest& manifest, const ProtocolSpec& spec) {
  PairUniverse u;
  u.pairing = spec.pairing;
  const auto& recs = manifest.records;
  if (spec.pairing == Pairing::AllPairs) {
    for (std::uint32_t i = 0; i < recs.size(); ++i) {
      if (spec.scope_filter.matches(recs[i])) u.a.push_back(i);
    }
  } else {
    for (std::uint32_t i = 0; i < recs.size(); ++i) {
      if (!spec.scope_filter.matches(recs[i])) continue;
      const bool p = spec.probe_filter.matches(recs[i]);
      const bool g = spec.gallery_filter.matches(recs[i]);
      if (p && g) {
        throw Error("protocol '" + spec.name + "': probe and gallery sets overlap at image '" +
                    recs[i].image_id + "'");
      }
      if (p) u.a.push_back(i);
      if (g) u.b.push_back(i);
    }
  }
  return u;
}

PairBlockCursor::PairBlockCursor(const PairUniverse& universe, std::size_t block_size)
    : universe_(&universe), block_size_(block_size == 0 ? 1 : block_size) {
  const auto n_blocks = [&](std::size_t n) {
    return static_cast<std::uint32_t>((n + block_size_ - 1) / block_size_);
  };
  if (universe.pairing == Pairing::AllPairs) {
    const std::uint32_t nb = n_blocks(universe.a.size());
    for (std::uint32_t i = 0; i < nb; ++i)
      for (std::uint32_t j = i; j < nb; ++j) coords_.emplace_back(i, j);
  } else {
    const std::uint32_t na = n_blocks(universe.a.size());
    const std::uint32_t nb = n_blocks(universe.b.size());
    for (std::uint32_t i = 0; i < na; ++i)
      for (std::uint32_t j = 0; j < nb; ++j) coords_.emplace_back(i, j);
  }
}

PairBlock PairBlockCursor::block(std::size_t index) const {
  const auto [bi, bj] = coords_[index];
  const auto slice = [&](const std::vector<std::uint32_t>& v, std::uint32_t blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * block_size_;
    const std::size_t hi = std::min(lo + block_size_, v.size());
    return std::span<const std::uint32_t>(v.data() + lo, hi - lo);
  };
  PairBlock out;
  if (universe_->pairing == Pairing::AllPairs) {
    out.rows_a = slice(universe_->a, bi);
    out.rows_b = slice(universe_->a, bj);
    out.diagonal = (bi == bj);
  } else {
    out.rows_a = slice(universe_->a, bi);
    out.rows_b = slice(universe_->b, bj);
    out.diagonal = false;
  }
  return out;
}

}  // namespace pairbench::simsel
