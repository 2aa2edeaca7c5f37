#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "pairbench/core/embeddings.hpp"
#include "pairbench/core/rng.hpp"
#include "pairbench/core/types.hpp"

namespace pairbench::testutil {

// Self-cleaning unique temp directory.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pairbench_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline EmbeddingSet random_unit_embeddings(std::size_t rows, std::size_t dim,
                                           std::uint64_t seed) {
  Philox4x32 rng(seed, 99);
  std::vector<float> data(rows * dim);
  for (float& v : data) v = static_cast<float>(rng.next_gaussian());
  return normalize(EmbeddingSet(rows, dim, std::move(data)));
}

// Random manifest with identity clusters, optional groups, optional masked
// layout; embeddings uncorrelated with identities unless stated.
inline Manifest random_manifest(std::size_t n_identities, std::size_t max_images,
                                std::uint64_t seed, bool with_groups = false,
                                bool with_masks = false) {
  Philox4x32 rng(seed, 7);
  Manifest m;
  m.name = "random";
  for (std::size_t id = 0; id < n_identities; ++id) {
    const std::size_t n_images = 1 + rng.next_below(max_images);
    const Group g = with_groups ? static_cast<Group>(rng.next_below(5)) : Group::None;
    for (std::size_t img = 0; img < n_images; ++img) {
      ImageRecord rec;
      rec.image_id = "i" + std::to_string(id) + "_" + std::to_string(img);
      rec.identity_id = "p" + std::to_string(id);
      rec.group = g;
      rec.masked = with_masks && img == 0 && n_images >= 3;
      rec.role = Role::Any;
      m.records.push_back(std::move(rec));
    }
  }
  return m;
}

// Brute-force pair enumeration straight from the protocol definition; the
// reference the block cursor is checked against.
inline std::multiset<std::pair<std::uint32_t, std::uint32_t>> brute_force_pairs(
    const Manifest& manifest, const ProtocolSpec& spec) {
  std::multiset<std::pair<std::uint32_t, std::uint32_t>> pairs;
  const auto& recs = manifest.records;
  if (spec.pairing == Pairing::AllPairs) {
    for (std::uint32_t i = 0; i < recs.size(); ++i) {
      if (!spec.scope_filter.matches(recs[i])) continue;
      for (std::uint32_t j = i + 1; j < recs.size(); ++j) {
        if (spec.scope_filter.matches(recs[j])) pairs.emplace(i, j);
      }
    }
  } else {
    for (std::uint32_t i = 0; i < recs.size(); ++i) {
      if (!spec.scope_filter.matches(recs[i]) || !spec.probe_filter.matches(recs[i])) continue;
      for (std::uint32_t j = 0; j < recs.size(); ++j) {
        if (!spec.scope_filter.matches(recs[j]) || !spec.gallery_filter.matches(recs[j]))
          continue;
        pairs.emplace(std::min(i, j), std::max(i, j));
      }
    }
  }
  return pairs;
}

}  // namespace pairbench::testutil
