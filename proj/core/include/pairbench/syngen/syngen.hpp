#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pairbench/core/embeddings.hpp"
#include "pairbench/core/types.hpp"
#include "pairbench/margin/margin.hpp"

namespace pairbench::syngen {

struct ImagesPerIdentity {
  std::size_t min = 3;
  std::size_t max = 3;  // min == max means a fixed count
};

// Identity clusters on the unit hypersphere: each identity gets a uniform
// unit-norm center, each image normalize(center + sigma * gaussian). Masked
// images are additionally shifted by mask_gap along one global unit direction
// and re-normalized. Identical configs produce bit-identical output; the
// generator consumes a single Philox stream in a fixed documented order
// (mask direction, then per identity: group draw, image-count draw, center,
// per-image noise).
struct SynConfig {
  std::size_t n_identities = 100;
  ImagesPerIdentity images_per_identity;
  std::size_t dim = 64;
  double intra_noise = 0.1;
  std::optional<std::array<double, kGroupCount>> group_mix;  // weights, sum to 1
  std::array<double, kGroupCount> group_sigma_scale{1.0, 1.0, 1.0, 1.0};
  double mask_fraction = 0.0;  // fraction of identities that get one masked image
  double mask_gap = 0.8;       // gamma
  double augment_prob = 0.0;   // carried to the augmentation experiment
  std::uint64_t seed = 0;
  std::string name = "syn";

  void validate() const;
};

SynConfig synconfig_from_json(const std::string& json_text);
std::string synconfig_to_json(const SynConfig& config);

struct SynOutput {
  Manifest manifest;
  EmbeddingSet embeddings;                // unit-norm rows
  std::vector<double> mask_direction;     // the global u_mask for this seed
  std::vector<std::size_t> identity_index;  // per record, 0..n_identities-1
};

SynOutput synthesize(const SynConfig& config);

// The per-seed global mask direction, without generating a full set.
std::vector<double> mask_direction(std::size_t dim, std::uint64_t seed);

// normalize(e + gamma * u); gamma = 0 returns the input unchanged.
std::vector<double> apply_mask_shift(std::span<const double> embedding, double gamma,
                                     std::span<const double> direction);

// Float-row form used to re-shift an existing set at a different gamma.
void apply_mask_shift(std::span<float> row, double gamma, std::span<const double> direction);

}  // namespace pairbench::syngen
