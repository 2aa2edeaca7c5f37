#pragma once

#include <cstdint>

#include "pairbench/margin/margin.hpp"
#include "pairbench/syngen/syngen.hpp"

namespace pairbench::syngen {

// Desk-scale mask-augmentation experiment: one synthetic masked-layout set is
// refined by toy_train twice, once plain and once with every training sample
// presenting mask-shifted with probability augment_prob. Both runs share the
// seed; the masked-protocol TPR of the refined embeddings is the comparison
// of interest (augmentation is expected to help the masked side, while the
// unmasked side may move either way). Training is deliberately stopped short
// of convergence: at full convergence every cluster collapses onto its
// center and both runs saturate.
struct TrendConfig {
  std::size_t n_identities = 150;
  std::size_t images_per_identity = 3;
  std::size_t dim = 16;
  double intra_noise = 0.45;
  double mask_gap = 1.5;
  double augment_prob = 0.1;
  margin::MarginConfig margin{16.0, 0.2};
  std::size_t steps = 50;
  double step_size = 0.002;
  double fpr_target = 1e-3;
};

struct TrendResult {
  double tpr_masked_baseline = 0.0;
  double tpr_masked_augmented = 0.0;
  double tpr_unmasked_baseline = 0.0;
  double tpr_unmasked_augmented = 0.0;
  std::vector<double> loss_trace_baseline;
  std::vector<double> loss_trace_augmented;
};

TrendResult augmentation_trend(std::uint64_t seed, const TrendConfig& config = {});

}  // namespace pairbench::syngen
