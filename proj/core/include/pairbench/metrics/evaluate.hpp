#pragma once

#include <cstddef>

#include "pairbench/core/embeddings.hpp"
#include "pairbench/core/types.hpp"
#include "pairbench/metrics/metrics.hpp"

namespace pairbench::metrics {

struct EvalOptions {
  std::size_t block_size = 512;
  std::size_t workers = 1;
  // Retain (pair, score) for the top negatives of the overall scope.
  bool debug_top_pairs = false;
  std::size_t debug_top_limit = 32;
};

// Streams every admissible pair once through the blocked kernel: positive
// scores are kept exactly, negative thresholds come from streaming top-k
// selection. Per-group sub-reports restrict both pair endpoints to the group;
// the MR-All sub-report spans the union of the four groups. Results are
// bit-identical for any block size and worker count.
MetricReport evaluate(const EmbeddingSet& set, const Manifest& manifest,
                      const ProtocolSpec& spec, const EvalOptions& options = {});

}  // namespace pairbench::metrics
