#pragma once

#include "pairbench/core/embeddings.hpp"
#include "pairbench/core/types.hpp"
#include "pairbench/metrics/metrics.hpp"

namespace pairbench::syngen {

// Brute-force reference evaluation: every pair scored with a naive double
// loop, negatives fully materialized and sorted. Shares only the scalar dot
// product and the report schema with the streaming engine — enumeration,
// selection and bookkeeping are computed from scratch, which is what makes it
// a usable oracle. Guarded to 5,000 images.
inline constexpr std::size_t kOracleMaxImages = 5000;

metrics::MetricReport oracle_evaluate(const EmbeddingSet& set, const Manifest& manifest,
                                      const ProtocolSpec& spec);

}  // namespace pairbench::syngen
