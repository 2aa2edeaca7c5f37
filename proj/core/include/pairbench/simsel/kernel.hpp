#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pairbench/core/embeddings.hpp"

namespace pairbench::simsel {

// out[ia * n_b + ib] = dot(a_row[ia], b_row[ib]). Inputs must share dim and
// be unit-normalized for the dots to be cosines. Contiguous sub-matrix form.
void cosine_block(const float* a, std::size_t n_a, const float* b, std::size_t n_b,
                  std::size_t dim, float* out);

// Two-set form; errors on dimension mismatch. Returns the n_a x n_b block.
std::vector<float> cosine_block(const EmbeddingSet& a, const EmbeddingSet& b);

// Gather form over manifest row indices; used by the evaluation loop.
void cosine_block_gather(const EmbeddingSet& set, std::span<const std::uint32_t> rows_a,
                         std::span<const std::uint32_t> rows_b, float* out);

}  // namespace pairbench::simsel
