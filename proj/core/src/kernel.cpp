#include "pairbench/simsel/kernel.hpp"

#include <cmath>

#include "pairbench/core/error.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

namespace pairbench::simsel {

namespace {

#if defined(__AVX2__) && defined(__FMA__)

// 2x4 register-blocked tile: eight independent accumulator chains hide the
// FMA latency, and each b-row load feeds two a-rows. Every (a,b) cell keeps
// the exact lane-wise sequence of dot_f32.
void micro_tile_2x4(const float* a0, const float* a1, const float* const b[4],
                    std::size_t dim, float out[2][4]) {
  __m256 acc[2][4];
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) acc[r][c] = _mm256_setzero_ps();

  std::size_t i = 0;
  for (; i + 8 <= dim; i += 8) {
    const __m256 va0 = _mm256_loadu_ps(a0 + i);
    const __m256 va1 = _mm256_loadu_ps(a1 + i);
    for (int c = 0; c < 4; ++c) {
      const __m256 vb = _mm256_loadu_ps(b[c] + i);
      acc[0][c] = _mm256_fmadd_ps(va0, vb, acc[0][c]);
      acc[1][c] = _mm256_fmadd_ps(va1, vb, acc[1][c]);
    }
  }
  alignas(32) float lanes[8];
  for (int r = 0; r < 2; ++r) {
    const float* a = r == 0 ? a0 : a1;
    for (int c = 0; c < 4; ++c) {
      _mm256_store_ps(lanes, acc[r][c]);
      for (std::size_t t = i; t < dim; ++t) {
        lanes[t & 7] = std::fmaf(a[t], b[c][t], lanes[t & 7]);
      }
      const float s0 = lanes[0] + lanes[1];
      const float s1 = lanes[2] + lanes[3];
      const float s2 = lanes[4] + lanes[5];
      const float s3 = lanes[6] + lanes[7];
      out[r][c] = (s0 + s1) + (s2 + s3);
    }
  }
}

template <typename RowA, typename RowB>
void blocked_scores(std::size_t n_a, std::size_t n_b, std::size_t dim, RowA row_a, RowB row_b,
                    float* out) {
  std::size_t ia = 0;
  for (; ia + 2 <= n_a; ia += 2) {
    const float* a0 = row_a(ia);
    const float* a1 = row_a(ia + 1);
    float* out0 = out + ia * n_b;
    float* out1 = out0 + n_b;
    std::size_t ib = 0;
    for (; ib + 4 <= n_b; ib += 4) {
      const float* b[4] = {row_b(ib), row_b(ib + 1), row_b(ib + 2), row_b(ib + 3)};
      float tile[2][4];
      micro_tile_2x4(a0, a1, b, dim, tile);
      for (int c = 0; c < 4; ++c) {
        out0[ib + c] = tile[0][c];
        out1[ib + c] = tile[1][c];
      }
    }
    for (; ib < n_b; ++ib) {
      out0[ib] = dot_f32(a0, row_b(ib), dim);
      out1[ib] = dot_f32(a1, row_b(ib), dim);
    }
  }
  for (; ia < n_a; ++ia) {
    const float* a = row_a(ia);
    float* row_out = out + ia * n_b;
    for (std::size_t ib = 0; ib < n_b; ++ib) row_out[ib] = dot_f32(a, row_b(ib), dim);
  }
}

#else

template <typename RowA, typename RowB>
void blocked_scores(std::size_t n_a, std::size_t n_b, std::size_t dim, RowA row_a, RowB row_b,
                    float* out) {
  for (std::size_t ia = 0; ia < n_a; ++ia) {
    const float* a = row_a(ia);
    float* row_out = out + ia * n_b;
    for (std::size_t ib = 0; ib < n_b; ++ib) row_out[ib] = dot_f32(a, row_b(ib), dim);
  }
}

#endif

}  // namespace

void cosine_block(const float* a, std::size_t n_a, const float* b, std::size_t n_b,
                  std::size_t dim, float* out) {
  blocked_scores(
      n_a, n_b, dim, [&](std::size_t i) { return a + i * dim; },
      [&](std::size_t i) { return b + i * dim; }, out);
}

std::vector<float> cosine_block(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.dim() != b.dim()) {
    throw Error("cosine_block: dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                std::to_string(b.dim()));
  }
  std::vector<float> out(a.rows() * b.rows());
  cosine_block(a.data().data(), a.rows(), b.data().data(), b.rows(), a.dim(), out.data());
  return out;
}

void cosine_block_gather(const EmbeddingSet& set, std::span<const std::uint32_t> rows_a,
                         std::span<const std::uint32_t> rows_b, float* out) {
  const std::size_t dim = set.dim();
  const float* base = set.data().data();
  blocked_scores(
      rows_a.size(), rows_b.size(), dim,
      [&](std::size_t i) { return base + static_cast<std::size_t>(rows_a[i]) * dim; },
      [&](std::size_t i) { return base + static_cast<std::size_t>(rows_b[i]) * dim; }, out);
}

}  // namespace pairbench::simsel
