#include "pairbench/core/embeddings.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

#include "pairbench/core/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "embedding files are little-endian; big-endian hosts need byte swaps");
static_assert(sizeof(float) == 4);

namespace pairbench {

EmbeddingSet::EmbeddingSet(std::size_t n_rows, std::size_t dim)
    : n_rows_(n_rows), dim_(dim), data_(n_rows * dim, 0.0f) {}

EmbeddingSet::EmbeddingSet(std::size_t n_rows, std::size_t dim, std::vector<float> data)
    : n_rows_(n_rows), dim_(dim), data_(std::move(data)) {
  if (data_.size() != n_rows_ * dim_) {
    throw Error("embedding set: payload has " + std::to_string(data_.size()) +
                " values, expected " + std::to_string(n_rows_ * dim_));
  }
}

EmbeddingSet load_embeddings(const std::string& path, std::size_t expected_rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embeddings file: " + path);

  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kEmbeddingMagic, 8) != 0) {
    throw Error(path + ": bad magic, not an embedding file");
  }
  std::uint64_t n_rows = 0, dim = 0;
  if (!in.read(reinterpret_cast<char*>(&n_rows), 8) ||
      !in.read(reinterpret_cast<char*>(&dim), 8)) {
    throw Error(path + ": truncated header");
  }
  if (dim < 1) throw Error(path + ": dim must be >= 1");
  if (n_rows != expected_rows) {
    throw Error(path + ": row count mismatch: file has " + std::to_string(n_rows) +
                " rows, manifest expects " + std::to_string(expected_rows));
  }
  std::vector<float> data(n_rows * dim);
  const std::streamsize bytes = static_cast<std::streamsize>(data.size() * sizeof(float));
  if (!in.read(reinterpret_cast<char*>(data.data()), bytes) || in.gcount() != bytes) {
    throw Error(path + ": truncated payload");
  }
  return EmbeddingSet(n_rows, dim, std::move(data));
}

void save_embeddings(const EmbeddingSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write embeddings file: " + path);
  out.write(kEmbeddingMagic, 8);
  const std::uint64_t n_rows = set.rows();
  const std::uint64_t dim = set.dim();
  out.write(reinterpret_cast<const char*>(&n_rows), 8);
  out.write(reinterpret_cast<const char*>(&dim), 8);
  out.write(reinterpret_cast<const char*>(set.data().data()),
            static_cast<std::streamsize>(set.data().size() * sizeof(float)));
  if (!out) throw Error("short write to " + path);
}

EmbeddingSet normalize(EmbeddingSet set) {
  for (std::size_t i = 0; i < set.rows(); ++i) {
    auto row = set.row(i);
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * v;
    if (!(sq > 0.0) || !std::isfinite(sq)) {
      throw Error("normalize: zero or non-finite norm at row " + std::to_string(i));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : row) v = static_cast<float>(v * inv);
  }
  return set;
}

bool is_normalized(const EmbeddingSet& set, double tol) {
  for (std::size_t i = 0; i < set.rows(); ++i) {
    double sq = 0.0;
    for (float v : set.row(i)) sq += static_cast<double>(v) * v;
    if (std::abs(std::sqrt(sq) - 1.0) > tol) return false;
  }
  return true;
}

// Eight parallel lanes folded in a fixed tree. The AVX2 path pins one fused
// multiply-add per lane per 8-wide chunk; the blocked kernel replays the
// identical per-pair sequence, so every path produces the same bits for the
// same pair of rows.
#if defined(__AVX2__) && defined(__FMA__)

float dot_f32(const float* a, const float* b, std::size_t d) noexcept {
  __m256 vacc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= d; i += 8) {
    vacc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), vacc);
  }
  alignas(32) float acc[8];
  _mm256_store_ps(acc, vacc);
  for (; i < d; ++i) acc[i & 7] = std::fmaf(a[i], b[i], acc[i & 7]);
  const float s0 = acc[0] + acc[1];
  const float s1 = acc[2] + acc[3];
  const float s2 = acc[4] + acc[5];
  const float s3 = acc[6] + acc[7];
  return (s0 + s1) + (s2 + s3);
}

#else

float dot_f32(const float* a, const float* b, std::size_t d) noexcept {
  float acc[8] = {0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f};
  std::size_t i = 0;
  for (; i + 8 <= d; i += 8) {
    for (std::size_t lane = 0; lane < 8; ++lane) acc[lane] += a[i + lane] * b[i + lane];
  }
  for (; i < d; ++i) acc[i & 7] += a[i] * b[i];
  const float s0 = acc[0] + acc[1];
  const float s1 = acc[2] + acc[3];
  const float s2 = acc[4] + acc[5];
  const float s3 = acc[6] + acc[7];
  return (s0 + s1) + (s2 + s3);
}

#endif

}  // namespace pairbench
