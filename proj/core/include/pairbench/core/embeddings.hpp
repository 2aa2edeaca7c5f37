#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pairbench {

// Row-major N x D float32 matrix, one row per manifest record.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::size_t n_rows, std::size_t dim);
  EmbeddingSet(std::size_t n_rows, std::size_t dim, std::vector<float> data);

  std::size_t rows() const { return n_rows_; }
  std::size_t dim() const { return dim_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool operator==(const EmbeddingSet&) const = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

// On-disk format: 8-byte magic, then n_rows and dim as 64-bit little-endian
// unsigned integers, then n_rows*dim IEEE-754 binary32 little-endian values,
// row-major.
inline constexpr char kEmbeddingMagic[8] = {'P', 'B', 'E', 'M', 'B', 'E', 'D', '1'};

// Rows come back exactly as stored, not normalized. expected_rows guards the
// manifest/embedding pairing; mismatches are errors, not warnings.
EmbeddingSet load_embeddings(const std::string& path, std::size_t expected_rows);
void save_embeddings(const EmbeddingSet& set, const std::string& path);

// Unit-normalizes every row (norms accumulated in double); a zero or
// non-finite row is an error naming the row index.
EmbeddingSet normalize(EmbeddingSet set);

bool is_normalized(const EmbeddingSet& set, double tol = 1e-6);

// The one dot product every scoring path funnels through. Eight interleaved
// accumulators folded in a fixed tree: the value for a pair of rows depends
// only on the rows, never on block size or worker count, which is what makes
// evaluation results bit-identical across schedules.
float dot_f32(const float* a, const float* b, std::size_t d) noexcept;

inline float dot_f32(std::span<const float> a, std::span<const float> b) {
  return dot_f32(a.data(), b.data(), a.size());
}

}  // namespace pairbench
