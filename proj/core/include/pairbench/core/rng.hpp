#pragma once

#include <array>
#include <cstdint>

namespace pairbench {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel Random
// Numbers: As Easy as 1, 2, 3"). The (seed, stream) pair fully determines the
// output sequence, with no hidden state beyond the counter, so fixtures are
// reproducible from their config alone. The integer core is exact on every
// platform; next_gaussian additionally relies on sqrt/log of the host libm.
class Philox4x32 {
 public:
  explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform in [0,1) with 53 random bits.
  double next_double();

  // Uniform integer in [0, bound) by rejection; bound must be nonzero.
  std::uint64_t next_below(std::uint64_t bound);

  // Standard normal via the Marsaglia polar method; draws are consumed in a
  // fixed order so sequences replay exactly.
  double next_gaussian();

 private:
  std::array<std::uint32_t, 4> next_block();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned buffer_pos_ = 4;  // empty
  bool has_spare_gaussian_ = false;
  double spare_gaussian_ = 0.0;
};

}  // namespace pairbench
