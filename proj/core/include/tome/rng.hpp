#pragma once

#include <array>
#include <cstdint>

namespace tome {

/// Philox-4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based stream of standard normals. The key is the 64-bit seed, the
/// upper half of the counter the stream id and the lower half a block index,
/// so stream (seed, id) is reproducible regardless of who draws it or when.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Uniform on (0, 1] with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller, two per block.
  double normal();

  std::uint64_t blocks_used() const noexcept { return block_; }

 private:
  std::array<std::uint32_t, 4> next_block();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tome
