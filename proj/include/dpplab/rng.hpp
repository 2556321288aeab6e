#pragma once

#include <array>
#include <cstdint>

namespace dpp {

// Philox4x32-10 counter-based generator (Salmon et al., Random123 constants).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept;
};

// Sequential view over one Philox stream.
//
// Key words are the 64-bit seed. Counter words 0-1 hold the block index,
// words 2-3 hold the stream index XOR-folded in, so stream i of seed s never
// overlaps stream j != i of the same seed.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;
  // 53-bit uniform on [0, 1).
  double uniform() noexcept;

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
};

}  // namespace dpp
