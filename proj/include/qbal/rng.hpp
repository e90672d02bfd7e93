#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace qbal {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive stream keys from (seed, lineage).
std::uint64_t mix64(std::uint64_t x);

/// Counter-based, splittable random stream.
///
/// A stream is identified by (seed, lineage). The lineage is the path of split
/// indices from the root; it is hashed into the Philox key and the upper half
/// of the counter, so distinct lineages address disjoint keyed sequences and
/// identical (seed, lineage) pairs reproduce identical draws bit-exactly.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::vector<std::uint32_t> lineage = {});

  /// Child stream for index `i`. The parent's position is not consumed.
  RngStream split(std::uint32_t i) const;

  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::uint32_t>& lineage() const noexcept { return lineage_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform();
  /// Number of 32-bit words drawn so far.
  std::uint64_t position() const noexcept { return block_ * 4 - (4 - lane_); }

 private:
  void refill();

  std::uint64_t seed_;
  std::vector<std::uint32_t> lineage_;
  std::array<std::uint32_t, 2> key_{};
  std::uint64_t stream_tag_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned lane_ = 4;
};

}  // namespace qbal
