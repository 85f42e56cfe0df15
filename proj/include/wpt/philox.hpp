#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>

namespace wpt {

// Philox4x32-10 counter-based generator. Chosen over <random> engines so that
// a (seed, stream) pair yields bit-identical draws on every platform and so
// trials can use independent substreams without coordination.
class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

  // One keyed permutation of a 128-bit counter; exposed for known-answer tests.
  static Block block(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

  std::uint32_t next_u32() {
    if (avail_ == 0) refill();
    return out_[--avail_];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the partner deviate is cached.
  double next_gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  // Circularly symmetric complex normal with unit total variance.
  std::complex<double> next_cgaussian() {
    const double re = next_gaussian();
    const double im = next_gaussian();
    return {re * 0.7071067811865475244, im * 0.7071067811865475244};
  }

 private:
  static Block single_round(const Block& ctr, const Key& key) {
    const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }

  void refill() {
    const Block b = block(counter_, key_);
    // Serve words in index order: out_ is a stack, so fill it reversed.
    out_ = {b[3], b[2], b[1], b[0]};
    avail_ = 4;
    if (++counter_[0] == 0) ++counter_[1];
  }

  Key key_;
  Block counter_;
  Block out_{};
  int avail_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace wpt
