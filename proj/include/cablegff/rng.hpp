#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace cablegff {

// Philox4x32-10 block cipher (Salmon et al., "Parallel random numbers: as easy
// as 1, 2, 3", SC'11). Pure function of (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

// Maps 52 random bits into the open interval (0, 1); with 53 the top value
// rounds to 1.
inline double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

// Purpose tags keep the streams of different consumers disjoint for one
// (seed, sample) pair.
enum class StreamPurpose : std::uint8_t {
  field = 1,
  edges = 2,
  soup = 3,
  conditional = 4,
  weights = 5,
  auxiliary = 6,
};

inline constexpr std::uint64_t stream_id(std::uint64_t sample_index,
                                         StreamPurpose purpose) noexcept {
  return (sample_index << 8) | static_cast<std::uint64_t>(purpose);
}

// Two 64-bit words at position `index` of stream `stream` under `seed`.
inline std::array<std::uint64_t, 2> keyed_bits(std::uint64_t seed,
                                               std::uint64_t stream,
                                               std::uint64_t index) noexcept {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index),
                                static_cast<std::uint32_t>(index >> 32),
                                static_cast<std::uint32_t>(stream),
                                static_cast<std::uint32_t>(stream >> 32)};
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const auto out = Philox4x32::block(ctr, key);
  return {(std::uint64_t{out[1]} << 32) | out[0],
          (std::uint64_t{out[3]} << 32) | out[2]};
}

// Sequential generator over one counter-based stream. Copies are independent
// cursors; two generators with equal (seed, stream) produce equal sequences.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : seed_(seed), stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    if (buffered_ == 0) {
      buffer_ = keyed_bits(seed_, stream_, counter_++);
      buffered_ = 2;
    }
    return buffer_[2 - buffered_--];
  }

  double uniform() noexcept { return to_unit_open((*this)()); }

  // Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Poisson variate by products of uniforms; means above 30 are split into
  // independent chunks.
  std::uint64_t poisson(double mean) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline std::uint64_t CounterRng::poisson(double mean) noexcept {
  if (!(mean > 0.0)) return 0;
  std::uint64_t total = 0;
  constexpr double kChunk = 30.0;
  while (mean > kChunk) {
    mean -= kChunk;
    total += poisson(kChunk);
  }
  const double threshold = std::exp(-mean);
  double product = uniform();
  while (product > threshold) {
    ++total;
    product *= uniform();
  }
  return total;
}

}  // namespace cablegff
