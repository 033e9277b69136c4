#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace survey {

namespace detail {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace detail

//! Random stream keyed by (seed, stream, substream).
//!
//! Every Monte Carlo cell derives its own stream from its coordinates, so
//! results do not depend on the order in which cells are processed.
class RandomStream
{
public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed,
                        std::uint64_t stream = 0,
                        std::uint64_t substream = 0)
    : engine_(derive(seed, stream, substream))
  {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  //! Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  //! Uniform integer on {0, ..., bound - 1}; bound > 0.
  std::uint64_t below(std::uint64_t bound)
  {
    // Lemire's nearly-divisionless rejection
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold)
        return r % bound;
    }
  }

  //! Derive an independent child stream.
  RandomStream split(std::uint64_t key)
  {
    return RandomStream(engine_(), key, 0x5eed);
  }

private:
  static std::uint64_t derive(std::uint64_t seed,
                              std::uint64_t stream,
                              std::uint64_t substream) noexcept
  {
    std::uint64_t h = detail::mix64(seed);
    h = detail::mix64(h ^ detail::mix64(stream + 0x632be59bd9b4e019ULL));
    h = detail::mix64(h ^ detail::mix64(substream + 0x85157af5ULL));
    return h;
  }

  std::mt19937_64 engine_;
};

} // namespace survey
