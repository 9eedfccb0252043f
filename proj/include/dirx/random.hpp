#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace dirx {

/// Seeded random stream (xoshiro256** state seeded through splitmix64).
///
/// Satisfies UniformRandomBitGenerator so it plugs into <random>
/// distributions. Construction is a handful of integer ops, which matters
/// because planners derive one substream per (episode, stage, state, action).
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on (0, 1]; never returns 0 so -log(u) is finite.
  double uniform_open0();
  /// Uniform on [0, 1).
  double uniform01();

 private:
  std::array<std::uint64_t, 4> state_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a hash of a textual stream name.
std::uint64_t hash_name(std::string_view name);

/// Order-sensitive combination of a parent seed with any number of keys.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> keys);

inline Stream derive_stream(std::uint64_t parent, std::initializer_list<std::uint64_t> keys) {
  return Stream(derive_seed(parent, keys));
}

/// Unit exponential by inversion: -log(U), U in (0, 1].
double standard_exponential(Stream& stream);

/// Gamma(k, 1) for integer k.
///
/// Small k uses -log of a product of k uniforms (no underflow at k <= 16);
/// larger k falls through to gamma_real. k = 0 returns 0.
double gamma_integer(std::int64_t k, Stream& stream);

/// Gamma(shape, 1) for arbitrary positive real shape.
double gamma_real(double shape, Stream& stream);

double standard_normal(Stream& stream);

}  // namespace dirx
