#include "dirx/random.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dirx {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// 2^-53 is the smallest uniform_open0() value; 16 of them multiply to 2^-848,
// still a normal double.
constexpr int kProductBlock = 16;

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Stream::Stream(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& word : state_) {
    s = splitmix64(s);
    word = s;
  }
}

Stream::result_type Stream::operator()() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Stream::uniform_open0() {
  return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
}

double Stream::uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(parent ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t k : keys) {
    h = splitmix64(h ^ splitmix64(k + 0x3c6ef372fe94f82bULL));
  }
  return h;
}

double standard_exponential(Stream& stream) { return -std::log(stream.uniform_open0()); }

double gamma_integer(std::int64_t k, Stream& stream) {
  if (k < 0) throw std::domain_error("gamma_integer: negative shape");
  // Beyond one block the product method costs O(k); rejection is O(1).
  if (k > kProductBlock) return gamma_real(static_cast<double>(k), stream);
  double sum = 0.0;
  while (k > 0) {
    const int block = k < kProductBlock ? static_cast<int>(k) : kProductBlock;
    double product = 1.0;
    for (int i = 0; i < block; ++i) product *= stream.uniform_open0();
    sum -= std::log(product);
    k -= block;
  }
  return sum;
}

double gamma_real(double shape, Stream& stream) {
  if (!(shape > 0.0)) throw std::domain_error("gamma_real: shape must be positive");
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(stream);
}

double standard_normal(Stream& stream) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(stream);
}

}  // namespace dirx
