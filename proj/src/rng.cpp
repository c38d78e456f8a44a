#include "fgexpo/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fgexpo {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t combine(std::uint64_t key, std::string_view label) {
  return mix64(mix64(key ^ kGolden) + fnv1a(label));
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::string_view label)
    : key_(combine(mix64(seed + kGolden), label)) {}

RandomStream RandomStream::derive(std::string_view label) const {
  return RandomStream(combine(key_, label));
}

RandomStream RandomStream::derive(std::string_view label, std::int64_t index) const {
  return RandomStream(mix64(combine(key_, label) + static_cast<std::uint64_t>(index) * kGolden));
}

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t c = counter_++;
  return mix64(key_ + mix64(c * kGolden + 1));
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RandomStream::categorical(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("categorical over empty support");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("categorical weight must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("categorical weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (u < acc) return i;
  }
  return last_positive;
}

RandomStream seeded_rng(std::uint64_t seed, std::string_view label) {
  return RandomStream(seed, label);
}

}  // namespace fgexpo
