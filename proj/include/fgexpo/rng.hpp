#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace fgexpo {

/// Counter-based random stream keyed by (seed, label).
///
/// Draw n of a stream is a pure function of its key and n, so streams can be
/// derived per step / per question and consumed in any order or thread
/// without changing results. Only integer arithmetic determines the raw
/// bits; the floating-point transforms below are written out here rather
/// than taken from <random>, whose distributions differ between standard
/// libraries.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view label);

  /// Child stream; independent of the parent and of siblings with other labels.
  RandomStream derive(std::string_view label) const;
  RandomStream derive(std::string_view label, std::int64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0,1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0,1).
  double uniform_open();
  double normal();
  /// Index drawn with probability proportional to weights (need not sum to 1).
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t key() const { return key_; }
  std::uint64_t draws() const { return counter_; }

 private:
  explicit RandomStream(std::uint64_t key) : key_(key) {}
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

RandomStream seeded_rng(std::uint64_t seed, std::string_view label);

}  // namespace fgexpo
