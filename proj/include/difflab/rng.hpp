#pragma once

// Counter-based random streams.
//
// An Rng is only a root seed. Every consumer asks for a named substream
// (data, noise, timesteps, init, ...); each substream is a SplitMix64
// sequence keyed by (seed, purpose, index), so drawing from one stream never
// shifts another and any stream can be re-seeded or restored from its
// (key, counter) pair.

#include <cstdint>
#include <string_view>
#include <vector>

#include "difflab/tensor.hpp"

namespace difflab {

struct StreamState {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;
  friend bool operator==(const StreamState&, const StreamState&) = default;
};

class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(StreamState s) : state_(s) {}

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Standard normal via Box-Muller; consumes two draws per value.
  double normal() noexcept;
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  // Uniform integer on [lo, hi] inclusive.
  int uniform_int(int lo, int hi) noexcept;

  Tensor gauss(std::vector<std::size_t> shape);

  StreamState state() const noexcept { return state_; }
  void set_state(StreamState s) noexcept { state_ = s; }

 private:
  StreamState state_;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}
  std::uint64_t seed() const noexcept { return seed_; }
  RngStream stream(std::string_view purpose, std::uint64_t index = 0) const noexcept;

 private:
  std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view s) noexcept;

}  // namespace difflab
