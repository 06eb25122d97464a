#pragma once

#include <cstdint>
#include <random>

namespace raqos {

// splitmix64 finalizer; used to derive decorrelated substream seeds.
std::uint64_t mix64(std::uint64_t x);

// Deterministic random stream. Every random quantity in the project flows
// through an explicitly passed stream; substreams come from fork(), so a
// record/user/solve owns its own stream and results do not depend on
// evaluation order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // Independent substream; the parent stream is not advanced.
  RngStream fork(std::uint64_t salt) const;

  std::uint64_t next_u64();
  double uniform();                    // [0, 1)
  double normal();                     // standard normal, Box-Muller
  double gamma(double shape);          // Gamma(shape, 1), shape >= 1
  std::uint32_t uniform_int(std::uint32_t n);  // [0, n)

  std::uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 eng_;
  std::uint64_t seed_;
};

}  // namespace raqos
