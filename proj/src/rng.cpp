#include "raqos/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace raqos {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : eng_(mix64(seed)), seed_(seed) {}

RngStream RngStream::fork(std::uint64_t salt) const {
  return RngStream(mix64(seed_ ^ mix64(salt + 0x5851f42d4c957f2dULL)));
}

std::uint64_t RngStream::next_u64() { return eng_(); }

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  // Box-Muller without state; one normal per call keeps streams forkable and
  // bit-reproducible.
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

double RngStream::gamma(double shape) {
  if (shape < 1.0) throw std::invalid_argument("gamma: shape must be >= 1");
  // Marsaglia-Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::uint32_t RngStream::uniform_int(std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
  return static_cast<std::uint32_t>(next_u64() % n);
}

}  // namespace raqos
