#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace restlog {

// Seeded random source injected into every sampling step. Bounded draws use
// rejection sampling on the raw engine output so that sequences are identical
// across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  // Uniform in [0, 1).
  double unit();

  bool chance(double p) { return unit() < p; }

  template <typename Container>
  const auto& pick(const Container& c) {
    if (c.empty()) throw std::out_of_range("Rng::pick on empty container");
    auto it = c.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(below(c.size())));
    return *it;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace restlog
