#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace photoloss {

/// Deterministic RNG with fully specified draw functions, so seeded output
/// is identical across standard libraries (std distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();

  Eigen::Vector3d normal3() { return {normal(), normal(), normal()}; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to hash lattice coordinates for textures.
std::uint64_t mix_u64(std::uint64_t x);

/// Hash of a lattice point plus salt into [0, 1).
double lattice_unit(std::uint64_t seed, std::int64_t ix, std::int64_t iy,
                    std::int64_t iz, std::uint32_t salt);

}  // namespace photoloss
