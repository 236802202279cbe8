#include "photoloss/random.hpp"

#include <cmath>

namespace photoloss {

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0, 1] x [0, 1).
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * 3.14159265358979323846 * u2;
  spare_ = mag * std::sin(ang);
  have_spare_ = true;
  return mag * std::cos(ang);
}

std::uint64_t mix_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice_unit(std::uint64_t seed, std::int64_t ix, std::int64_t iy,
                    std::int64_t iz, std::uint32_t salt) {
  std::uint64_t h = mix_u64(seed ^ 0x7f4a7c15ULL);
  h = mix_u64(h ^ std::uint64_t(ix) * 0x9e3779b97f4a7c15ULL);
  h = mix_u64(h ^ std::uint64_t(iy) * 0xc2b2ae3d27d4eb4fULL);
  h = mix_u64(h ^ std::uint64_t(iz) * 0x165667b19e3779f9ULL);
  h = mix_u64(h ^ salt);
  return double(h >> 11) * 0x1.0p-53;
}

}  // namespace photoloss
