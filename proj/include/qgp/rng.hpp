#ifndef QGP_RNG_HPP
#define QGP_RNG_HPP

#include <cmath>
#include <cstdint>

namespace qgp {

// SplitMix64: a counter-based generator with a fixed published transition, so
// every stream is reproducible across platforms and compilers (no dependence
// on std::mt19937 or libstdc++ distribution internals).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Independent substream derived from (seed, index); used wherever a
  // deterministic per-item stream is needed (e.g. per-candidate subsampling).
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    Rng mix(seed);
    std::uint64_t a = mix.next_u64();
    return Rng(a ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1): top 53 bits, offset so 0 is never returned.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Box-Muller transform (cosine branch only, so each
  // draw consumes exactly two uniforms and streams stay alignment-free).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  // Chi-squared with one degree of freedom: the square of a standard normal.
  double chi2_1() {
    const double z = normal();
    return z * z;
  }

 private:
  std::uint64_t state_;
};

}  // namespace qgp

#endif
