#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace datalqg {

/// Counter-free deterministic RNG (SplitMix64 stream + Box-Muller).
/// Every stochastic operation in the library takes an explicit seed and
/// builds one of these, so results are bit-reproducible across platforms
/// independent of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = gaussian();
    return v;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Splittable seed derivation. Children are keyed by value (not by loop
/// index), so extending a sweep grid never perturbs existing cells.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0,
                                 std::uint64_t d = 0) {
  std::uint64_t x = detail::mix64(master);
  x = detail::mix64(x ^ a);
  x = detail::mix64(x ^ b);
  x = detail::mix64(x ^ c);
  x = detail::mix64(x ^ d);
  return x;
}

inline std::uint64_t seed_tag(const char* name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const char* p = name; *p; ++p) h = (h ^ static_cast<unsigned char>(*p)) * 1099511628211ULL;
  return h;
}

inline std::uint64_t double_bits(double v) {
  std::uint64_t out;
  static_assert(sizeof(out) == sizeof(v));
  std::memcpy(&out, &v, sizeof(v));
  return out;
}

}  // namespace datalqg
