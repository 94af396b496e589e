#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace subdiff {

inline constexpr int kMaxDim = 4;

/// A point in a model domain; only the first `d` coordinates are meaningful.
using Point = std::array<double, kMaxDim>;

inline Point make_point(std::initializer_list<double> coords) {
  Point p{0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (double c : coords) p[i++] = c;
  return p;
}

// Error taxonomy. The CLI maps ConfigError -> exit 1, InfeasibleError -> exit 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a spectral truncation cannot represent a kernel at the
/// requested time scale.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedSamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Random numbers. Engine and distributions are hand-rolled so that a fixed
// seed yields a bit-identical stream regardless of the standard library in
// use. Workers derive their state from (base_seed, stream_index), so results
// do not depend on how work is scheduled across threads.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ with splitmix64 seeding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  /// Stream `i` of a common base seed; streams are statistically independent.
  static Rng for_stream(std::uint64_t base_seed, std::uint64_t stream) {
    std::uint64_t sm = base_seed;
    std::uint64_t a = splitmix64(sm);
    std::uint64_t b = stream;
    return Rng(a ^ splitmix64(b) ^ (stream * 0x9e3779b97f4a7c15ULL));
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    };
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on (0,1); never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double exponential() { return -std::log(uniform()); }

  /// Standard normal via Marsaglia polar method (spare cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  /// Gamma(shape,1) via Marsaglia–Tsang, with the boost for shape < 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Deterministic reductions.
// ---------------------------------------------------------------------------

/// Pairwise summation; order-independent inputs reduce bit-identically.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(std::span<const double>(v));
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline MeanStderr mean_stderr(std::span<const double> v) {
  MeanStderr out;
  out.n = v.size();
  if (v.empty()) return out;
  out.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - out.mean;
    sq[i] = d * d;
  }
  const double var =
      pairwise_sum(std::span<const double>(sq)) / static_cast<double>(v.size() - 1);
  out.stderr_ = std::sqrt(var / static_cast<double>(v.size()));
  return out;
}

}  // namespace subdiff
