#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace subdiff {

/// Gauss–Legendre rule on [a,b].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  GaussLegendre(std::size_t n, double a, double b) {
    nodes.resize(n);
    weights.resize(n);
    // Newton iteration on P_n, Chebyshev initial guesses.
    for (std::size_t i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) /
                          (static_cast<double>(n) + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
          const double p2 =
              ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = p2;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      nodes[i] = a + 0.5 * (b - a) * (1.0 - x);
      weights[i] = (b - a) / ((1.0 - x * x) * dp * dp);
    }
  }

  double integrate(const std::function<double(double)>& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

}  // namespace subdiff
