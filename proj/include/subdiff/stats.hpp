#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace subdiff {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {

// Regularized lower incomplete gamma P(a,x) (series / continued fraction).
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a,x).
  double b = x + 1.0 - a, c = 1e308, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

}  // namespace detail

/// P[Chi2_k > stat]
inline double chi2_sf(double stat, double dof) {
  if (stat <= 0.0) return 1.0;
  return 1.0 - detail::gamma_p(0.5 * dof, 0.5 * stat);
}

/// Kolmogorov distribution survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 l^2}.
inline double kolmogorov_sf(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS test against a CDF; returns the asymptotic p-value.
inline double ks_test_cdf(std::vector<double> sample,
                          const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    dmax = std::max(dmax, std::abs(f - static_cast<double>(i) / n));
    dmax = std::max(dmax, std::abs(static_cast<double>(i + 1) / n - f));
  }
  const double en = std::sqrt(n);
  return kolmogorov_sf((en + 0.12 + 0.11 / en) * dmax);
}

/// Two-sample KS test (asymptotic p-value).
inline double ks_test_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    dmax = std::max(dmax, std::abs(static_cast<double>(i) / na -
                                   static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  return kolmogorov_sf((en + 0.12 + 0.11 / en) * dmax);
}

/// chi-square goodness of fit from observed counts vs expected counts.
/// Bins with expected < 5 are merged into their neighbor.
inline double chi2_gof_pvalue(std::vector<double> observed,
                              std::vector<double> expected) {
  if (observed.size() != expected.size() || observed.empty())
    throw std::invalid_argument("chi2_gof: size mismatch");
  std::vector<double> obs, exp;
  double co = 0.0, ce = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    co += observed[i];
    ce += expected[i];
    if (ce >= 5.0) {
      obs.push_back(co);
      exp.push_back(ce);
      co = ce = 0.0;
    }
  }
  if (ce > 0.0 && !exp.empty()) {
    obs.back() += co;
    exp.back() += ce;
  }
  if (exp.size() < 2) return 1.0;
  double stat = 0.0;
  for (std::size_t i = 0; i < exp.size(); ++i) {
    const double d = obs[i] - exp[i];
    stat += d * d / exp[i];
  }
  return chi2_sf(stat, static_cast<double>(exp.size() - 1));
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
};

/// Weighted least squares y = a + b x, weights w_i (typically 1/sigma_i^2).
inline LineFit weighted_least_squares(std::span<const double> x,
                                      std::span<const double> y,
                                      std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size() || x.size() < 2)
    throw std::invalid_argument("weighted_least_squares: bad input sizes");
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
    swxx += w[i] * x[i] * x[i];
    swxy += w[i] * x[i] * y[i];
  }
  const double det = sw * swxx - swx * swx;
  if (det <= 0.0) throw std::invalid_argument("weighted_least_squares: degenerate");
  LineFit fit;
  fit.n = x.size();
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  // Residual-scaled parameter error (accounts for over/under-stated weights).
  double chi2 = 0.0, sst = 0.0;
  const double ybar = swy / sw;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    chi2 += w[i] * r * r;
    sst += w[i] * (y[i] - ybar) * (y[i] - ybar);
  }
  const double dof = static_cast<double>(x.size()) - 2.0;
  const double scale = dof > 0.0 ? std::max(chi2 / dof, 1e-300) : 1.0;
  fit.slope_stderr = std::sqrt(scale * sw / det);
  fit.r_squared = sst > 0.0 ? 1.0 - chi2 / sst : 1.0;
  return fit;
}

}  // namespace subdiff
