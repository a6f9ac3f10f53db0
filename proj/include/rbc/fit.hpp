#pragma once

#include <cmath>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rbc {

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 1.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x.
inline FitResult fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("abscissa/ordinate size mismatch");
  if (std::set<double>(x.begin(), x.end()).size() < 3)
    throw std::invalid_argument("fit needs at least three distinct abscissae");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  FitResult f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    ssr += r * r;
  }
  f.slope_stderr = x.size() > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
  f.r_squared = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

/// Least squares on (log N, log value). The slope is the power-law exponent.
inline FitResult fit_powerlaw(std::span<const std::pair<double, double>> points) {
  std::vector<double> lx, ly;
  for (auto [n, v] : points) {
    if (!(n > 0)) throw std::invalid_argument("power-law fit needs positive abscissae");
    if (!(v > 0)) throw std::invalid_argument("power-law fit needs positive values");
    lx.push_back(std::log(n));
    ly.push_back(std::log(v));
  }
  return fit_linear(lx, ly);
}

}  // namespace rbc
