#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "reeblab/errors.hpp"

namespace reeblab {

/// Periodic cubic spline through uniform samples y_i = y(i/n), i = 0..n-1,
/// on the circle [0,1). Value and first two derivatives are continuous.
class PeriodicCubicSpline {
 public:
  PeriodicCubicSpline() = default;

  explicit PeriodicCubicSpline(std::vector<double> samples) : y_(std::move(samples)) {
    const std::size_t n = y_.size();
    if (n < 4) throw ConstructionError("periodic spline needs at least 4 samples");
    h_ = 1.0 / static_cast<double>(n);

    // Cyclic tridiagonal system M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2,
    // solved by Sherman-Morrison on top of the Thomas algorithm.
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ym = y_[(i + n - 1) % n];
      const double yp = y_[(i + 1) % n];
      rhs[i] = 6.0 * (yp - 2.0 * y_[i] + ym) / (h_ * h_);
    }
    const double a = 1.0, c = 1.0;  // off-diagonals, and the two corner entries
    const double gamma = -4.0;
    std::vector<double> diag(n, 4.0);
    diag[0] -= gamma;
    diag[n - 1] -= a * c / gamma;

    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = c;

    const auto x = thomas(diag, rhs);
    const auto z = thomas(diag, u);
    const double fact = (x[0] + a * x[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
    m_.resize(n);
    for (std::size_t i = 0; i < n; ++i) m_[i] = x[i] - fact * z[i];
  }

  std::size_t size() const { return y_.size(); }
  const std::vector<double>& samples() const { return y_; }

  /// (y, y', y'') at theta reduced mod 1.
  std::array<double, 3> eval(double theta) const {
    double r = theta - std::floor(theta);
    const std::size_t n = y_.size();
    auto i = static_cast<std::size_t>(r / h_);
    if (i >= n) i = n - 1;
    return eval_segment(i, r / h_ - static_cast<double>(i));
  }

  /// Evaluation inside segment i at local coordinate t in [0,1]; used to probe
  /// the left limit at theta = 1 when checking periodicity.
  std::array<double, 3> eval_segment(std::size_t i, double t) const {
    const std::size_t n = y_.size();
    const std::size_t j = (i + 1) % n;
    const double y0 = y_[i], y1 = y_[j], m0 = m_[i], m1 = m_[j];
    const double a = 1.0 - t, b = t;
    const double h2 = h_ * h_;
    const double v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h2 / 6.0;
    const double d = (y1 - y0) / h_ + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h_ / 6.0;
    const double dd = a * m0 + b * m1;
    return {v, d, dd};
  }

 private:
  static std::vector<double> thomas(const std::vector<double>& diag, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> cp(n, 0.0);
    double denom = diag[0];
    cp[0] = 1.0 / denom;
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
      denom = diag[i] - cp[i - 1];
      cp[i] = 1.0 / denom;
      rhs[i] = (rhs[i] - rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= cp[i] * rhs[i + 1];
    return rhs;
  }

  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
  double h_ = 0.0;
};

}  // namespace reeblab
