#pragma once

// Asymptotic operators  A = -J0 d/dt - S(t)  on loops in R^2, their spectra with eigenfunction
// winding numbers, and the Conley-Zehnder index computed from the spectrum and from the
// linearized flow.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <fftw3.h>
#include <lapacke.h>

#include "reeblab/errors.hpp"
#include "reeblab/profile_model.hpp"
#include "reeblab/reeb_dynamics.hpp"

namespace reeblab {

using Vec2 = Eigen::Vector2d;

/// Standard complex structure on R^2, rotating e1 to e2.
inline Mat2 standard_J() {
  Mat2 j;
  j << 0.0, -1.0, 1.0, 0.0;
  return j;
}

enum class Provenance { Explicit, FromPath, FromOrbit };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Explicit: return "explicit";
    case Provenance::FromPath: return "from-path";
    case Provenance::FromOrbit: return "from-orbit";
  }
  return "unknown";
}

inline constexpr double kSymmetryTolS = 1e-12;
inline constexpr double kLoopPeriodicityTol = 1e-10;

/// The operator eta -> -J0 eta' - S(t) eta for a loop S of symmetric 2x2 matrices on R/Z.
class AsymptoticOperator {
 public:
  using LoopFn = std::function<Mat2(double)>;

  static AsymptoticOperator explicit_loop(LoopFn s, std::string label = "explicit") {
    return AsymptoticOperator(std::move(s), Provenance::Explicit, std::move(label));
  }

  static AsymptoticOperator constant(const Mat2& s, std::string label = "constant") {
    return AsymptoticOperator([s](double) { return s; }, Provenance::Explicit, std::move(label));
  }

  /// closure_tol bounds |S(0) - S(1)|; loops recovered from a path pass a looser, conditioning-aware bound.
  AsymptoticOperator(LoopFn s, Provenance prov, std::string label, double closure_tol = kLoopPeriodicityTol)
      : s_(std::move(s)), provenance_(prov), label_(std::move(label)) {
    validate(closure_tol);
  }

  /// S(t) with t reduced mod 1.
  Mat2 S(double t) const { return s_(t - std::floor(t)); }
  Provenance provenance() const { return provenance_; }
  const std::string& label() const { return label_; }

  std::vector<Mat2> samples(int m) const {
    std::vector<Mat2> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) out.push_back(S(static_cast<double>(i) / m));
    return out;
  }

 private:
  void validate(double closure_tol) const {
    constexpr int kChecks = 64;
    for (int i = 0; i <= kChecks; ++i) {
      const Mat2 s = s_(static_cast<double>(i) / kChecks);
      if (!s.allFinite()) throw InvalidOperatorError("S(t) is not finite");
      if (std::abs(s(0, 1) - s(1, 0)) >= kSymmetryTolS) throw InvalidOperatorError("S(t) is not symmetric");
    }
    if ((s_(0.0) - s_(1.0)).cwiseAbs().maxCoeff() >= closure_tol)
      throw InvalidOperatorError("S is not a loop: S(0) != S(1)");
  }

  LoopFn s_;
  Provenance provenance_;
  std::string label_;
};

/// Trigonometric interpolant of uniformly sampled symmetric matrices, S(i/m) = samples[i].
inline AsymptoticOperator::LoopFn trigonometric_loop(std::vector<Mat2> samples) {
  const int m = static_cast<int>(samples.size());
  if (m < 1) throw InvalidOperatorError("empty sample list");
  const int kmax = (m - 1) / 2;
  std::vector<std::array<std::complex<double>, 3>> coef(static_cast<std::size_t>(kmax) + 1);
  for (int k = 0; k <= kmax; ++k) {
    std::array<std::complex<double>, 3> c{};
    for (int i = 0; i < m; ++i) {
      const auto e = std::polar(1.0, -kTwoPi * k * i / m);
      c[0] += samples[i](0, 0) * e;
      c[1] += samples[i](0, 1) * e;
      c[2] += samples[i](1, 1) * e;
    }
    for (auto& x : c) x /= static_cast<double>(m);
    coef[static_cast<std::size_t>(k)] = c;
  }
  return [coef, kmax](double t) {
    std::array<double, 3> v{coef[0][0].real(), coef[0][1].real(), coef[0][2].real()};
    for (int k = 1; k <= kmax; ++k) {
      const auto e = std::polar(1.0, kTwoPi * k * t);
      for (int r = 0; r < 3; ++r) v[r] += 2.0 * (coef[static_cast<std::size_t>(k)][r] * e).real();
    }
    Mat2 s;
    s << v[0], v[1], v[1], v[2];
    return s;
  };
}

// ---------------------------------------------------------------------------------------------
// Symplectic paths

/// A path Psi : [0,1] -> Sp(2) with Psi(0) = I. When `derivative` is empty it is obtained by
/// finite differences of `value`.
struct SymplecticPath {
  std::function<Mat2(double)> value;
  std::function<Mat2(double)> derivative;

  Mat2 operator()(double t) const { return value(t); }
  Mat2 d(double t) const {
    if (derivative) return derivative(t);
    constexpr double h = 1e-4;
    return (value(t - 2 * h) - 8.0 * value(t - h) + 8.0 * value(t + h) - value(t + 2 * h)) / (12.0 * h);
  }
};

inline constexpr double kSymplecticTol = 1e-8;

/// Path t -> exp(J0 * angle * t), rotation by the total angle `angle`.
inline SymplecticPath rotation_path(double angle) {
  SymplecticPath p;
  p.value = [angle](double t) {
    Mat2 r;
    const double c = std::cos(angle * t), s = std::sin(angle * t);
    r << c, -s, s, c;
    return r;
  };
  p.derivative = [angle](double t) {
    Mat2 r;
    const double c = std::cos(angle * t), s = std::sin(angle * t);
    r << -s, -c, c, -s;
    return Mat2(r * angle);
  };
  return p;
}

/// The loop S(t) = -J0 Psi'(t) Psi(t)^{-1} (symmetrized) generating the path.
inline AsymptoticOperator operator_from_path(const SymplecticPath& path, int checks = 256) {
  if ((path(0.0) - Mat2::Identity()).cwiseAbs().maxCoeff() > kSymplecticTol)
    throw NonsymplecticPathError("path does not start at the identity");
  for (int i = 0; i <= checks; ++i) {
    const double t = static_cast<double>(i) / checks;
    if (std::abs(path(t).determinant() - 1.0) > kSymplecticTol)
      throw NonsymplecticPathError("det Psi(t) drifts from 1 at t = " + std::to_string(t));
  }
  const Mat2 j = standard_J();
  auto s = [path, j](double t) {
    const Mat2 raw = -j * path.d(t) * path(t).inverse();
    return Mat2(0.5 * (raw + raw.transpose()));
  };
  // -J Psi' Psi^{-1} loses about |Psi|^2 digits to cancellation on hyperbolic paths.
  const double cond = std::max(path(0.0).squaredNorm(), path(1.0).squaredNorm());
  const double scale = std::max({1.0, s(0.0).norm(), s(1.0).norm()});
  const double tol = std::max(kLoopPeriodicityTol, 64.0 * std::numeric_limits<double>::epsilon() * scale * cond);
  return AsymptoticOperator(s, Provenance::FromPath, "from-path", tol);
}

inline constexpr double kPathRelTol = 1e-12;
inline constexpr double kPathAbsTol = 1e-14;

/// Solves Psi' = J0 S(t) Psi, Psi(0) = I and returns the path as a cubic Hermite interpolant
/// through `knots` + 1 equally spaced solution values.
inline SymplecticPath path_from_operator(const AsymptoticOperator& a, int knots = 2048) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 4>;
  const Mat2 j = standard_J();
  auto rhs = [&a, &j](const State& x, State& dx, double t) {
    Mat2 psi;
    psi << x[0], x[1], x[2], x[3];
    const Mat2 d = j * a.S(t) * psi;
    dx = {d(0, 0), d(0, 1), d(1, 0), d(1, 1)};
  };
  std::vector<double> times(static_cast<std::size_t>(knots) + 1);
  for (int i = 0; i <= knots; ++i) times[static_cast<std::size_t>(i)] = static_cast<double>(i) / knots;
  auto vals = std::make_shared<std::vector<Mat2>>();
  auto ders = std::make_shared<std::vector<Mat2>>();
  vals->reserve(times.size());
  State x{1.0, 0.0, 0.0, 1.0};
  try {
    odeint::integrate_times(odeint::make_controlled(kPathAbsTol, kPathRelTol, odeint::runge_kutta_dopri5<State>()),
                            rhs, x, times.begin(), times.end(), 1e-4, [&](const State& s, double) {
                              Mat2 psi;
                              psi << s[0], s[1], s[2], s[3];
                              vals->push_back(psi);
                            });
  } catch (const std::exception& e) {
    throw IntegrationError(std::string("path integration failed: ") + e.what());
  }
  for (std::size_t i = 0; i < vals->size(); ++i) ders->push_back(j * a.S(times[i]) * (*vals)[i]);

  SymplecticPath p;
  const double h = 1.0 / knots;
  p.value = [vals, ders, h, knots](double t) {
    t = std::clamp(t, 0.0, 1.0);
    int i = std::min(static_cast<int>(t / h), knots - 1);
    const double u = t / h - i;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    const auto k = static_cast<std::size_t>(i);
    return Mat2(h00 * (*vals)[k] + h10 * h * (*ders)[k] + h01 * (*vals)[k + 1] + h11 * h * (*ders)[k + 1]);
  };
  // Derivative of the interpolant itself keeps the pair consistent.
  p.derivative = [vals, ders, h, knots](double t) {
    t = std::clamp(t, 0.0, 1.0);
    int i = std::min(static_cast<int>(t / h), knots - 1);
    const double u = t / h - i;
    const double d00 = 6 * u * u - 6 * u, d10 = 3 * u * u - 4 * u + 1;
    const double d01 = -6 * u * u + 6 * u, d11 = 3 * u * u - 2 * u;
    const auto k = static_cast<std::size_t>(i);
    return Mat2((d00 * (*vals)[k] + d01 * (*vals)[k + 1]) / h + d10 * (*ders)[k] + d11 * (*ders)[k + 1]);
  };
  return p;
}

// ---------------------------------------------------------------------------------------------
// Spectrum

inline constexpr double kVanishingTol = 1e-12;

/// Degree of a closed curve in R^2 \ {0}, given by samples over one period (the last sample
/// is joined back to the first).
inline int winding_number(const std::vector<Vec2>& loop) {
  if (loop.empty()) throw VanishingLoopError("empty loop");
  for (const auto& v : loop)
    if (v.norm() < kVanishingTol) throw VanishingLoopError("loop passes within 1e-12 of the origin");
  double total = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const Vec2& a = loop[i];
    const Vec2& b = loop[(i + 1) % loop.size()];
    total += std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
  }
  const double turns = total / kTwoPi;
  const long r = std::lround(turns);
  if (std::abs(turns - static_cast<double>(r)) > 1e-6) throw ResolutionError("loop undersampled for winding");
  return static_cast<int>(r);
}

struct SpectralEntry {
  double eigenvalue = 0;
  int multiplicity = 1;
  int winding = 0;
};

struct SpectralData {
  std::vector<SpectralEntry> entries;      // ascending eigenvalues inside the window
  std::vector<std::vector<Vec2>> eigenfunctions;  // one sampled eigenfunction per entry
  int N = 0;
  double window = 0;
  int bandwidth = 0;

  /// Eigenvalues with multiplicity, ascending.
  std::vector<double> eigenvalues() const {
    std::vector<double> out;
    for (const auto& e : entries)
      for (int i = 0; i < e.multiplicity; ++i) out.push_back(e.eigenvalue);
    return out;
  }
  int total_multiplicity() const {
    int m = 0;
    for (const auto& e : entries) m += e.multiplicity;
    return m;
  }
};

/// Eigenvalues within tol of zero, counted with multiplicity.
inline int kernel_dimension(const SpectralData& d, double tol = 1e-6) {
  int k = 0;
  for (const auto& e : d.entries)
    if (std::abs(e.eigenvalue) < tol) k += e.multiplicity;
  return k;
}

inline constexpr double kDefaultWindow = 6.0 * std::numbers::pi;
inline constexpr double kClusterTol = 1e-9;
inline constexpr double kCoefficientFloor = 1e-15;
inline constexpr double kInverseIterationShift = 1e-11;
inline constexpr int kMaxSchurModes = 96;

namespace detail {

/// Real orthonormal Fourier basis on L^2(R/Z, R^2), ordered by frequency:
///   index 0, 1      : constant in component 0, 1
///   2 + 4(k-1) + 2a + s : sqrt(2) cos(2 pi k t) (s = 0) or sqrt(2) sin(2 pi k t) (s = 1) in component a.
struct BasisFn {
  int component;
  int k;
  int sin;  // 0 for cos / constant
};

inline BasisFn basis_fn(int idx) {
  if (idx < 2) return {idx, 0, 0};
  const int r = idx - 2;
  return {(r % 4) / 2, r / 4 + 1, r % 2};
}

/// Complex Fourier components (frequency, coefficient) of a basis function.
inline std::array<std::pair<int, std::complex<double>>, 2> components(const BasisFn& b, int& count) {
  using C = std::complex<double>;
  const double r = 1.0 / std::sqrt(2.0);
  if (b.k == 0) {
    count = 1;
    return {{{0, C(1.0, 0.0)}, {0, C(0.0, 0.0)}}};
  }
  count = 2;
  if (b.sin == 0) return {{{b.k, C(r, 0.0)}, {-b.k, C(r, 0.0)}}};
  return {{{b.k, C(0.0, -r)}, {-b.k, C(0.0, r)}}};
}

struct LoopCoefficients {
  // s_hat[entry][j] for entries (S11, S12, S22), j = 0..kmax
  std::array<std::vector<std::complex<double>>, 3> c;
  int bandwidth = 0;

  std::complex<double> at(int entry, int j) const {
    const int aj = std::abs(j);
    if (aj > bandwidth) return {0.0, 0.0};
    const auto v = c[static_cast<std::size_t>(entry)][static_cast<std::size_t>(aj)];
    return j >= 0 ? v : std::conj(v);
  }
};

// The FFTW planner is not thread-safe; plan execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline LoopCoefficients loop_coefficients(const AsymptoticOperator& a, int kmax) {
  const int m = std::max(4 * kmax, 256);
  const auto samples = a.samples(m);
  std::vector<double> in(static_cast<std::size_t>(m));
  std::vector<fftw_complex> out(static_cast<std::size_t>(m / 2 + 1));
  fftw_plan plan;
  {
    const std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(m, in.data(), out.data(), FFTW_ESTIMATE);
  }
  LoopCoefficients lc;
  double scale = 0.0;
  const std::array<std::pair<int, int>, 3> entries{{{0, 0}, {0, 1}, {1, 1}}};
  for (std::size_t e = 0; e < 3; ++e) {
    for (int i = 0; i < m; ++i)
      in[static_cast<std::size_t>(i)] = samples[static_cast<std::size_t>(i)](entries[e].first, entries[e].second);
    fftw_execute(plan);
    lc.c[e].resize(static_cast<std::size_t>(kmax) + 1);
    for (int j = 0; j <= kmax; ++j) {
      const auto& o = out[static_cast<std::size_t>(j)];
      const std::complex<double> v(o[0] / m, o[1] / m);
      lc.c[e][static_cast<std::size_t>(j)] = v;
      scale = std::max(scale, std::abs(v));
    }
  }
  {
    const std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double floor = kCoefficientFloor * std::max(1.0, scale) * 10.0;
  lc.bandwidth = 0;
  for (int j = kmax; j > 0; --j) {
    bool significant = false;
    for (int e = 0; e < 3; ++e)
      if (std::abs(lc.c[static_cast<std::size_t>(e)][static_cast<std::size_t>(j)]) > floor) significant = true;
    if (significant) {
      lc.bandwidth = j;
      break;
    }
  }
  return lc;
}

/// Matrix element <b_i, A b_j> of the discretized operator.
inline double matrix_element(int i, int j, const LoopCoefficients& lc) {
  const BasisFn bi = basis_fn(i), bj = basis_fn(j);
  double v = 0.0;
  // -J0 d/dt part
  if (bi.k == bj.k && bi.k > 0 && bi.component != bj.component) {
    const double w = kTwoPi * bi.k;
    // <(s_k,0), A(0,c_k)> = -w ; <(c_k,0), A(0,s_k)> = +w ; symmetric counterparts
    const BasisFn& first = bi.component == 0 ? bi : bj;
    const BasisFn& second = bi.component == 0 ? bj : bi;
    if (first.sin == 1 && second.sin == 0) v -= w;
    if (first.sin == 0 && second.sin == 1) v += w;
  }
  // -S part
  const int entry = (bi.component == 0 && bj.component == 0) ? 0 : (bi.component == 1 && bj.component == 1) ? 2 : 1;
  int ni = 0, nj = 0;
  const auto ci = components(bi, ni);
  const auto cj = components(bj, nj);
  std::complex<double> acc{0.0, 0.0};
  for (int a = 0; a < ni; ++a)
    for (int b = 0; b < nj; ++b)
      acc += std::conj(ci[static_cast<std::size_t>(a)].second) * cj[static_cast<std::size_t>(b)].second *
             lc.at(entry, ci[static_cast<std::size_t>(a)].first - cj[static_cast<std::size_t>(b)].first);
  v -= acc.real();
  return v;
}

}  // namespace detail

/// Dense Galerkin matrix of A in the real Fourier basis with frequencies |k| <= N
/// (dimension 4N + 2). Intended for small N and for checking the banded solver.
inline Eigen::MatrixXd fourier_matrix(const AsymptoticOperator& a, int N) {
  const auto lc = detail::loop_coefficients(a, N);
  const int n = 4 * N + 2;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = detail::matrix_element(i, j, lc);
  return m;
}

namespace detail {

/// Eigenpairs of the Galerkin matrix inside (-window, window]: eigenvalue, multiplicity and an
/// orthonormal basis of the eigenspace in the real Fourier basis.
struct WindowPair {
  double mu;
  int mult;
  Eigen::MatrixXd vectors;
};

/// Groups sorted eigenvalues closer than kClusterTol.
inline std::vector<std::pair<double, int>> cluster(const std::vector<double>& w) {
  std::vector<std::pair<double, int>> out;
  for (std::size_t col = 0; col < w.size();) {
    std::size_t mult = 1;
    while (col + mult < w.size() && std::abs(w[col + mult] - w[col]) < kClusterTol) ++mult;
    if (mult > 2) throw ResolutionError("eigenvalue multiplicity exceeds 2");
    double mean = 0;
    for (std::size_t i = 0; i < mult; ++i) mean += w[col + i];
    out.emplace_back(mean / static_cast<double>(mult), static_cast<int>(mult));
    col += mult;
  }
  return out;
}

/// Band of the Galerkin matrix in LAPACK upper symmetric storage.
struct BandMatrix {
  int n = 0, kd = 0;
  std::vector<double> ab;  // ab[kd + i - j + j (kd + 1)] = A(i, j), i <= j
  double operator()(int i, int j) const {
    if (i > j) std::swap(i, j);
    if (j - i > kd) return 0.0;
    return ab[static_cast<std::size_t>(kd + i - j + j * (kd + 1))];
  }
};

inline BandMatrix band_matrix(const LoopCoefficients& lc, int N) {
  BandMatrix b;
  b.n = 4 * N + 2;
  b.kd = std::min(4 * lc.bandwidth + 3, b.n - 1);
  b.ab.assign(static_cast<std::size_t>(b.kd + 1) * b.n, 0.0);
  for (int j = 0; j < b.n; ++j)
    for (int i = std::max(0, j - b.kd); i <= j; ++i)
      b.ab[static_cast<std::size_t>(b.kd + i - j + j * (b.kd + 1))] = matrix_element(i, j, lc);
  return b;
}

/// Band LU of A[lo:n, lo:n] - mu I in general band storage.
struct ShiftedBandLU {
  int n = 0, kd = 0, ld = 0;
  std::vector<double> lu;
  std::vector<lapack_int> piv;

  ShiftedBandLU(const BandMatrix& a, int lo, double mu) : n(a.n - lo), kd(a.kd), ld(3 * a.kd + 1) {
    lu.assign(static_cast<std::size_t>(ld) * n, 0.0);
    for (int j = 0; j < n; ++j)
      for (int i = std::max(0, j - kd); i <= std::min(n - 1, j + kd); ++i)
        lu[static_cast<std::size_t>(2 * kd + i - j + j * ld)] = a(lo + i, lo + j) - (i == j ? mu : 0.0);
    piv.resize(static_cast<std::size_t>(n));
    if (LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kd, kd, lu.data(), ld, piv.data()) != 0)
      throw ResolutionError("band LU factorization failed");
  }

  void solve(Eigen::MatrixXd& x) const {
    if (LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kd, kd, static_cast<lapack_int>(x.cols()), lu.data(), ld, piv.data(),
                       x.data(), n) != 0)
      throw ResolutionError("band LU solve failed");
  }
};

/// All eigenvalues in the window from the banded eigensolver, eigenspaces by inverse iteration.
inline std::vector<WindowPair> window_pairs_direct(const BandMatrix& band, double window) {
  const int n = band.n, kd = band.kd;
  std::vector<double> ab = band.ab;
  std::vector<double> w(static_cast<std::size_t>(n));
  std::vector<lapack_int> ifail(static_cast<std::size_t>(n));
  lapack_int found = 0;
  const double abstol = 2.0 * LAPACKE_dlamch('S');
  const lapack_int info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'V', 'U', n, kd, ab.data(), kd + 1, nullptr, n,
                                         -window, window, 0, 0, abstol, &found, w.data(), nullptr, 1, ifail.data());
  if (info != 0) throw ResolutionError("banded eigensolver failed, info = " + std::to_string(info));
  w.resize(static_cast<std::size_t>(found));

  std::mt19937_64 rng(0x5eedu);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<WindowPair> out;
  for (const auto& [mu, mult] : cluster(w)) {
    const ShiftedBandLU lu(band, 0, mu + kInverseIterationShift * std::max(1.0, std::abs(mu)));
    Eigen::MatrixXd x(n, mult);
    for (int c = 0; c < mult; ++c)
      for (int i = 0; i < n; ++i) x(i, c) = unif(rng);
    for (int it = 0; it < 3; ++it) {
      lu.solve(x);
      x = Eigen::HouseholderQR<Eigen::MatrixXd>(x).householderQ() * Eigen::MatrixXd::Identity(n, mult);
    }
    out.push_back({mu, mult, std::move(x)});
  }
  return out;
}

/// Spectral Schur complement on the low modes |k| <= K. When the high-mode block A_QQ has no
/// eigenvalue in the window, mu is an eigenvalue of A there iff it is an eigenvalue of
///     T(mu) = A_PP - A_PQ (A_QQ - mu)^{-1} A_QP,
/// and every sorted eigenvalue of T(mu) minus mu is strictly decreasing (T' = -Y^T Y). The
/// inertia of A - mu is that of A_QQ - mu plus that of T(mu) - mu, so the roots counted per
/// eigenvalue branch are exactly the window eigenvalues of the full matrix.
class SchurWindow {
 public:
  // A_QQ is block tridiagonal in blocks of kd rows (the last one takes the remainder), and
  // A_QP couples the first Q block to the last kd columns of P only.
  SchurWindow(const BandMatrix& band, int m) : n_(band.n), m_(m), kd_(band.kd) {
    app_.resize(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) app_(i, j) = band(i, j);
    const int nq = n_ - m, nb = nq / kd_;
    for (int b = 0; b < nb; ++b) {
      offset_.push_back(m + b * kd_);
      size_.push_back(b + 1 < nb ? kd_ : nq - b * kd_);
    }
    auto block = [&](int r0, int rows, int c0, int cols) {
      Eigen::MatrixXd out(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = band(r0 + i, c0 + j);
      return out;
    };
    for (int b = 0; b < nb; ++b) {
      diag_.push_back(block(offset_[b], size_[b], offset_[b], size_[b]));
      if (b + 1 < nb) sub_.push_back(block(offset_[b + 1], size_[b + 1], offset_[b], size_[b]));
    }
    c_ = block(m, size_[0], m - kd_, kd_);
    scale_ = std::max(1.0, app_.cwiseAbs().rowwise().sum().maxCoeff());
  }

  struct Eval {
    Eigen::VectorXd lambda;   // eigenvalues of T(mu), ascending
    Eigen::MatrixXd vectors;  // eigenvectors of T(mu)
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> schur;  // trailing Schur complements of A_QQ - mu
  };

  Eval eval(double mu) const {
    Eval e;
    const std::size_t nb = diag_.size();
    e.schur.resize(nb);
    for (std::size_t b = nb; b-- > 0;) {
      Eigen::MatrixXd s = diag_[b];
      s.diagonal().array() -= mu;
      if (b + 1 < nb) s -= sub_[b].transpose() * e.schur[b + 1].solve(sub_[b]);
      e.schur[b].compute(s);
    }
    Eigen::MatrixXd t = app_;
    t.bottomRightCorner(kd_, kd_) -= c_.transpose() * e.schur[0].solve(c_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (t + t.transpose()));
    e.lambda = es.eigenvalues();
    e.vectors = es.eigenvectors();
    return e;
  }

  /// (A_QQ - mu)^{-1} A_QP x for x in the low modes.
  Eigen::VectorXd lift(const Eval& e, const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(n_ - m_);
    Eigen::VectorXd yb = e.schur[0].solve(c_ * x.tail(kd_));
    for (std::size_t b = 0;; ++b) {
      y.segment(offset_[b] - m_, size_[b]) = yb;
      if (b + 1 == diag_.size()) break;
      yb = -e.schur[b + 1].solve(sub_[b] * yb);
    }
    return y;
  }

  /// f_j(mu) = lambda_j(T(mu)) - mu and its derivative.
  std::pair<double, double> branch(const Eval& e, int j, double mu) const {
    return {e.lambda(j) - mu, -1.0 - lift(e, e.vectors.col(j)).squaredNorm()};
  }

  /// Root of the decreasing f_j in (lo, hi], with f_j(lo) > 0 >= f_j(hi): Newton from the linear
  /// guess between the end values, bisecting whenever |f| fails to halve. Returns the root and
  /// the evaluation there.
  std::pair<double, Eval> root(int j, double lo, double hi, double flo, double fhi) const {
    double mu = lo + (hi - lo) * flo / (flo - fhi);
    double last = std::max(flo, -fhi);
    for (int it = 0; it < 200; ++it) {
      Eval e = eval(mu);
      const auto [f, df] = branch(e, j, mu);
      const double tol = 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(mu) + scale_);
      if (std::abs(f) <= tol || hi - lo <= tol) return {mu, std::move(e)};
      (f > 0 ? lo : hi) = mu;
      double next = mu - f / df;
      if (!(next > lo && next < hi) || std::abs(f) > 0.5 * last) next = 0.5 * (lo + hi);
      last = std::abs(f);
      mu = next;
    }
    throw ResolutionError("Schur complement root did not converge");
  }

  std::vector<WindowPair> pairs(double window) const {
    const Eval lo = eval(-window), hi = eval(window);
    std::vector<std::pair<double, Eval>> roots;
    for (int j = 0; j < m_; ++j) {
      const double flo = lo.lambda(j) + window, fhi = hi.lambda(j) - window;
      if (flo > 0 && fhi <= 0) roots.push_back(fhi == 0 ? std::pair{window, hi} : root(j, -window, window, flo, fhi));
    }
    std::sort(roots.begin(), roots.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<double> mus;
    for (const auto& r : roots) mus.push_back(r.first);
    std::vector<WindowPair> out;
    std::size_t at = 0;
    for (const auto& [mu, mult] : cluster(mus)) {
      // a simple root reuses its last evaluation
      const Eval e = mult == 1 ? roots[at].second : eval(mu);
      at += static_cast<std::size_t>(mult);
      // the mult eigenvalues of T(mu) closest to mu
      std::vector<int> idx(static_cast<std::size_t>(m_));
      for (int j = 0; j < m_; ++j) idx[static_cast<std::size_t>(j)] = j;
      std::partial_sort(idx.begin(), idx.begin() + mult, idx.end(), [&](int a, int b) {
        return std::abs(e.lambda(a) - mu) < std::abs(e.lambda(b) - mu);
      });
      Eigen::MatrixXd x(n_, mult);
      for (int c = 0; c < mult; ++c) {
        const Eigen::VectorXd xp = e.vectors.col(idx[static_cast<std::size_t>(c)]);
        x.col(c).head(m_) = xp;
        x.col(c).tail(n_ - m_) = -lift(e, xp);
      }
      x = Eigen::HouseholderQR<Eigen::MatrixXd>(x).householderQ() * Eigen::MatrixXd::Identity(n_, mult);
      out.push_back({mu, mult, std::move(x)});
    }
    return out;
  }

 private:
  int n_, m_, kd_;
  double scale_ = 1.0;
  Eigen::MatrixXd app_, c_;
  std::vector<int> offset_, size_;
  std::vector<Eigen::MatrixXd> diag_, sub_;
};

/// Largest |S(t)|_2 over the sample grid, a bound for the Galerkin compression of S up to the
/// interpolation error of a band-limited loop.
inline double sup_norm(const AsymptoticOperator& a, int samples) {
  double s = 0;
  for (const Mat2& m : a.samples(samples)) s = std::max(s, Eigen::SelfAdjointEigenSolver<Mat2>(m).eigenvalues().cwiseAbs().maxCoeff());
  return s;
}

}  // namespace detail

/// Eigenvalues of A inside (-window, window] with multiplicities and eigenfunction windings,
/// from the Galerkin discretization with Fourier modes |k| <= N. Throws ResolutionError when
/// the windings are not monotone or a winding value inside the window is not attained exactly
/// twice.
inline SpectralData spectrum(const AsymptoticOperator& a, double window = kDefaultWindow, int N = 512) {
  if (N < 64) throw Error("spectrum needs N >= 64");
  if (!(window > 0) || !std::isfinite(window)) throw Error("spectral window must be finite and positive");
  const auto lc = detail::loop_coefficients(a, N);
  const detail::BandMatrix band = detail::band_matrix(lc, N);
  const int n = band.n;

  // Low-mode cut K: the high-mode block has eigenvalues of modulus >= 2 pi (K + 1) - sup|S|,
  // kept at least 2 pi outside the window. Each root evaluation costs a dense eigensolve of
  // size m, so large |S| goes to the full banded solver instead.
  const double s_sup = 1.05 * detail::sup_norm(a, std::max(4 * N, 256)) + 1e-12;
  const int K = static_cast<int>(std::ceil((window + s_sup + kTwoPi) / kTwoPi));
  const int m = 4 * K + 2;
  const std::vector<detail::WindowPair> pairs = m <= kMaxSchurModes && m + 2 * band.kd < n ? detail::SchurWindow(band, m).pairs(window)
                                                                    : detail::window_pairs_direct(band, window);

  // Eigenfunctions on a dense grid of 4N points.
  const int grid = 4 * N;
  std::vector<double> cs(static_cast<std::size_t>(grid)), sn(static_cast<std::size_t>(grid));
  for (int g = 0; g < grid; ++g) {
    cs[static_cast<std::size_t>(g)] = std::cos(kTwoPi * g / grid);
    sn[static_cast<std::size_t>(g)] = std::sin(kTwoPi * g / grid);
  }
  const double r2 = std::sqrt(2.0);
  auto sample = [&](const double* v) {
    int kmax = 0;
    for (int idx = n - 1; idx >= 2; --idx)
      if (std::abs(v[idx]) > kCoefficientFloor) {
        kmax = detail::basis_fn(idx).k;
        break;
      }
    std::vector<Vec2> loop(static_cast<std::size_t>(grid), Vec2(v[0], v[1]));
    for (int k = 1; k <= kmax; ++k) {
      const int base = 2 + 4 * (k - 1);
      const double c0 = r2 * v[base], s0 = r2 * v[base + 1], c1 = r2 * v[base + 2], s1 = r2 * v[base + 3];
      for (int g = 0; g < grid; ++g) {
        const auto idx = static_cast<std::size_t>((static_cast<long>(k) * g) % grid);
        loop[static_cast<std::size_t>(g)] += Vec2(c0 * cs[idx] + s0 * sn[idx], c1 * cs[idx] + s1 * sn[idx]);
      }
    }
    return loop;
  };

  SpectralData data;
  data.N = N;
  data.window = window;
  data.bandwidth = lc.bandwidth;
  for (const auto& p : pairs) {
    int wind = 0;
    std::vector<Vec2> first;
    for (int c = 0; c < p.mult; ++c) {
      auto loop = sample(p.vectors.col(c).data());
      const int wc = winding_number(loop);
      if (c == 0) {
        wind = wc;
        first = std::move(loop);
      } else if (wc != wind) {
        throw ResolutionError("eigenvectors of one eigenvalue have different windings");
      }
    }
    data.entries.push_back({p.mu, p.mult, wind});
    data.eigenfunctions.push_back(std::move(first));
  }

  // Winding structure: non-decreasing, no skipped values, and every value strictly between the
  // extreme windings attained exactly twice.
  std::map<int, int> count;
  for (std::size_t i = 0; i < data.entries.size(); ++i) {
    const auto& e = data.entries[i];
    if (e.multiplicity > 2) throw ResolutionError("eigenvalue multiplicity exceeds 2");
    if (i > 0) {
      const int step = e.winding - data.entries[i - 1].winding;
      if (step < 0) throw ResolutionError("eigenfunction windings are not monotone");
      if (step > 1) throw ResolutionError("a winding value is skipped inside the window");
    }
    count[e.winding] += e.multiplicity;
  }
  if (!count.empty()) {
    const int lo = count.begin()->first, hi = count.rbegin()->first;
    for (const auto& [wv, c] : count) {
      if (c > 2) throw ResolutionError("winding " + std::to_string(wv) + " attained more than twice");
      if (wv > lo && wv < hi && c != 2)
        throw ResolutionError("winding " + std::to_string(wv) + " not attained exactly twice");
    }
  }
  return data;
}

// ---------------------------------------------------------------------------------------------
// Winding invariants and Conley-Zehnder index

inline constexpr double kOnSpectrumTol = 1e-9;

struct AlphaParity {
  int alpha_minus = 0;
  int alpha_plus = 0;
  int parity = 0;
};

/// Extremal windings of the eigenvalues below and above the shift c.
inline AlphaParity alpha_parity(const SpectralData& data, double c) {
  bool below = false, above = false;
  AlphaParity r;
  r.alpha_minus = std::numeric_limits<int>::min();
  r.alpha_plus = std::numeric_limits<int>::max();
  for (const auto& e : data.entries) {
    if (std::abs(e.eigenvalue - c) < kOnSpectrumTol)
      throw OnSpectrumError("shift " + std::to_string(c) + " lies on the spectrum");
    if (e.eigenvalue < c) {
      below = true;
      r.alpha_minus = std::max(r.alpha_minus, e.winding);
    } else {
      above = true;
      r.alpha_plus = std::min(r.alpha_plus, e.winding);
    }
  }
  if (!below || !above) throw WindowTooSmallError("spectral window has no eigenvalue on one side of the shift");
  r.parity = r.alpha_plus - r.alpha_minus;
  if (r.parity != 0 && r.parity != 1) throw ResolutionError("parity outside {0, 1}");
  return r;
}

enum class CZMethod { Spectral, Path };

struct CZResult {
  int alpha_minus = 0;
  int alpha_plus = 0;
  int parity = 0;
  int cz = 0;
  double shift = 0;
  CZMethod method = CZMethod::Spectral;
};

/// mu_CZ(A - c) = 2 alpha_-(c) + p(c); the dual form 2 alpha_+(c) - p(c) is checked to agree.
inline CZResult cz_spectral(const SpectralData& data, double c) {
  const AlphaParity ap = alpha_parity(data, c);
  CZResult r{ap.alpha_minus, ap.alpha_plus, ap.parity, 2 * ap.alpha_minus + ap.parity, c, CZMethod::Spectral};
  if (2 * ap.alpha_plus - ap.parity != r.cz) throw ResolutionError("winding identities for mu_CZ disagree");
  return r;
}

inline constexpr double kEndpointTol = 1e-10;

namespace detail {

/// Total angle swept by t -> Psi(t) v over [0, 1], sampled finely enough that consecutive
/// samples never differ by more than pi/3.
inline double swept_angle(const SymplecticPath& path, const Vec2& v, int samples) {
  std::function<double(double, double, const Vec2&, const Vec2&, int)> sweep =
      [&](double t0, double t1, const Vec2& a, const Vec2& b, int depth) -> double {
    const double d = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    if (std::abs(d) <= std::numbers::pi / 3.0 || depth > 30) return d;
    const double tm = 0.5 * (t0 + t1);
    const Vec2 m = path(tm) * v;
    return sweep(t0, tm, a, m, depth + 1) + sweep(tm, t1, m, b, depth + 1);
  };
  double total = 0.0;
  Vec2 prev = path(0.0) * v;
  for (int i = 1; i <= samples; ++i) {
    const double t0 = static_cast<double>(i - 1) / samples, t1 = static_cast<double>(i) / samples;
    const Vec2 next = path(t1) * v;
    total += sweep(t0, t1, prev, next, 0);
    prev = next;
  }
  return total;
}

}  // namespace detail

/// Conley-Zehnder index of a path in Sp(2) from the rotation of vectors under the path: with
/// Psi(1) positive hyperbolic the eigenvector turns by 2 pi k and mu = 2k; otherwise every
/// vector turns by an angle in (2 pi k, 2 pi (k+1)) and mu = 2k + 1.
inline CZResult cz_path(const SymplecticPath& path, int samples = 1024) {
  if ((path(0.0) - Mat2::Identity()).cwiseAbs().maxCoeff() > kSymplecticTol)
    throw NonsymplecticPathError("path does not start at the identity");
  const Mat2 end = path(1.0);
  if (std::abs((end - Mat2::Identity()).determinant()) <= kEndpointTol)
    throw DegenerateEndpointError("Psi(1) has eigenvalue 1");
  const double tr = end.trace();
  CZResult r;
  r.method = CZMethod::Path;
  if (tr > 2.0) {
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - end.determinant()));
    const double lambda = tr / 2.0 + disc;
    Vec2 v(end(0, 1), lambda - end(0, 0));
    const Vec2 alt(lambda - end(1, 1), end(1, 0));
    if (alt.norm() > v.norm()) v = alt;
    v.normalize();
    const double sweep = detail::swept_angle(path, v, samples);
    const long k = std::lround(sweep / kTwoPi);
    r.cz = static_cast<int>(2 * k);
  } else {
    const double sweep = detail::swept_angle(path, Vec2(1.0, 0.0), samples);
    const auto k = static_cast<long>(std::floor(sweep / kTwoPi));
    r.cz = static_cast<int>(2 * k + 1);
  }
  r.parity = ((r.cz % 2) + 2) % 2;
  r.alpha_minus = (r.cz - r.parity) / 2;
  r.alpha_plus = (r.cz + r.parity) / 2;
  return r;
}

// ---------------------------------------------------------------------------------------------
// Operators of model orbits

/// Positive function of theta defining the complex structure J d_theta = beta V on xi.
using BetaFn = std::function<double(double)>;

inline BetaFn constant_beta(double b = 1.0) {
  return [b](double) { return b; };
}

/// Asymptotic operator of the (k-fold covered) closed orbits on a rational torus, in the unitary
/// frame e1 = d_theta / sqrt(beta D), e2 = J e1 = sqrt(beta / D) V. The linearized flow in that
/// frame is the shear [[1, 0], [t k T kappa / beta, 1]], so S = diag(k T kappa / beta, 0) is constant.
inline AsymptoticOperator operator_from_orbit(const ContactModel& model, const InvariantTorus& torus,
                                              const BetaFn& beta = constant_beta(), int cover = 1) {
  if (!torus.rational) throw Error("operator_from_orbit needs a rational torus");
  if (cover < 1) throw Error("cover multiplicity must be positive");
  const CurveJet j = model.jet(torus.theta);
  const double b = beta(torus.theta);
  if (!(b > 0)) throw Error("beta must be positive");
  const double t = cover * period(model, torus);
  Mat2 s = Mat2::Zero();
  s(0, 0) = t * shear_rate(j) / b;
  return AsymptoticOperator([s](double) { return s; }, Provenance::FromOrbit,
                            "orbit theta=" + std::to_string(torus.theta) + " (" + std::to_string(torus.p) + "," +
                                std::to_string(torus.q) + ") x" + std::to_string(cover));
}

}  // namespace reeblab
