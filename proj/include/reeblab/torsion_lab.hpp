#pragma once

// Checks of the Giroux torsion construction: the period bounds of the oval model, and the family of
// holomorphic cylinders u(s,t) = (alpha(s) + a0, x0, t, rho(s)) between N(1/4) and N(3/4).
//
// Cylinder reduction. Take J d_a = X, J d_theta = beta V on xi = span(d_theta, V), V = -g d_x + f d_y.
// Since lambda(d_y) = g and d_y - g X = (g'/D) V, one has J d_y = -g d_a - g'/(beta D) d_theta, so
// d_s u + J d_t u = 0 becomes
//     alpha' = g(rho),    rho' = g'(rho) / (beta(rho) D(rho)).
// rho' < 0 on (1/4, 3/4) and vanishes at the ends; the linearization at 1/4 decays like exp(nu s),
// nu = g''(1/4) / (beta D(1/4)), which is minus the nonzero eigenvalue of the asymptotic operator
// of the (0, 1) orbits in the frame of spectral.hpp.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "reeblab/errors.hpp"
#include "reeblab/profile_model.hpp"
#include "reeblab/reeb_dynamics.hpp"
#include "reeblab/spectral.hpp"

namespace reeblab {

// ---------------------------------------------------------------------------------------------
// Period bounds of the oval model

enum class DiamondBranch { Special, Vertical, Inside, Outside };

inline std::string to_string(DiamondBranch b) {
  switch (b) {
    case DiamondBranch::Special: return "special";
    case DiamondBranch::Vertical: return "vertical";
    case DiamondBranch::Inside: return "inside";
    case DiamondBranch::Outside: return "outside";
  }
  return "unknown";
}

/// Which lower bound of the proof covers a torus. Inside the diamond |x| + |y| <= 1/2 the bound
/// is T >= |q||g| > 1/4; outside it is T >= |f| + |g| > 1/2. The (0, +-1) tori are the special
/// short orbits and the (+-1, 0) tori are checked directly against T = 1.
struct DiamondRecord {
  double theta = 0;
  std::int64_t p = 0, q = 0;
  double period = 0;
  DiamondBranch branch = DiamondBranch::Outside;
  double bound = 0;
  bool bound_ok = false;
};

struct TorsionReport {
  double epsilon = 0;
  int qmax = 0;
  bool applicable = false;
  std::string reason;  // why the lemma does not apply, if it does not
  std::size_t torus_count = 0;
  bool morse_bott_ok = false;
  bool special_field_ok = false;
  std::array<double, 2> special_periods{0, 0};
  double min_other_period = std::numeric_limits<double>::infinity();
  InvariantTorus witness;  // torus attaining min_other_period
  std::vector<DiamondRecord> diamond_case_log;
  bool case_bounds_ok = false;

  bool pass() const {
    return applicable && morse_bott_ok && special_field_ok && std::abs(special_periods[0] - epsilon) < 1e-9 &&
           std::abs(special_periods[1] - epsilon) < 1e-9 && min_other_period > 0.25;
  }
};

inline constexpr double kSpecialTol = 1e-9;

inline TorsionReport verify_torsion_lemma(const ProfileCurve& curve, int qmax) {
  if (qmax < 2) throw Error("torsion check needs qmax >= 2");
  TorsionReport r;
  r.epsilon = curve.epsilon();
  r.qmax = qmax;
  const double h14 = curve.jet(0.25).radius, h34 = curve.jet(0.75).radius;
  if (!curve.symmetric()) {
    r.reason = "curve is not symmetric about both axes";
    return r;
  }
  if (!(r.epsilon > 0) || std::abs(h14 - r.epsilon) > kSpecialTol || std::abs(h34 - r.epsilon) > kSpecialTol) {
    r.reason = "h(1/4) = " + std::to_string(h14) + " does not equal epsilon = " + std::to_string(r.epsilon);
    return r;
  }
  r.applicable = true;

  const ContactModel model = ContactModel::thickened(curve);
  const auto tori = rational_tori(model, qmax);
  r.torus_count = tori.size();
  r.morse_bott_ok = !tori.empty() && std::all_of(tori.begin(), tori.end(), [](const InvariantTorus& t) {
    return t.classification == TorusClass::MorseBott;
  });

  const Vec3 x14 = reeb_field(model, 0.25), x34 = reeb_field(model, 0.75);
  const double speed = 1.0 / r.epsilon;
  r.special_field_ok = std::abs(x14[0]) < kSpecialTol * speed && std::abs(x14[1] - speed) < kSpecialTol * speed &&
                       std::abs(x34[0]) < kSpecialTol * speed && std::abs(x34[1] + speed) < kSpecialTol * speed;

  bool found14 = false, found34 = false;
  r.case_bounds_ok = true;
  for (const auto& t : tori) {
    const CurveJet j = model.jet(t.theta);
    DiamondRecord d{t.theta, t.p, t.q, t.period, DiamondBranch::Outside, 0.0, false};
    if (t.p == 0) {
      d.branch = DiamondBranch::Special;
      d.bound = t.period;
      d.bound_ok = std::abs(t.period - r.epsilon) < kSpecialTol;
      if (t.q > 0) {
        r.special_periods[0] = t.period;
        found14 = true;
      } else {
        r.special_periods[1] = t.period;
        found34 = true;
      }
    } else {
      if (t.period < r.min_other_period) {
        r.min_other_period = t.period;
        r.witness = t;
      }
      if (t.q == 0) {
        d.branch = DiamondBranch::Vertical;
        d.bound = t.period;
        d.bound_ok = std::abs(t.period - 1.0) < kSpecialTol;
      } else if (std::abs(j.f) + std::abs(j.g) <= 0.5) {
        d.branch = DiamondBranch::Inside;
        d.bound = std::abs(static_cast<double>(t.q)) * std::abs(j.g);
        d.bound_ok = d.bound > 0.25 && t.period >= d.bound * (1 - 1e-12);
      } else {
        d.branch = DiamondBranch::Outside;
        d.bound = std::abs(j.f) + std::abs(j.g);
        d.bound_ok = d.bound > 0.5 && t.period >= d.bound * (1 - 1e-12);
      }
    }
    r.case_bounds_ok = r.case_bounds_ok && d.bound_ok;
    r.diamond_case_log.push_back(d);
  }
  if (!found14 || !found34) {
    r.special_field_ok = false;
    r.case_bounds_ok = false;
  }
  return r;
}

// ---------------------------------------------------------------------------------------------
// Holomorphic cylinders

enum class End { Plus, Minus };

inline std::string to_string(End e) { return e == End::Plus ? "+inf" : "-inf"; }

struct CylinderOptions {
  double rho_mid = 0.5;
  double a0 = 0.0;
  double x0 = 0.0;
  int samples = 2048;
  /// s-interval; by default the solution runs until rho is within end_gap of 1/4 and 3/4.
  std::optional<std::pair<double, double>> s_range;
  double end_gap = 1e-9;
  /// Share of grid points placed by the error density in rho (the rest are uniform in s).
  double density_weight = 0.7;
  std::string beta_label = "1";
};

struct CylinderSolution {
  std::vector<double> s, alpha, rho;
  double a0 = 0, x0 = 0, rho_mid = 0.5;
  std::string beta_label;
  double cr_residual = std::numeric_limits<double>::quiet_NaN();
  double energy = std::numeric_limits<double>::quiet_NaN();
  double decay_plus = std::numeric_limits<double>::quiet_NaN();
  double decay_minus = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr double kCylinderRelTol = 1e-12;
inline constexpr double kCylinderAbsTol = 1e-15;

/// rho' of the reduced equation.
inline double cylinder_speed(const ContactModel& model, const BetaFn& beta, double rho) {
  const CurveJet j = model.jet(rho);
  return j.dg / (beta(rho) * j.D());
}

/// Exponential rate of |rho - theta_end| in |s| predicted by linearizing the reduced equation
/// at the end; negative.
inline double linearized_rate(const ContactModel& model, const BetaFn& beta, End end) {
  const double theta = end == End::Plus ? 0.25 : 0.75;
  const CurveJet j = model.jet(theta);
  const double nu = j.d2g / (beta(theta) * j.D());
  return end == End::Plus ? nu : -nu;
}

namespace detail {

using CylState = std::array<double, 2>;  // (alpha, rho)

/// Integrates the reduced equation from s = 0 in direction dir (+1 or -1) until |s| = target or,
/// without a target, until rho is within gap of the end torus. Returns (|s|, rho) at the stop.
inline std::pair<double, double> run_to_end(const ContactModel& model, const BetaFn& beta, double rho0, int dir,
                                            std::optional<double> target, double gap) {
  namespace odeint = boost::numeric::odeint;
  const double end = dir > 0 ? 0.25 : 0.75;
  auto rhs = [&](const CylState& z, CylState& dz, double) {
    dz[0] = dir * model.jet(z[1]).g;
    dz[1] = dir * cylinder_speed(model, beta, z[1]);
  };
  auto stepper = odeint::make_dense_output(kCylinderAbsTol, kCylinderRelTol, odeint::runge_kutta_dopri5<CylState>());
  stepper.initialize(CylState{0.0, rho0}, 0.0, 1e-3);
  CylState tmp;
  auto gap_at = [&](double r) {
    stepper.calc_state(r, tmp);
    return std::abs(tmp[1] - end) - gap;
  };
  if (target && *target == 0.0) return {0.0, rho0};
  if (!target && std::abs(rho0 - end) <= gap) return {0.0, rho0};
  for (int guard = 0; guard < 10'000'000; ++guard) {
    const auto [ra, rb] = stepper.do_step(rhs);
    const CylState& z = stepper.current_state();
    if (!std::isfinite(z[0]) || !std::isfinite(z[1])) throw IntegrationError("cylinder equation blew up");
    if (target && rb >= *target) {
      stepper.calc_state(*target, tmp);
      return {*target, tmp[1]};
    }
    if (!target && std::abs(z[1] - end) <= gap) {
      std::uintmax_t iters = 200;
      const auto root = boost::math::tools::toms748_solve(gap_at, ra, rb, gap_at(ra), gap_at(rb),
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
      const double r = 0.5 * (root.first + root.second);
      stepper.calc_state(r, tmp);
      return {r, tmp[1]};
    }
    if (rb > 1e6) throw IntegrationError("cylinder end not reached");
  }
  throw IntegrationError("cylinder integration did not terminate");
}

inline constexpr int kDensityTable = 8192;

/// Grid density in theta for the cylinder samples. Fourth order differences along the solution
/// err by about h^4 |u^(5)|, and u^(5) ~ G^(4)(rho) rho'^4 where G(rho) = rho' (and g^(4) for
/// alpha), so equal error per cell wants |G^(4)|^(1/4) + |g^(4)|^(1/4) points per unit rho. The
/// table is smoothed, linearly interpolated and integrated exactly.
class GridDensity {
 public:
  GridDensity(const ContactModel& model, const BetaFn& beta, double lo, double hi) : lo_(lo), hi_(hi) {
    const int n = kDensityTable;
    h_ = (hi - lo) / (n - 1);
    if (!(h_ > 0)) throw Error("empty density interval");
    std::vector<double> speed(static_cast<std::size_t>(n + 4)), g(static_cast<std::size_t>(n + 4));
    for (int i = 0; i < n + 4; ++i) {
      const double th = lo + (i - 2) * h_;
      const CurveJet j = model.jet(th);
      speed[static_cast<std::size_t>(i)] = j.dg / (beta(th) * j.D());
      g[static_cast<std::size_t>(i)] = j.g;
    }
    auto d4 = [&](const std::vector<double>& y, int i) {
      const auto k = static_cast<std::size_t>(i + 2);
      return (y[k - 2] - 4 * y[k - 1] + 6 * y[k] - 4 * y[k + 1] + y[k + 2]) / (h_ * h_ * h_ * h_);
    };
    std::vector<double> raw(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      raw[static_cast<std::size_t>(i)] = std::pow(std::abs(d4(speed, i)), 0.25) + std::pow(std::abs(d4(g, i)), 0.25);
    // Running maximum, then a running mean, keeps the density and hence the spacing smooth.
    constexpr int kWidth = 8;
    std::vector<double> mx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double v = 0;
      for (int k = std::max(0, i - kWidth); k <= std::min(n - 1, i + kWidth); ++k)
        v = std::max(v, raw[static_cast<std::size_t>(k)]);
      mx[static_cast<std::size_t>(i)] = v;
    }
    m_.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      double acc = 0;
      int cnt = 0;
      for (int k = std::max(0, i - kWidth); k <= std::min(n - 1, i + kWidth); ++k, ++cnt)
        acc += mx[static_cast<std::size_t>(k)];
      m_[static_cast<std::size_t>(i)] = acc / cnt + 1.0;
    }
    cum_.assign(static_cast<std::size_t>(n), 0.0);
    for (std::size_t i = 1; i < m_.size(); ++i) cum_[i] = cum_[i - 1] + 0.5 * h_ * (m_[i - 1] + m_[i]);
  }

  double operator()(double th) const {
    const auto [i, u] = locate(th);
    return (1 - u) * m_[i] + u * m_[i + 1];
  }
  /// Integral of the density from lo to th.
  double cumulative(double th) const {
    const auto [i, u] = locate(th);
    const double x = u * h_;
    return cum_[i] + m_[i] * x + 0.5 * (m_[i + 1] - m_[i]) / h_ * x * x;
  }
  double total() const { return cum_.back(); }

 private:
  std::pair<std::size_t, double> locate(double th) const {
    const double r = std::clamp((th - lo_) / h_, 0.0, static_cast<double>(m_.size() - 1));
    auto i = static_cast<std::size_t>(r);
    if (i >= m_.size() - 1) i = m_.size() - 2;
    return {i, r - static_cast<double>(i)};
  }

  double lo_, hi_, h_;
  std::vector<double> m_, cum_;
};

/// Weights of the first derivative at x0 from values at the nodes x (Fornberg's recursion).
inline std::vector<double> first_derivative_weights(const double* x, int m, double x0) {
  std::vector<std::array<double, 2>> c(static_cast<std::size_t>(m), {0.0, 0.0});
  double c1 = 1.0, c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < m; ++i) {
    const int mn = std::min(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[static_cast<std::size_t>(i)][k] = c1 * (k * c[static_cast<std::size_t>(i - 1)][k - 1] -
                                                   c5 * c[static_cast<std::size_t>(i - 1)][k]) / c2;
        c[static_cast<std::size_t>(i)][0] = -c1 * c5 * c[static_cast<std::size_t>(i - 1)][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[static_cast<std::size_t>(j)][k] = (c4 * c[static_cast<std::size_t>(j)][k] - k * c[static_cast<std::size_t>(j)][k - 1]) / c3;
      c[static_cast<std::size_t>(j)][0] = c4 * c[static_cast<std::size_t>(j)][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) w[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)][1];
  return w;
}

/// Fourth order derivative of samples y on the (possibly nonuniform) grid s, using the five
/// nearest nodes.
inline std::vector<double> derivative(const std::vector<double>& s, const std::vector<double>& y) {
  const int n = static_cast<int>(s.size());
  std::vector<double> d(static_cast<std::size_t>(n), 0.0);
  if (n < 5) throw Error("derivative needs at least 5 samples");
  for (int i = 0; i < n; ++i) {
    const int lo = std::clamp(i - 2, 0, n - 5);
    const auto w = first_derivative_weights(s.data() + lo, 5, s[static_cast<std::size_t>(i)]);
    double acc = 0.0;
    for (int k = 0; k < 5; ++k) acc += w[static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(lo + k)];
    d[static_cast<std::size_t>(i)] = acc;
  }
  return d;
}

}  // namespace detail

/// Almost complex structure on R x T^2 x [0,1] in coordinates (a, x, y, theta) at theta, with
/// J d_a = X, J d_theta = beta V.
inline Eigen::Matrix4d almost_complex_structure(const ContactModel& model, const BetaFn& beta, double theta) {
  const CurveJet j = model.jet(theta);
  const double d = j.D(), b = beta(theta);
  Eigen::Matrix4d basis;  // columns d_a, X, d_theta, V
  basis << 1, 0, 0, 0,
           0, j.dg / d, 0, -j.g,
           0, -j.df / d, 0, j.f,
           0, 0, 1, 0;
  Eigen::Matrix4d jb;
  jb << 0, -1, 0, 0,
        1, 0, 0, 0,
        0, 0, 0, -1.0 / b,
        0, 0, b, 0;
  return basis * jb * basis.inverse();
}

inline double cr_residual(const CylinderSolution& sol, const ContactModel& model, const BetaFn& beta,
                          int t_samples = 8);
inline double dlambda_energy(const CylinderSolution& sol, const ContactModel& model, double delta = 1e-4);
inline double decay_rate(const CylinderSolution& sol, End end);

/// Solves the reduced Cauchy-Riemann equation with rho(0) = rho_mid, alpha(0) = 0, sampled on a grid
/// that is uniform in a mix of rho and s so that both the fast crossing in the middle and the
/// exponential ends are resolved. Diagnostics are filled in where they apply.
inline CylinderSolution cylinder_ode(const ContactModel& model, const BetaFn& beta, const CylinderOptions& opt = {}) {
  namespace odeint = boost::numeric::odeint;
  if (!(opt.rho_mid > 0.25 && opt.rho_mid < 0.75)) throw Error("rho_mid must lie in (1/4, 3/4)");
  if (opt.samples < 5) throw Error("cylinder needs at least 5 samples");
  if (!(opt.density_weight >= 0.0 && opt.density_weight < 1.0)) throw Error("density_weight must lie in [0, 1)");
  if (!(cylinder_speed(model, beta, opt.rho_mid) < 0))
    throw Error("rho' must be negative on (1/4, 3/4); the model is not an oval-type model");

  CylinderSolution sol;
  sol.a0 = opt.a0;
  sol.x0 = opt.x0;
  sol.rho_mid = opt.rho_mid;
  sol.beta_label = opt.beta_label;

  std::optional<double> hi_target, lo_target;
  if (opt.s_range) {
    if (!(opt.s_range->first <= 0.0 && opt.s_range->second >= 0.0))
      throw Error("s_range must contain 0, where rho = rho_mid");
    lo_target = -opt.s_range->first;
    hi_target = opt.s_range->second;
  }
  const auto [s_hi, rho_hi] = detail::run_to_end(model, beta, opt.rho_mid, +1, hi_target, opt.end_gap);
  const auto [s_lo_abs, rho_lo] = detail::run_to_end(model, beta, opt.rho_mid, -1, lo_target, opt.end_gap);
  const double s_lo = -s_lo_abs;
  const double length = s_hi - s_lo;
  if (length == 0.0) {
    sol.s = {0.0};
    sol.alpha = {0.0};
    sol.rho = {opt.rho_mid};
    sol.cr_residual = 0.0;
    return sol;
  }

  // Grid variable phi(s) = wd P(rho(s)) + ws s / L. P is the normalized integral of the error density
  // from rho_mid down to rho, so both terms increase with s.
  const double wd = rho_lo > rho_hi ? opt.density_weight : 0.0, ws = 1.0 - wd;
  const detail::GridDensity density(model, beta, rho_hi, rho_lo);
  const double p_mid = density.cumulative(opt.rho_mid);
  const double kd = wd / density.total(), ks = ws / length;
  auto phi_of = [&](double s, double rho) { return kd * (p_mid - density.cumulative(rho)) + ks * s; };
  const double phi_lo = phi_of(s_lo, rho_lo), phi_hi = phi_of(s_hi, rho_hi);
  const int n = opt.samples;
  std::vector<double> phis(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) phis[static_cast<std::size_t>(i)] = phi_lo + (phi_hi - phi_lo) * i / (n - 1);
  phis.front() = phi_lo;
  phis.back() = phi_hi;

  using State = std::array<double, 3>;  // (s, alpha, rho) as functions of phi
  auto make_rhs = [&](int dir) {
    return [&, dir](const State& z, State& dz, double) {
      const CurveJet j = model.jet(z[2]);
      const double rp = j.dg / (beta(z[2]) * j.D());
      const double m = -kd * density(z[2]) * rp + ks;
      dz[0] = dir / m;
      dz[1] = dir * j.g / m;
      dz[2] = dir * rp / m;
    };
  };
  sol.s.assign(static_cast<std::size_t>(n), 0.0);
  sol.alpha.assign(static_cast<std::size_t>(n), 0.0);
  sol.rho.assign(static_cast<std::size_t>(n), 0.0);
  const auto split = static_cast<std::size_t>(std::upper_bound(phis.begin(), phis.end(), 0.0) - phis.begin());
  try {
    // forward: phi >= 0
    if (split < phis.size()) {
      std::vector<double> times{0.0};
      times.insert(times.end(), phis.begin() + static_cast<std::ptrdiff_t>(split), phis.end());
      State z{0.0, 0.0, opt.rho_mid};
      std::size_t k = split;
      bool first = true;
      odeint::integrate_times(odeint::make_dense_output(kCylinderAbsTol, kCylinderRelTol, odeint::runge_kutta_dopri5<State>()),
                              make_rhs(+1), z, times.begin(), times.end(), 1e-4, [&](const State& x, double) {
                                if (first) {
                                  first = false;
                                  return;
                                }
                                sol.s[k] = x[0];
                                sol.alpha[k] = x[1];
                                sol.rho[k] = x[2];
                                ++k;
                              });
    }
    // backward: phi < 0, integrated in -phi
    if (split > 0) {
      std::vector<double> times{0.0};
      for (std::size_t i = split; i-- > 0;) times.push_back(-phis[i]);
      State z{0.0, 0.0, opt.rho_mid};
      std::size_t k = split;
      bool first = true;
      odeint::integrate_times(odeint::make_dense_output(kCylinderAbsTol, kCylinderRelTol, odeint::runge_kutta_dopri5<State>()),
                              make_rhs(-1), z, times.begin(), times.end(), 1e-4, [&](const State& x, double) {
                                if (first) {
                                  first = false;
                                  return;
                                }
                                --k;
                                sol.s[k] = x[0];
                                sol.alpha[k] = x[1];
                                sol.rho[k] = x[2];
                              });
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw IntegrationError(std::string("cylinder integration failed: ") + e.what());
  }
  for (std::size_t i = 0; i < sol.s.size(); ++i) {
    if (!std::isfinite(sol.s[i]) || !std::isfinite(sol.alpha[i]) || !std::isfinite(sol.rho[i]))
      throw IntegrationError("cylinder solution is not finite");
    if (i > 0 && !(sol.rho[i] < sol.rho[i - 1] && sol.s[i] > sol.s[i - 1]))
      throw IntegrationError("rho is not strictly decreasing along the cylinder");
  }

  if (n >= 5) {
    sol.cr_residual = cr_residual(sol, model, beta);
    constexpr double kDelta = 1e-4;
    if (sol.rho.front() > 0.75 - kDelta && sol.rho.back() < 0.25 + kDelta) sol.energy = dlambda_energy(sol, model, kDelta);
    try {
      sol.decay_plus = decay_rate(sol, End::Plus);
    } catch (const FitFailureError&) {
    }
    try {
      sol.decay_minus = decay_rate(sol, End::Minus);
    } catch (const FitFailureError&) {
    }
  }
  return sol;
}

/// sup over the (s, t) grid of |d_s u + J(u) d_t u| for u = (alpha + a0, x0, t, rho), with d_s u
/// from fourth order differences of the samples and J from almost_complex_structure.
inline double cr_residual(const CylinderSolution& sol, const ContactModel& model, const BetaFn& beta, int t_samples) {
  const std::size_t n = sol.s.size();
  if (n < 2 || sol.s.back() == sol.s.front()) return 0.0;
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = sol.alpha[i] + sol.a0;
  const auto da = detail::derivative(sol.s, a);
  const auto dr = detail::derivative(sol.s, sol.rho);
  double sup = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Matrix4d j = almost_complex_structure(model, beta, sol.rho[i]);
    for (int k = 0; k < t_samples; ++k) {
      // u_t = d_y at every t; J does not depend on (x, y, t) for this family.
      const Eigen::Vector4d ds(da[i], 0.0, 0.0, dr[i]);
      const Eigen::Vector4d dt(0.0, 0.0, 1.0, 0.0);
      sup = std::max(sup, (ds + j * dt).norm());
    }
  }
  return sup;
}

namespace detail {

/// Integral of u* dlambda over the part of the cylinder where rho lies in [1/4 + delta, 3/4 - delta],
/// with rho(s) interpolated by cubic Hermite cells and 7-point Gauss-Legendre on each cell.
inline double dlambda_truncated(const CylinderSolution& sol, const ContactModel& model, double delta) {
  const std::size_t n = sol.s.size();
  if (n < 5) throw Error("energy needs at least 5 samples");
  const double top = 0.75 - delta, bottom = 0.25 + delta;
  if (!(sol.rho.front() >= top && sol.rho.back() <= bottom))
    throw Error("solution does not span the truncation window");
  const auto da = derivative(sol.s, sol.alpha);
  const auto dr = derivative(sol.s, sol.rho);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double s0 = sol.s[i], s1 = sol.s[i + 1], h = s1 - s0;
    auto herm = [&](const std::vector<double>& y, const std::vector<double>& dy, double s) {
      const double u = (s - s0) / h;
      const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
      const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
      const double d00 = 6 * u * u - 6 * u, d10 = 3 * u * u - 4 * u + 1, d01 = -6 * u * u + 6 * u, d11 = 3 * u * u - 2 * u;
      return std::pair<double, double>{h00 * y[i] + h10 * h * dy[i] + h01 * y[i + 1] + h11 * h * dy[i + 1],
                                       (d00 * y[i] + d01 * y[i + 1]) / h + d10 * dy[i] + d11 * dy[i + 1]};
    };
    if (sol.rho[i + 1] >= top || sol.rho[i] <= bottom) continue;
    // Clip the cell to the window; rho is decreasing.
    auto cross = [&](double level) {
      auto fn = [&](double s) { return herm(sol.rho, dr, s).first - level; };
      std::uintmax_t iters = 200;
      const auto r = boost::math::tools::toms748_solve(fn, s0, s1, boost::math::tools::eps_tolerance<double>(50), iters);
      return 0.5 * (r.first + r.second);
    };
    const double a = sol.rho[i] > top ? cross(top) : s0;
    const double b = sol.rho[i + 1] < bottom ? cross(bottom) : s1;
    auto integrand = [&](double s) {
      const auto [rho, rho_s] = herm(sol.rho, dr, s);
      const double alpha_s = herm(sol.alpha, da, s).second;
      const CurveJet j = model.jet(rho);
      // dlambda = f' dtheta^dx + g' dtheta^dy evaluated on (u_s, u_t), u_s = (alpha_s, 0, 0, rho_s), u_t = d_y.
      const Eigen::Vector4d us(alpha_s, 0.0, 0.0, rho_s), ut(0.0, 0.0, 1.0, 0.0);
      return j.df * (us[3] * ut[1] - us[1] * ut[3]) + j.dg * (us[3] * ut[2] - us[2] * ut[3]);
    };
    total += boost::math::quadrature::gauss<double, 7>::integrate(integrand, a, b);
  }
  return total;
}

}  // namespace detail

/// Energy of the cylinder: the dlambda integral truncated at rho in [1/4 + delta, 3/4 - delta] and
/// extrapolated to delta -> 0 (the truncation error is quadratic in delta since g' vanishes at the
/// ends).
inline double dlambda_energy(const CylinderSolution& sol, const ContactModel& model, double delta) {
  if (!(delta > 0 && delta < 0.25)) throw Error("truncation delta must lie in (0, 1/4)");
  const double e1 = detail::dlambda_truncated(sol, model, delta);
  const double e2 = detail::dlambda_truncated(sol, model, delta / 2);
  return (4.0 * e2 - e1) / 3.0;
}

/// Truncated energy without extrapolation.
inline double dlambda_energy_truncated(const CylinderSolution& sol, const ContactModel& model, double delta) {
  return detail::dlambda_truncated(sol, model, delta);
}

inline constexpr double kFitLow = 1e-8;
inline constexpr double kFitHigh = 1e-4;
inline constexpr double kFitTolerance = 0.1;

/// Exponential rate of |rho - theta_end| against |s| near the given end, from a least squares fit
/// of the log over the samples with |rho - theta_end| in [1e-8, 1e-4]. Negative for a solution
/// that converges.
inline double decay_rate(const CylinderSolution& sol, End end) {
  const double theta_end = end == End::Plus ? 0.25 : 0.75;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < sol.s.size(); ++i) {
    const double dev = std::abs(sol.rho[i] - theta_end);
    const bool side = end == End::Plus ? sol.s[i] > 0 : sol.s[i] < 0;
    if (side && dev >= kFitLow && dev <= kFitHigh) {
      xs.push_back(std::abs(sol.s[i]));
      ys.push_back(std::log(dev));
    }
  }
  if (xs.size() < 3) throw FitFailureError("too few samples in the fit window at the " + to_string(end) + " end");
  const auto m = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd a(m, 2);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, 0) = xs[static_cast<std::size_t>(i)];
    a(i, 1) = 1.0;
    b(i) = ys[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
  const double worst = ((a * coef - b).array().exp() - 1.0).abs().maxCoeff();
  if (worst > kFitTolerance)
    throw FitFailureError("log-linear fit deviates by " + std::to_string(worst) + " at the " + to_string(end) + " end");
  return coef(0);
}

}  // namespace reeblab
