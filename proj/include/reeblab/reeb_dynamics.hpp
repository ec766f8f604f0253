#pragma once

// Reeb flow of lambda = f dx + g dy on T^2 x [0,1]: invariant tori, closed-orbit classes and
// periods, direct integration, linearized return maps and Morse-Bott classification.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "reeblab/errors.hpp"
#include "reeblab/profile_model.hpp"

namespace reeblab {

using Vec3 = std::array<double, 3>;
using Mat2 = Eigen::Matrix2d;

inline Vec3 reeb_field(const CurveJet& j) {
  const double d = j.D();
  return {j.dg / d, -j.df / d, 0.0};
}

/// X = (g' d_x - f' d_y) / D. Satisfies lambda(X) = 1 and i_X dlambda = 0.
inline Vec3 reeb_field(const ContactModel& model, double theta) { return reeb_field(model.jet(theta)); }

/// theta-derivative of the (x, y) components of the Reeb field.
inline std::array<double, 2> reeb_field_derivative(const CurveJet& j) {
  const double d = j.D(), dd = j.dD();
  return {(j.d2g * d - j.dg * dd) / (d * d), (-j.d2f * d + j.df * dd) / (d * d)};
}

/// Rate at which the Reeb direction turns: dX/dtheta = shear_rate * V with V = -g d_x + f d_y.
/// Equals (f' g'' - f'' g') / D^2.
inline double shear_rate(const CurveJet& j) {
  const double d = j.D();
  return j.convexity() / (d * d);
}

enum class TorusClass { MorseBott, Nondegenerate, Degenerate, Irrational };

inline std::string to_string(TorusClass c) {
  switch (c) {
    case TorusClass::MorseBott: return "MorseBott";
    case TorusClass::Nondegenerate: return "Nondegenerate";
    case TorusClass::Degenerate: return "Degenerate";
    case TorusClass::Irrational: return "Irrational";
  }
  return "unknown";
}

/// The torus N(theta0) with the homology class (p, q) of its closed orbits. Signs follow
/// the direction of the Reeb field: sign(p) = sign(dx(X)), sign(q) = sign(dy(X)).
struct InvariantTorus {
  double theta = 0;
  bool rational = true;
  std::int64_t p = 0, q = 0;
  double period = 0;
  /// -g'/f'; +-inf when f' = 0.
  double slope = 0;
  TorusClass classification = TorusClass::Irrational;
};

/// Angle of the Reeb direction (g', -f'), i.e. arg(gamma') - pi/2.
inline double reeb_angle(const CurveJet& j) { return std::atan2(-j.df, j.dg); }

inline constexpr double kPeriodAgreementTol = 1e-9;

inline TorusClass classify(const ContactModel& model, const InvariantTorus& torus);

/// T = p f + q g; under both-axes symmetry it must also equal |p||f| + |q||g|.
inline double period(const ContactModel& model, const InvariantTorus& torus) {
  if (!torus.rational) throw Error("period of an irrational torus is undefined");
  const CurveJet j = model.jet(torus.theta);
  const double p = static_cast<double>(torus.p), q = static_cast<double>(torus.q);
  const double t = p * j.f + q * j.g;
  if (model.curve().symmetric()) {
    const double unsigned_t = std::abs(p) * std::abs(j.f) + std::abs(q) * std::abs(j.g);
    if (std::abs(t - unsigned_t) > kPeriodAgreementTol * std::max(1.0, std::abs(t)))
      throw SignConventionError("signed and unsigned period formulas disagree at theta = " +
                                std::to_string(torus.theta));
  }
  if (!(t > 0)) throw SignConventionError("non-positive period: homology class orientation is inconsistent");
  return t;
}

/// Torus at theta with the class read off from the slope of the Reeb field, when that slope is
/// a fraction with denominator and numerator at most qmax (to within tol).
inline InvariantTorus torus_at(const ContactModel& model, double theta, int qmax = 50, double tol = 1e-9) {
  const CurveJet j = model.jet(theta);
  InvariantTorus t;
  t.theta = theta - std::floor(theta);
  t.slope = j.df == 0 ? std::copysign(std::numeric_limits<double>::infinity(), -j.dg) : -j.dg / j.df;
  const Vec3 x = reeb_field(j);
  const double big = std::max(std::abs(x[0]), std::abs(x[1]));
  t.rational = false;
  for (int m = 1; m <= qmax && !t.rational; ++m) {
    // Scale X so that its larger component is m and test for a primitive integer vector.
    const double px = x[0] * m / big, qx = x[1] * m / big;
    const double pr = std::round(px), qr = std::round(qx);
    if (std::abs(px - pr) < tol * m && std::abs(qx - qr) < tol * m &&
        std::gcd(static_cast<std::int64_t>(std::abs(pr)), static_cast<std::int64_t>(std::abs(qr))) == 1) {
      t.p = static_cast<std::int64_t>(pr);
      t.q = static_cast<std::int64_t>(qr);
      t.rational = true;
    }
  }
  if (t.rational) {
    t.period = period(model, t);
    t.classification = classify(model, t);
  } else {
    t.classification = TorusClass::Irrational;
  }
  return t;
}

inline constexpr double kMonotoneStepTol = 1e-13;

/// All tori whose closed orbits have a primitive class (p, q) with max(|p|, |q|) <= qmax,
/// sorted by theta in [0, 1), with periods but not yet classified. Requires the Reeb direction
/// to turn strictly monotonically.
inline std::vector<InvariantTorus> find_rational_tori(const ContactModel& model, int qmax) {
  if (qmax < 1) throw Error("qmax must be positive");
  const int grid = model.curve().grid_size();
  std::vector<double> chi(grid + 1);
  chi[0] = reeb_angle(model.jet(0.0));
  for (int i = 1; i <= grid; ++i) {
    const double a = reeb_angle(model.jet(static_cast<double>(i) / grid));
    const double step = std::remainder(a - chi[i - 1], kTwoPi);
    if (!(step > kMonotoneStepTol)) throw NonconvexModelError("Reeb direction is not strictly monotone in theta");
    chi[i] = chi[i - 1] + step;
  }
  const double turns_real = (chi[grid] - chi[0]) / kTwoPi;
  const int turns = static_cast<int>(std::lround(turns_real));
  if (turns < 1 || std::abs(turns_real - turns) > 1e-6)
    throw NonconvexModelError("Reeb direction does not close up after a whole number of turns");

  auto local_angle = [&](double theta, double ref) {
    const double a = reeb_angle(model.jet(theta));
    return ref + std::remainder(a - ref, kTwoPi);
  };

  std::vector<InvariantTorus> out;
  for (int p = -qmax; p <= qmax; ++p) {
    for (int q = -qmax; q <= qmax; ++q) {
      if (std::gcd(std::abs(p), std::abs(q)) != 1) continue;
      const double base = std::atan2(static_cast<double>(q), static_cast<double>(p));
      // targets base + 2 pi k inside [chi0, chi0 + 2 pi turns)
      double first = base + kTwoPi * std::ceil((chi[0] - base) / kTwoPi);
      for (int k = 0; k < turns; ++k) {
        const double target = first + kTwoPi * k;
        const auto it = std::upper_bound(chi.begin(), chi.end(), target);
        if (it == chi.begin() || it == chi.end()) continue;
        const auto i = static_cast<std::size_t>(std::distance(chi.begin(), it) - 1);
        const double lo = static_cast<double>(i) / grid, hi = static_cast<double>(i + 1) / grid;
        double theta = lo;
        if (chi[i] != target) {
          auto fn = [&](double th) { return local_angle(th, chi[i]) - target; };
          double flo = chi[i] - target, fhi = chi[i + 1] - target;
          std::uintmax_t iters = 100;
          const auto r = boost::math::tools::toms748_solve(fn, lo, hi, flo, fhi,
                                                           boost::math::tools::eps_tolerance<double>(52), iters);
          theta = 0.5 * (r.first + r.second);
        }
        InvariantTorus t;
        t.theta = theta;
        t.p = p;
        t.q = q;
        const CurveJet j = model.jet(theta);
        t.slope = j.df == 0 ? std::copysign(std::numeric_limits<double>::infinity(), -j.dg) : -j.dg / j.df;
        t.period = period(model, t);
        t.classification = TorusClass::Degenerate;  // placeholder until classified
        out.push_back(t);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const InvariantTorus& a, const InvariantTorus& b) { return a.theta < b.theta; });
  return out;
}

// ---------------------------------------------------------------------------------------------
// Direct integration

struct Trajectory {
  std::vector<double> time;
  std::vector<Vec3> state;  // lifted coordinates (x, y not reduced mod 1)
  bool closed = false;
  double period = 0;
  std::array<std::int64_t, 2> winding{0, 0};
  double closure_distance = 0;
  double theta_drift = 0;
};

inline constexpr double kClosureTol = 1e-7;
inline constexpr double kFlowRelTol = 1e-10;
inline constexpr double kFlowAbsTol = 1e-12;

namespace detail {

struct ReebSystem {
  const ContactModel* model;
  void operator()(const Vec3& z, Vec3& dz, double /*t*/) const { dz = reeb_field(*model, z[2]); }
};

}  // namespace detail

/// Integrates the Reeb flow from start and stops at the first return to the start point
/// (within tol in the flat metric on T^2 and in theta), or at the horizon.
inline Trajectory integrate_orbit(const ContactModel& model, Vec3 start, double horizon, double tol = kClosureTol) {
  namespace odeint = boost::numeric::odeint;
  if (!(horizon > 0)) throw Error("horizon must be positive");
  Trajectory tr;
  detail::ReebSystem sys{&model};
  const Vec3 v0 = reeb_field(model, start[2]);
  const double speed = std::max({std::abs(v0[0]), std::abs(v0[1]), 1e-12});
  const double max_dt = 0.45 / speed;

  auto stepper = odeint::make_dense_output(kFlowAbsTol, kFlowRelTol, max_dt, odeint::runge_kutta_dopri5<Vec3>());
  stepper.initialize(start, 0.0, std::min(max_dt, horizon) * 0.1);
  tr.time.push_back(0.0);
  tr.state.push_back(start);

  Vec3 tmp;
  auto displacement = [&](double t) {
    stepper.calc_state(t, tmp);
    return tmp;
  };

  std::size_t guard = 0;
  while (stepper.current_time() < horizon) {
    if (++guard > 50'000'000) throw IntegrationError("orbit integration did not reach the horizon");
    const auto [ta, tb] = stepper.do_step(sys);
    const Vec3 za = tr.state.back();
    const Vec3 zb = stepper.current_state();
    const double dax = za[0] - start[0], day = za[1] - start[1];
    const double dbx = zb[0] - start[0], dby = zb[1] - start[1];

    double best_t = std::numeric_limits<double>::infinity();
    std::array<std::int64_t, 2> best_k{0, 0};
    double best_dist = 0;
    const auto kx0 = static_cast<std::int64_t>(std::floor(std::min(dax, dbx) - tol));
    const auto kx1 = static_cast<std::int64_t>(std::ceil(std::max(dax, dbx) + tol));
    const auto ky0 = static_cast<std::int64_t>(std::floor(std::min(day, dby) - tol));
    const auto ky1 = static_cast<std::int64_t>(std::ceil(std::max(day, dby) + tol));
    for (auto kx = kx0; kx <= kx1; ++kx) {
      for (auto ky = ky0; ky <= ky1; ++ky) {
        if (kx == 0 && ky == 0) continue;
        // Closest approach to start + k: zero of (z(t) - start - k) . X.
        auto phi = [&](double t) {
          const Vec3 z = displacement(t);
          const Vec3 v = reeb_field(model, z[2]);
          return (z[0] - start[0] - kx) * v[0] + (z[1] - start[1] - ky) * v[1];
        };
        const double pa = phi(ta), pb = phi(tb);
        double tc;
        if (pa <= 0 && pb >= 0) {
          if (pa == 0) {
            tc = ta;
          } else if (pb == 0) {
            tc = tb;
          } else {
            std::uintmax_t iters = 200;
            const auto r = boost::math::tools::toms748_solve(phi, ta, tb, pa, pb,
                                                             boost::math::tools::eps_tolerance<double>(50), iters);
            tc = 0.5 * (r.first + r.second);
          }
        } else {
          continue;
        }
        const Vec3 z = displacement(tc);
        const double dist = std::hypot(z[0] - start[0] - kx, z[1] - start[1] - ky);
        const double dth = std::abs(z[2] - start[2]);
        if (dist < tol && dth < tol && tc < best_t && tc > 0) {
          best_t = tc;
          best_k = {kx, ky};
          best_dist = dist;
        }
      }
    }
    tr.time.push_back(tb);
    tr.state.push_back(zb);
    tr.theta_drift = std::max(tr.theta_drift, std::abs(zb[2] - start[2]));
    if (std::isfinite(best_t)) {
      tr.closed = true;
      tr.period = best_t;
      tr.winding = best_k;
      tr.closure_distance = best_dist;
      tr.time.back() = best_t;
      tr.state.back() = displacement(best_t);
      return tr;
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------------------------
// Linearized flow

/// Linearized Reeb flow over `time` on the torus N(theta), restricted to xi and written in the
/// frame (d_theta, V) with V = -g d_x + f d_y. Columns are the images of d_theta and V.
/// Integrated numerically together with the base orbit.
inline Mat2 linearized_flow(const ContactModel& model, double theta, double time) {
  namespace odeint = boost::numeric::odeint;
  if (time == 0.0) return Mat2::Identity();
  const CurveJet j0 = model.jet(theta);
  using State = std::array<double, 9>;
  // state: base point (x, y, theta), image of d_theta, image of V
  State s{0.0, 0.0, theta, 0.0, 0.0, 1.0, -j0.g, j0.f, 0.0};
  auto rhs = [&model](const State& z, State& dz, double) {
    const CurveJet j = model.jet(z[2]);
    const Vec3 x = reeb_field(j);
    const auto dx = reeb_field_derivative(j);
    dz[0] = x[0];
    dz[1] = x[1];
    dz[2] = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double dth = z[3 + 3 * c + 2];
      dz[3 + 3 * c + 0] = dx[0] * dth;
      dz[3 + 3 * c + 1] = dx[1] * dth;
      dz[3 + 3 * c + 2] = 0.0;
    }
  };
  try {
    odeint::integrate_adaptive(odeint::make_controlled(kFlowAbsTol, kFlowRelTol, odeint::runge_kutta_dopri5<State>()),
                               rhs, s, 0.0, time, time * 1e-3);
  } catch (const std::exception& e) {
    throw IntegrationError(std::string("linearized flow integration failed: ") + e.what());
  }
  for (double v : s)
    if (!std::isfinite(v)) throw IntegrationError("linearized flow produced non-finite values");

  // Decompose each image in the basis (d_theta, V, X).
  const CurveJet j = model.jet(s[2]);
  const Vec3 x = reeb_field(j);
  Eigen::Matrix3d basis;
  basis << 0.0, -j.g, x[0],
           0.0, j.f, x[1],
           1.0, 0.0, 0.0;
  const auto lu = basis.partialPivLu();
  Mat2 m;
  for (int c = 0; c < 2; ++c) {
    const Eigen::Vector3d img(s[3 + 3 * c], s[4 + 3 * c], s[5 + 3 * c]);
    const Eigen::Vector3d coeff = lu.solve(img);
    m(0, c) = coeff(0);
    m(1, c) = coeff(1);
  }
  return m;
}

/// Monodromy of the linearized flow over one period of the torus' closed orbits.
inline Mat2 linearized_return_map(const ContactModel& model, const InvariantTorus& torus) {
  if (!torus.rational) throw Error("return map needs a rational torus");
  return linearized_flow(model, torus.theta, period(model, torus));
}

inline constexpr double kDegeneracyTol = 1e-8;
inline constexpr double kShearTol = 1e-8;

/// Classification from a return map: nondegenerate iff 1 is not an eigenvalue; Morse-Bott iff
/// unipotent, not the identity, with the 1-eigenspace along V (tangent to the torus).
inline TorusClass classify_return_map(const Mat2& m) {
  const double det_minus_one = (m(0, 0) - 1.0) * (m(1, 1) - 1.0) - m(0, 1) * m(1, 0);
  if (std::abs(det_minus_one) > kDegeneracyTol) return TorusClass::Nondegenerate;
  const double shear = (m - Mat2::Identity()).cwiseAbs().maxCoeff();
  if (shear <= kShearTol) return TorusClass::Degenerate;
  const bool tangent_fixed = std::abs(m(0, 1)) <= kShearTol && std::abs(m(1, 1) - 1.0) <= kShearTol;
  return tangent_fixed ? TorusClass::MorseBott : TorusClass::Degenerate;
}

/// Classification of the k-fold cover (period k T).
inline TorusClass classify_cover(const ContactModel& model, const InvariantTorus& torus, int k) {
  if (!torus.rational) return TorusClass::Irrational;
  return classify_return_map(linearized_flow(model, torus.theta, k * period(model, torus)));
}

inline constexpr double kIndependenceTol = 1e-12;

/// Morse-Bott iff the return map is a nontrivial shear fixing V and gamma', gamma'' are
/// independent at theta; for Morse-Bott tori the double cover is checked to be Morse-Bott too.
inline TorusClass classify(const ContactModel& model, const InvariantTorus& torus) {
  if (!torus.rational) return TorusClass::Irrational;
  const Mat2 m = linearized_return_map(model, torus);
  TorusClass c = classify_return_map(m);
  if (c == TorusClass::MorseBott) {
    if (!(std::abs(model.jet(torus.theta).convexity()) > kIndependenceTol)) return TorusClass::Degenerate;
    if (classify_cover(model, torus, 2) != TorusClass::MorseBott)
      throw Error("Morse-Bott torus has a cover that is not Morse-Bott");
  }
  return c;
}

/// find_rational_tori with every torus classified.
inline std::vector<InvariantTorus> rational_tori(const ContactModel& model, int qmax) {
  auto tori = find_rational_tori(model, qmax);
  for (auto& t : tori) t.classification = classify(model, t);
  return tori;
}

}  // namespace reeblab
