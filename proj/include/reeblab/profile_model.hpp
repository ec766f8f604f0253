#pragma once

// Torus-invariant contact forms  lambda = f(theta) dx + g(theta) dy  on T^2 x [0,1],
// described by the closed profile curve gamma(theta) = (f, g).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "reeblab/errors.hpp"
#include "reeblab/spline.hpp"

namespace reeblab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Values of the profile curve and its first two theta-derivatives.
struct CurveJet {
  double f = 0, g = 0;
  double df = 0, dg = 0;
  double d2f = 0, d2g = 0;
  /// Signed radial function h when the curve is given in polar form, |gamma| otherwise.
  double radius = 0;

  /// Contact density f g' - f' g; the form is contact iff this is positive.
  double D() const { return f * dg - df * g; }
  /// d/dtheta of D.
  double dD() const { return f * d2g - d2f * g; }
  /// f' g'' - f'' g'; positive iff gamma' and gamma'' are independent and positively oriented.
  double convexity() const { return df * d2g - d2f * dg; }
};

enum class CurveKind { Oval, TightTorus, Radial, Sampled };

inline std::string to_string(CurveKind k) {
  switch (k) {
    case CurveKind::Oval: return "oval";
    case CurveKind::TightTorus: return "tight_torus";
    case CurveKind::Radial: return "radial";
    case CurveKind::Sampled: return "sampled";
  }
  return "unknown";
}

/// Shape of the smoothed oval. With s = |sin(2 pi theta)| the reciprocal radius is
///   1/h = 1 + (1/eps - 1) K(s),
/// where K vanishes for s <= s0, has K' = m * smoothstep((s - s0)/w) on [s0, s0+w] and is
/// affine beyond, normalized by K(1) = 1. The curve is strictly convex iff s0 + w/2 < eps;
/// `waist` is that ratio (s0 + w/2)/eps and must lie in (0, 1). At waist = 1 the top of the
/// oval becomes a straight segment.
struct OvalShape {
  double waist = 0.5;
};

class ProfileCurve {
 public:
  using RadialFn = std::function<std::array<double, 3>(double)>;  // (h, h', h'') at theta

  /// Oval with h = eps at theta = 1/4, 3/4 and h = 1 near theta = 0, 1/2. No validation;
  /// see make_oval for the checked constructor.
  static ProfileCurve oval(double eps, OvalShape shape = {}, int grid_size = kDefaultGrid) {
    ProfileCurve c;
    c.kind_ = CurveKind::Oval;
    c.epsilon_ = eps;
    c.waist_ = shape.waist;
    c.grid_size_ = grid_size;
    c.symmetric_ = true;
    c.radial_ = oval_radial(eps, shape.waist);
    return c;
  }

  /// gamma(theta) = (cos 2 pi n theta, sin 2 pi n theta).
  static ProfileCurve tight_torus(int n, int grid_size = kDefaultGrid) {
    if (n < 1) throw ConstructionError("tight torus needs n >= 1");
    ProfileCurve c;
    c.kind_ = CurveKind::TightTorus;
    c.n_ = n;
    c.grid_size_ = grid_size;
    c.symmetric_ = (n % 2) == 1;
    return c;
  }

  /// gamma = h(theta) e^{2 pi i theta} for a caller-provided closed-form h.
  static ProfileCurve radial(RadialFn h, std::string label, bool symmetric = false,
                             int grid_size = kDefaultGrid) {
    ProfileCurve c;
    c.kind_ = CurveKind::Radial;
    c.radial_ = std::move(h);
    c.label_ = std::move(label);
    c.symmetric_ = symmetric;
    c.grid_size_ = grid_size;
    return c;
  }

  /// gamma = h(theta) e^{2 pi i theta} with h interpolated from uniform samples h(i/n).
  static ProfileCurve sampled(std::vector<double> h_samples, int grid_size = kDefaultGrid,
                              std::optional<double> eps = std::nullopt) {
    ProfileCurve c;
    c.kind_ = CurveKind::Sampled;
    c.grid_size_ = grid_size;
    c.epsilon_ = eps.value_or(0.0);
    c.spline_ = std::make_shared<const PeriodicCubicSpline>(std::move(h_samples));
    return c;
  }

  /// All seven jet values at theta reduced mod 1.
  CurveJet jet(double theta) const {
    const double t = theta - std::floor(theta);
    switch (kind_) {
      case CurveKind::TightTorus: {
        const double w = kTwoPi * n_;
        const double c = std::cos(w * t), s = std::sin(w * t);
        return CurveJet{c, s, -w * s, w * c, -w * w * c, -w * w * s, 1.0};
      }
      case CurveKind::Sampled: return polar(t, spline_->eval(t));
      default: return polar(t, radial_(t));
    }
  }

  /// Left limit of the jet at theta = 1, evaluated without reducing mod 1.
  CurveJet jet_at_one() const {
    if (kind_ == CurveKind::Sampled)
      return polar(1.0, spline_->eval_segment(spline_->size() - 1, 1.0));
    if (kind_ == CurveKind::TightTorus) {
      const double w = kTwoPi * n_;
      const double c = std::cos(w), s = std::sin(w);
      return CurveJet{c, s, -w * s, w * c, -w * w * c, -w * w * s, 1.0};
    }
    return polar(1.0, radial_(1.0));
  }

  CurveKind kind() const { return kind_; }
  int n() const { return n_; }
  double epsilon() const { return epsilon_; }
  double waist() const { return waist_; }
  int grid_size() const { return grid_size_; }
  bool symmetric() const { return symmetric_; }
  const std::string& label() const { return label_; }
  /// Knot values of a sampled curve; empty for closed forms.
  std::vector<double> h_samples() const { return spline_ ? spline_->samples() : std::vector<double>{}; }

  static constexpr int kDefaultGrid = 4096;

 private:
  ProfileCurve() = default;

  static CurveJet polar(double t, const std::array<double, 3>& hj) {
    const auto [h, dh, d2h] = hj;
    const double phi = kTwoPi * t;
    const double c = std::cos(phi), s = std::sin(phi);
    const double w = kTwoPi;
    CurveJet j;
    j.radius = h;
    j.f = h * c;
    j.g = h * s;
    j.df = dh * c - w * h * s;
    j.dg = dh * s + w * h * c;
    j.d2f = d2h * c - 2.0 * w * dh * s - w * w * h * c;
    j.d2g = d2h * s + 2.0 * w * dh * c - w * w * h * s;
    return j;
  }

  static RadialFn oval_radial(double eps, double waist) {
    const double c = waist * eps;
    const double s0 = 2.0 * c / 3.0;
    const double w = s0;
    const double m = 1.0 / (1.0 - c);
    const double amp = 1.0 / eps - 1.0;
    return [=](double t) -> std::array<double, 3> {
      const double phi = kTwoPi * t;
      const double sn = std::sin(phi), cs = std::cos(phi);
      const double s = std::abs(sn);
      const double sg = sn < 0 ? -1.0 : 1.0;
      // K, K', K'' in s.
      double k0 = 0, k1 = 0, k2 = 0;
      if (s > s0 + w) {
        k0 = m * (s - s0 - 0.5 * w);
        k1 = m;
      } else if (s > s0) {
        // K' = m S(u) with the symmetric C^4 smoothstep S' = 630 u^4 (1-u)^4; symmetry keeps the
        // affine part of K anchored at s0 + w/2.
        const double u = (s - s0) / w;
        const double u2 = u * u, u4 = u2 * u2, v = 1.0 - u;
        k0 = m * w * u4 * u2 * (21.0 + u * (-60.0 + u * (67.5 + u * (-35.0 + 7.0 * u))));
        k1 = m * u4 * u * (126.0 + u * (-420.0 + u * (540.0 + u * (-315.0 + 70.0 * u))));
        k2 = m * 630.0 * u4 * v * v * v * v / w;
      }
      const double r = 1.0 + amp * k0;  // 1/h
      const double dr = amp * k1 * sg * kTwoPi * cs;
      const double d2r = amp * kTwoPi * kTwoPi * (k2 * cs * cs - k1 * s);
      const double h = 1.0 / r;
      const double dh = -dr / (r * r);
      const double d2h = -d2r / (r * r) + 2.0 * dr * dr / (r * r * r);
      return {h, dh, d2h};
    };
  }

  CurveKind kind_ = CurveKind::Radial;
  int n_ = 1;
  double epsilon_ = 0.0;
  double waist_ = 0.0;
  int grid_size_ = kDefaultGrid;
  bool symmetric_ = false;
  std::string label_;
  RadialFn radial_;
  std::shared_ptr<const PeriodicCubicSpline> spline_;
};

struct ValidationReport {
  bool contact_ok = false;
  bool positive_ok = false;
  bool periodic_ok = false;
  bool convex = false;
  bool symmetry_ok = true;
  double min_D = 0;
  double min_radius = 0;
  double min_convexity = 0;
  double periodicity_defect = 0;
  double symmetry_defect = 0;
  std::vector<std::string> failures;

  /// Passes iff the contact condition holds; the remaining fields are diagnostics.
  bool pass() const { return contact_ok && positive_ok && periodic_ok; }
};

inline constexpr double kPeriodicityTol = 1e-10;
inline constexpr double kContactMargin = 1e-12;
inline constexpr double kSymmetryTol = 1e-10;

inline CurveJet evaluate(const ProfileCurve& curve, double theta) { return curve.jet(theta); }

inline ValidationReport validate_contact(const ProfileCurve& curve) {
  ValidationReport r;
  const int n = curve.grid_size();
  r.min_D = r.min_radius = r.min_convexity = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    const CurveJet j = curve.jet(t);
    r.min_D = std::min(r.min_D, j.D());
    r.min_radius = std::min(r.min_radius, j.radius);
    r.min_convexity = std::min(r.min_convexity, j.convexity());
    if (curve.symmetric()) {
      const CurveJet m = curve.jet(-t);
      const CurveJet y = curve.jet(0.5 - t);
      const double d = std::max({std::abs(m.f - j.f), std::abs(m.g + j.g), std::abs(y.f + j.f),
                                 std::abs(y.g - j.g)});
      r.symmetry_defect = std::max(r.symmetry_defect, d);
    }
  }
  const CurveJet a = curve.jet(0.0), b = curve.jet_at_one();
  r.periodicity_defect = std::max({std::abs(a.f - b.f), std::abs(a.g - b.g), std::abs(a.df - b.df),
                                   std::abs(a.dg - b.dg), std::abs(a.d2f - b.d2f),
                                   std::abs(a.d2g - b.d2g)});

  r.positive_ok = r.min_radius > 0;
  r.contact_ok = r.min_D > kContactMargin;
  r.periodic_ok = r.periodicity_defect < kPeriodicityTol;
  r.convex = r.min_convexity > kContactMargin;
  r.symmetry_ok = r.symmetry_defect < kSymmetryTol;
  if (!r.positive_ok) r.failures.emplace_back("positivity: h <= 0 on the grid");
  if (!r.contact_ok) r.failures.emplace_back("contact: min D <= 0");
  if (!r.periodic_ok) r.failures.emplace_back("periodicity defect exceeds tolerance");
  return r;
}

/// Checked oval constructor: 0 < eps < 1/4 and the result must be contact and convex.
inline ProfileCurve make_oval(double eps, OvalShape shape = {}, int grid_size = ProfileCurve::kDefaultGrid) {
  if (!(eps > 0.0 && eps < 0.25)) throw ConstructionError("oval requires 0 < eps < 1/4");
  if (!(shape.waist > 0.0 && shape.waist < 1.0)) throw ConstructionError("oval waist must lie in (0, 1)");
  ProfileCurve c = ProfileCurve::oval(eps, shape, grid_size);
  const ValidationReport r = validate_contact(c);
  if (!r.pass() || !r.convex || !r.symmetry_ok) {
    std::ostringstream os;
    os << "oval(eps=" << eps << ", waist=" << shape.waist << ") invalid: min D = " << r.min_D
       << ", min convexity = " << r.min_convexity;
    throw ConstructionError(os.str());
  }
  return c;
}

enum class ModelKind { ThickenedTorus, TightTorus };

/// Contact form on T^2 x [0,1] determined by a profile curve.
class ContactModel {
 public:
  static ContactModel thickened(ProfileCurve curve) { return ContactModel(ModelKind::ThickenedTorus, std::move(curve)); }

  /// xi_n = ker(cos(2 pi n theta) dx + sin(2 pi n theta) dy); D is checked to equal 2 pi n.
  static ContactModel tight(int n) {
    ContactModel m(ModelKind::TightTorus, ProfileCurve::tight_torus(n));
    const int grid = m.curve_.grid_size();
    for (int i = 0; i < grid; ++i) {
      const double d = m.curve_.jet(static_cast<double>(i) / grid).D();
      if (std::abs(d - kTwoPi * n) > 1e-9 * n) throw ConstructionError("tight torus: D is not 2 pi n");
    }
    return m;
  }

  ModelKind kind() const { return kind_; }
  const ProfileCurve& curve() const { return curve_; }
  CurveJet jet(double theta) const { return curve_.jet(theta); }

 private:
  ContactModel(ModelKind k, ProfileCurve c) : kind_(k), curve_(std::move(c)) {}
  ModelKind kind_;
  ProfileCurve curve_;
};

}  // namespace reeblab
