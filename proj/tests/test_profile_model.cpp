#include <cmath>

#include <gtest/gtest.h>

#include "reeblab/profile_model.hpp"

using namespace reeblab;

namespace {

// D from the cross product of gamma and a fourth-order central difference of gamma.
double fd_D(const ProfileCurve& c, double t) {
  const double h = 1e-5;
  auto f = [&](double s) { return c.jet(s).f; };
  auto g = [&](double s) { return c.jet(s).g; };
  auto d = [&](auto&& y) { return (y(t - 2 * h) - 8 * y(t - h) + 8 * y(t + h) - y(t + 2 * h)) / (12 * h); };
  return f(t) * d(g) - d(f) * g(t);
}

}  // namespace

TEST(Oval, QuarterPointValues) {
  const ProfileCurve c = make_oval(0.1);
  const CurveJet j = c.jet(0.25);
  EXPECT_NEAR(j.g, 0.1, 1e-14);
  EXPECT_NEAR(j.dg, 0.0, 1e-12);
  EXPECT_NEAR(j.f, 0.0, 1e-15);
  EXPECT_NEAR(c.jet(0.75).radius, 0.1, 1e-14);
  EXPECT_NEAR(c.jet(0.5).radius, 1.0, 1e-14);
}

TEST(Oval, StartsAtOneZero) {
  const CurveJet j = make_oval(0.1).jet(0.0);
  EXPECT_DOUBLE_EQ(j.f, 1.0);
  EXPECT_DOUBLE_EQ(j.g, 0.0);
}

TEST(Oval, RadiusIsOneNearZeroAndHalf) {
  const ProfileCurve c = make_oval(0.1);
  for (double t : {-2e-4, 0.0, 2e-4, 0.4998, 0.5, 0.5002}) {
    EXPECT_DOUBLE_EQ(c.jet(t).radius, 1.0) << t;
  }
}

TEST(Oval, ConvexOnDefaultGrid) {
  const ProfileCurve c = make_oval(0.05);
  ASSERT_EQ(c.grid_size(), 4096);
  for (int i = 0; i < 4096; ++i) EXPECT_GT(c.jet(i / 4096.0).convexity(), 0.0) << i;
  EXPECT_TRUE(validate_contact(c).convex);
}

TEST(Oval, SymmetricAboutBothAxes) {
  const ProfileCurve c = make_oval(0.1);
  for (int i = 0; i < 1000; ++i) {
    const double t = i / 1000.0;
    const CurveJet j = c.jet(t), m = c.jet(-t), y = c.jet(0.5 - t);
    EXPECT_NEAR(m.f, j.f, 1e-10);
    EXPECT_NEAR(m.g, -j.g, 1e-10);
    EXPECT_NEAR(y.f, -j.f, 1e-10);
    EXPECT_NEAR(y.g, j.g, 1e-10);
  }
}

TEST(Oval, RejectsBadParameters) {
  EXPECT_THROW(make_oval(0.0), ConstructionError);
  EXPECT_THROW(make_oval(0.25), ConstructionError);
  EXPECT_THROW(make_oval(0.1, OvalShape{1.0}), ConstructionError);
  EXPECT_THROW(make_oval(0.1, OvalShape{0.0}), ConstructionError);
}

TEST(Oval, UncheckedWideWaistIsNotConvex) {
  const ValidationReport r = validate_contact(ProfileCurve::oval(0.1, OvalShape{1.5}));
  EXPECT_FALSE(r.convex);
}

TEST(Evaluate, TightTorusAtZero) {
  const CurveJet j = evaluate(ContactModel::tight(1).curve(), 0.0);
  EXPECT_DOUBLE_EQ(j.f, 1.0);
  EXPECT_DOUBLE_EQ(j.g, 0.0);
  EXPECT_DOUBLE_EQ(j.df, 0.0);
  EXPECT_DOUBLE_EQ(j.dg, kTwoPi);
  EXPECT_DOUBLE_EQ(j.D(), kTwoPi);
}

TEST(Evaluate, ReducesThetaModOne) {
  const ProfileCurve c = make_oval(0.1);
  const CurveJet a = c.jet(0.3), b = c.jet(2.3);
  EXPECT_NEAR(a.f, b.f, 1e-12);
  EXPECT_NEAR(a.dg, b.dg, 1e-10);
}

TEST(Evaluate, DMatchesFiniteDifferenceCrossProduct) {
  std::vector<double> samples(256);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = 1.0 + 0.2 * std::cos(kTwoPi * 2.0 * i / samples.size());
  const std::vector<ProfileCurve> curves{make_oval(0.1), make_oval(0.2), ProfileCurve::tight_torus(2),
                                         ProfileCurve::sampled(samples)};
  for (const auto& c : curves)
    for (int i = 0; i < 97; ++i) {
      const double t = (i + 0.37) / 97.0;
      EXPECT_NEAR(c.jet(t).D(), fd_D(c, t), 1e-8 * std::max(1.0, std::abs(c.jet(t).D()))) << to_string(c.kind()) << " " << t;
    }
}

TEST(Validate, TightTorusTwo) {
  const ValidationReport r = validate_contact(ContactModel::tight(2).curve());
  EXPECT_TRUE(r.pass());
  EXPECT_NEAR(r.min_D, 4.0 * std::numbers::pi, 1e-12);
}

TEST(Validate, OvalPasses) { EXPECT_TRUE(validate_contact(make_oval(0.1)).pass()); }

TEST(Validate, NonPositiveRadiusFails) {
  const ProfileCurve c = ProfileCurve::radial(
      [](double t) {
        const double w = kTwoPi;
        return std::array<double, 3>{1.0 + 2.0 * std::cos(w * t), -2.0 * w * std::sin(w * t),
                                     -2.0 * w * w * std::cos(w * t)};
      },
      "1 + 2 cos");
  const ValidationReport r = validate_contact(c);
  EXPECT_FALSE(r.pass());
  EXPECT_FALSE(r.positive_ok);
  ASSERT_FALSE(r.failures.empty());
  EXPECT_NE(r.failures.front().find("positivity"), std::string::npos);
}

TEST(Validate, SampledCurveIsPeriodic) {
  std::vector<double> samples(512);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = 1.0 + 0.1 * std::sin(kTwoPi * 3.0 * i / samples.size());
  const ValidationReport r = validate_contact(ProfileCurve::sampled(samples));
  EXPECT_TRUE(r.pass());
  EXPECT_LT(r.periodicity_defect, kPeriodicityTol);
}

TEST(TightTorus, DIsConstant) {
  for (int n = 1; n <= 4; ++n) {
    const ContactModel m = ContactModel::tight(n);
    for (int i = 0; i < 50; ++i) EXPECT_NEAR(m.jet(i / 50.0).D(), kTwoPi * n, 1e-12 * n);
  }
  EXPECT_THROW(ContactModel::tight(0), ConstructionError);
}

TEST(TightTorus, TangentWindsNTimes) {
  for (int n = 1; n <= 3; ++n) {
    const ProfileCurve c = ProfileCurve::tight_torus(n);
    double total = 0, prev = std::atan2(c.jet(0).dg, c.jet(0).df);
    for (int i = 1; i <= 4096; ++i) {
      const double a = std::atan2(c.jet(i / 4096.0).dg, c.jet(i / 4096.0).df);
      total += std::remainder(a - prev, kTwoPi);
      prev = a;
    }
    EXPECT_NEAR(total / kTwoPi, n, 1e-9);
  }
}

TEST(Contact, PositiveEverywhereOnValidCurves) {
  for (double eps : {0.05, 0.1, 0.2}) {
    const ProfileCurve c = make_oval(eps);
    for (int i = 0; i < 4096; ++i) EXPECT_GT(c.jet(i / 4096.0).D(), 0.0);
  }
}
