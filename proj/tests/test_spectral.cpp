#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "reeblab/spectral.hpp"
#include "support/random_loops.hpp"

using namespace reeblab;

namespace {

constexpr double kPi = std::numbers::pi;

AsymptoticOperator scalar(double s) { return AsymptoticOperator::constant(s * Mat2::Identity()); }

ContactModel oval(double eps) { return ContactModel::thickened(make_oval(eps)); }

}  // namespace

TEST(Operator, RejectsAsymmetricAndOpenLoops) {
  EXPECT_THROW(AsymptoticOperator::explicit_loop([](double) {
                 Mat2 m;
                 m << 1, 2, 3, 4;
                 return m;
               }),
               InvalidOperatorError);
  EXPECT_THROW(AsymptoticOperator::explicit_loop([](double t) { return Mat2(t * Mat2::Identity()); }),
               InvalidOperatorError);
}

TEST(OperatorFromPath, RotationGivesScalar) {
  const double omega = 2.7;
  const AsymptoticOperator a = operator_from_path(rotation_path(omega));
  EXPECT_EQ(a.provenance(), Provenance::FromPath);
  for (double t : {0.0, 0.3, 0.77}) EXPECT_TRUE(a.S(t).isApprox(omega * Mat2::Identity(), 1e-12));
}

TEST(OperatorFromPath, IdentityGivesZero) {
  SymplecticPath id;
  id.value = [](double) { return Mat2(Mat2::Identity()); };
  const AsymptoticOperator a = operator_from_path(id);
  for (double t : {0.0, 0.5, 0.9}) EXPECT_LT(a.S(t).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OperatorFromPath, RoundTripOfRandomLoops) {
  loops::LoopGenerator gen(11);
  for (int i = 0; i < 5; ++i) {
    const AsymptoticOperator s = gen.next_operator();
    const SymplecticPath psi = path_from_operator(s);
    const SymplecticPath back = path_from_operator(operator_from_path(psi));
    for (int k = 0; k <= 20; ++k) {
      const double t = k / 20.0;
      EXPECT_LT((psi(t) - back(t)).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, psi(t).norm())) << i << " " << t;
      EXPECT_NEAR(psi(t).determinant(), 1.0, 1e-8);
    }
  }
}

TEST(OperatorFromPath, NonsymplecticPathIsRejected) {
  SymplecticPath p;
  p.value = [](double t) {
    Mat2 m = Mat2::Identity();
    m(0, 0) = 1.0 + t;
    return m;
  };
  EXPECT_THROW(operator_from_path(p), NonsymplecticPathError);
}

TEST(OperatorFromOrbit, OvalQuarterTorusKernel) {
  const ContactModel m = oval(0.1);
  const InvariantTorus t = torus_at(m, 0.25);
  const AsymptoticOperator a = operator_from_orbit(m, t);
  EXPECT_EQ(a.provenance(), Provenance::FromOrbit);
  EXPECT_TRUE(a.S(0.0).isApprox(a.S(0.61)));
  const SpectralData d = spectrum(a);
  EXPECT_EQ(kernel_dimension(d), 1);
  for (const auto& e : d.entries)
    if (std::abs(e.eigenvalue) < 1e-6) EXPECT_EQ(e.winding, 0);
}

TEST(OperatorFromOrbit, CoversKeepOneDimensionalKernel) {
  const ContactModel m = oval(0.1);
  const auto tori = rational_tori(m, 2);
  for (const InvariantTorus& t : {tori.front(), tori[tori.size() / 3], torus_at(m, 0.25)}) {
    ASSERT_TRUE(t.rational) << t.theta;
    for (int k = 1; k <= 3; ++k) EXPECT_EQ(kernel_dimension(spectrum(operator_from_orbit(m, t, constant_beta(), k))), 1);
  }
}

TEST(Spectrum, ConstantScalarClosedForm) {
  for (double s : {0.5, 3.0, 5.9, 7.0}) {
    const SpectralData d = spectrum(scalar(s));
    std::vector<double> expected;
    for (int k = -10; k <= 10; ++k) {
      const double mu = kTwoPi * k - s;
      if (mu > -d.window && mu <= d.window) expected.push_back(mu);
    }
    ASSERT_EQ(d.entries.size(), expected.size()) << s;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_NEAR(d.entries[i].eigenvalue, expected[i], 1e-8);
      EXPECT_EQ(d.entries[i].multiplicity, 2);
      EXPECT_EQ(d.entries[i].winding, static_cast<int>(std::lround((expected[i] + s) / kTwoPi)));
    }
  }
}

TEST(Spectrum, ZeroOperatorHasTwoDimensionalKernel) {
  const SpectralData d = spectrum(scalar(0.0));
  EXPECT_EQ(kernel_dimension(d), 2);
  for (const auto& e : d.entries)
    if (std::abs(e.eigenvalue) < 1e-6) EXPECT_EQ(e.winding, 0);
}

TEST(Spectrum, SelfConvergence) {
  loops::LoopGenerator gen(23);
  for (int i = 0; i < 3; ++i) {
    const AsymptoticOperator a = gen.next_operator();
    const SpectralData lo = spectrum(a, kDefaultWindow, 512), hi = spectrum(a, kDefaultWindow, 1024);
    const auto el = lo.eigenvalues(), eh = hi.eigenvalues();
    ASSERT_EQ(el.size(), eh.size());
    for (std::size_t k = 0; k < el.size(); ++k) EXPECT_NEAR(el[k], eh[k], 1e-8);
  }
}

TEST(Spectrum, MatchesDenseEigensolver) {
  loops::LoopGenerator gen(5);
  const AsymptoticOperator a = gen.next_operator();
  const Eigen::MatrixXd m = fourier_matrix(a, 64);
  EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
  std::vector<double> dense;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > -kDefaultWindow && ev(i) <= kDefaultWindow) dense.push_back(ev(i));
  const auto banded = spectrum(a, kDefaultWindow, 64).eigenvalues();
  ASSERT_EQ(banded.size(), dense.size());
  for (std::size_t k = 0; k < dense.size(); ++k) EXPECT_NEAR(banded[k], dense[k], 1e-9);
}

TEST(Spectrum, PairingOnRandomOperators) {
  loops::LoopGenerator gen(99);
  for (int i = 0; i < 10; ++i) {
    const SpectralData d = spectrum(gen.next_operator());
    std::map<int, int> count;
    for (const auto& e : d.entries) count[e.winding] += e.multiplicity;
    const int lo = count.begin()->first, hi = count.rbegin()->first;
    for (const auto& [w, c] : count)
      if (w > lo && w < hi) EXPECT_EQ(c, 2);
    for (std::size_t k = 1; k < d.entries.size(); ++k) EXPECT_LE(d.entries[k - 1].winding, d.entries[k].winding);
  }
}

TEST(Spectrum, RejectsBadArguments) {
  EXPECT_THROW(spectrum(scalar(1.0), kDefaultWindow, 32), Error);
  EXPECT_THROW(spectrum(scalar(1.0), -1.0), Error);
}

TEST(Winding, SimpleLoops) {
  for (int k : {-2, 0, 1, 3}) {
    std::vector<Vec2> loop;
    for (int i = 0; i < 400; ++i) loop.emplace_back(std::cos(kTwoPi * k * i / 400.0), std::sin(kTwoPi * k * i / 400.0));
    EXPECT_EQ(winding_number(loop), k);
  }
  EXPECT_EQ(winding_number(std::vector<Vec2>(10, Vec2(1, 0))), 0);
}

TEST(Winding, VanishingLoopIsRejected) {
  std::vector<Vec2> loop{Vec2(1, 0), Vec2(0, 0), Vec2(-1, 0)};
  EXPECT_THROW(winding_number(loop), VanishingLoopError);
}

TEST(Winding, FirstPositiveEigenfunction) {
  const SpectralData d = spectrum(scalar(2.0));
  for (std::size_t i = 0; i < d.entries.size(); ++i)
    if (d.entries[i].eigenvalue > 0) {
      EXPECT_EQ(winding_number(d.eigenfunctions[i]), 1);
      break;
    }
}

TEST(AlphaParity, ScalarRungs) {
  AlphaParity a = alpha_parity(spectrum(scalar(3.0)), 0.0);
  EXPECT_EQ(a.alpha_minus, 0);
  EXPECT_EQ(a.alpha_plus, 1);
  EXPECT_EQ(a.parity, 1);
  a = alpha_parity(spectrum(scalar(9.0)), 0.0);
  EXPECT_EQ(a.alpha_minus, 1);
  EXPECT_EQ(a.alpha_plus, 2);
  EXPECT_EQ(a.parity, 1);
}

TEST(AlphaParity, MorseBottKernelBelowSmallShift) {
  const ContactModel m = oval(0.1);
  const SpectralData d = spectrum(operator_from_orbit(m, torus_at(m, 0.25)));
  const AlphaParity a = alpha_parity(d, 0.1);
  EXPECT_EQ(a.alpha_minus, 0);
  EXPECT_EQ(a.alpha_plus, 1);
}

TEST(AlphaParity, Errors) {
  const SpectralData d = spectrum(scalar(3.0));
  EXPECT_THROW(alpha_parity(d, kTwoPi - 3.0), OnSpectrumError);
  EXPECT_THROW(alpha_parity(spectrum(scalar(3.0), 1.0), 0.0), WindowTooSmallError);
  EXPECT_THROW(alpha_parity(d, 100.0), WindowTooSmallError);
}

TEST(CZ, SpectralScalar) {
  EXPECT_EQ(cz_spectral(spectrum(scalar(3.14159)), 0.0).cz, 1);
  EXPECT_EQ(cz_spectral(spectrum(scalar(9.0)), 0.0).cz, 3);
}

TEST(CZ, DegenerateZeroShiftedBothWays) {
  // A - c for S = 0 is the rotation operator with S = c I.
  const SpectralData d = spectrum(scalar(0.0));
  const double delta = 0.01;
  EXPECT_EQ(cz_spectral(d, -delta).cz, -1);
  EXPECT_EQ(cz_spectral(d, delta).cz, 1);
  EXPECT_EQ(cz_path(rotation_path(-delta)).cz, -1);
  EXPECT_EQ(cz_path(rotation_path(delta)).cz, 1);
}

TEST(CZ, PathRotations) {
  EXPECT_EQ(cz_path(rotation_path(3.0)).cz, 1);
  EXPECT_EQ(cz_path(rotation_path(9.0)).cz, 3);
  EXPECT_EQ(cz_path(rotation_path(-9.0)).cz, -3);
  EXPECT_EQ(cz_path(rotation_path(3.0)).method, CZMethod::Path);
  EXPECT_THROW(cz_path(rotation_path(kTwoPi)), DegenerateEndpointError);
}

TEST(CZ, PathHyperbolic) {
  SymplecticPath p;
  p.value = [](double t) {
    Mat2 m = Mat2::Zero();
    m(0, 0) = std::exp(t);
    m(1, 1) = std::exp(-t);
    return m;
  };
  EXPECT_EQ(cz_path(p).cz, 0);
  EXPECT_EQ(cz_spectral(spectrum(operator_from_path(p)), 0.0).cz, 0);
}

TEST(CZ, BothWindingIdentitiesHold) {
  for (double s : {0.3, 3.0, 7.5, -2.0}) {
    const CZResult r = cz_spectral(spectrum(scalar(s)), 0.0);
    EXPECT_EQ(r.cz, 2 * r.alpha_minus + r.parity);
    EXPECT_EQ(r.cz, 2 * r.alpha_plus - r.parity);
  }
}

TEST(CZ, ShiftMonotonicity) {
  // mu_CZ(A - c) steps up by one at each crossed eigenvalue of multiplicity one and by two at a
  // double rung of S = s I.
  const double s = 1.0;
  const SpectralData d = spectrum(scalar(s));
  double prev_c = -13.0;
  int prev = cz_spectral(d, prev_c).cz;
  for (double c = -13.0 + 0.05; c < 17.0; c += 0.05) {
    bool near = false;
    for (const auto& e : d.entries) near = near || std::abs(e.eigenvalue - c) < 1e-6;
    if (near) continue;
    const int cur = cz_spectral(d, c).cz;
    int crossed = 0;
    for (const auto& e : d.entries)
      if (e.eigenvalue < c && e.eigenvalue > prev_c) crossed += e.multiplicity;
    EXPECT_EQ(cur - prev, crossed) << c;
    prev = cur;
    prev_c = c;
  }
}

TEST(CZ, CrossMethodOnRandomLoops) {
  loops::LoopGenerator gen(2024);
  int done = 0;
  while (done < 20) {
    const AsymptoticOperator a = gen.next_operator();
    const SpectralData d = spectrum(a);
    const SymplecticPath p = path_from_operator(a);
    if (!loops::nondegenerate_at_zero(d, p)) continue;
    EXPECT_EQ(cz_path(p).cz, cz_spectral(d, 0.0).cz);
    ++done;
  }
}
