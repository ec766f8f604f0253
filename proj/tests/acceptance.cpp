// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero if any line fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "reeblab/cli.hpp"
#include "support/random_loops.hpp"

using namespace reeblab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) detail = what;
      ok = false;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ContactModel oval(double eps) { return ContactModel::thickened(make_oval(eps)); }

// 1. Torsion lemma at Qmax = 50 for three epsilons, under 10 s each.
Verdict torsion_lemma() {
  Verdict v;
  std::ostringstream d;
  for (double eps : {0.05, 0.1, 0.2}) {
    const auto t0 = Clock::now();
    const TorsionReport r = verify_torsion_lemma(make_oval(eps), 50);
    const double secs = seconds_since(t0);
    v.require(r.pass(), "lemma fails at eps " + fmt("%g", eps));
    v.require(std::abs(r.special_periods[0] - eps) < 1e-9 && std::abs(r.special_periods[1] - eps) < 1e-9,
              "special periods off at eps " + fmt("%g", eps));
    v.require(r.min_other_period > 0.25, "min other period <= 1/4 at eps " + fmt("%g", eps));
    v.require(secs < 10.0, "too slow at eps " + fmt("%g", eps));
    d << "eps " << eps << ": min_other " << r.min_other_period << ", " << r.torus_count << " tori, " << fmt("%.2f s; ", secs);
  }
  if (v.ok) v.detail = d.str();
  return v;
}

// 2. T(0) = 1 on the oval, by formula and by the flow.
Verdict period_at_zero() {
  Verdict v;
  const ContactModel m = oval(0.1);
  const InvariantTorus t = torus_at(m, 0.0);
  v.require(t.rational && t.p == 1 && t.q == 0, "torus at 0 is not (1, 0)");
  v.require(std::abs(t.period - 1.0) < 1e-12, "formula T(0) = " + fmt("%.17g", t.period));
  const Trajectory tr = integrate_orbit(m, {0.0, 0.0, 0.0}, 1.5);
  v.require(tr.closed && std::abs(tr.period - 1.0) < 1e-6, "flow T(0) = " + fmt("%.17g", tr.period));
  if (v.ok) v.detail = "formula " + fmt("%.17g", t.period) + ", flow " + fmt("%.12g", tr.period);
  return v;
}

// 3. Formula against flow on at least 100 tori of the oval and tight models.
Verdict formula_vs_flow() {
  Verdict v;
  int checked = 0;
  double worst = 0;
  for (const ContactModel& m : {oval(0.1), ContactModel::tight(1), ContactModel::tight(2), ContactModel::tight(3)}) {
    for (const auto& t : rational_tori(m, 4)) {
      const Trajectory tr = integrate_orbit(m, {0.2, 0.6, t.theta}, 1.5 * t.period + 1e-3);
      v.require(tr.closed, "orbit did not close at theta " + fmt("%.9g", t.theta));
      worst = std::max(worst, std::abs(tr.period - t.period));
      v.require(tr.winding[0] == t.p && tr.winding[1] == t.q, "homology mismatch at theta " + fmt("%.9g", t.theta));
      ++checked;
    }
  }
  v.require(worst < 1e-6, "period error " + fmt("%.3g", worst));
  v.require(checked >= 100, "only " + std::to_string(checked) + " tori");
  if (v.ok) v.detail = std::to_string(checked) + " tori, max period error " + fmt("%.2e", worst);
  return v;
}

// 4. CZ by both methods on 200 random nondegenerate loops at N = 512, under 60 s.
Verdict cz_cross_method() {
  Verdict v;
  const auto t0 = Clock::now();
  loops::LoopGenerator gen(20240517);
  int done = 0, skipped = 0;
  while (done < 200) {
    const AsymptoticOperator a = gen.next_operator();
    const SpectralData d = spectrum(a, kDefaultWindow, 512);
    const SymplecticPath p = path_from_operator(a);
    if (!loops::nondegenerate_at_zero(d, p)) {
      ++skipped;
      continue;
    }
    const CZResult s = cz_spectral(d, 0.0), q = cz_path(p);
    v.require(s.cz == q.cz, "loop " + std::to_string(done) + ": spectral " + std::to_string(s.cz) + " vs path " +
                                std::to_string(q.cz));
    v.require(2 * s.alpha_minus + s.parity == s.cz && 2 * s.alpha_plus - s.parity == s.cz,
              "winding identities disagree on loop " + std::to_string(done));
    ++done;
  }
  const double secs = seconds_since(t0);
  v.require(secs < 60.0, "took " + fmt("%.1f s", secs));
  if (v.ok) v.detail = "200 loops (" + std::to_string(skipped) + " degenerate skipped), " + fmt("%.1f s", secs);
  return v;
}

// 5. Closed-form spectrum of S = s I.
Verdict constant_spectrum() {
  Verdict v;
  double worst = 0;
  for (double s : {0.5, 2.0, std::numbers::pi, 5.0, 9.0}) {
    const SpectralData d = spectrum(AsymptoticOperator::constant(s * Mat2::Identity()), kDefaultWindow, 512);
    std::size_t expected = 0;
    for (int k = -10; k <= 10; ++k) {
      const double mu = kTwoPi * k - s;
      if (mu > -kDefaultWindow && mu <= kDefaultWindow) ++expected;
    }
    v.require(d.entries.size() == expected, "wrong number of rungs at s " + fmt("%g", s));
    for (const auto& e : d.entries) {
      const double mu = kTwoPi * e.winding - s;
      worst = std::max(worst, std::abs(e.eigenvalue - mu));
      v.require(e.multiplicity == 2, "multiplicity != 2 at s " + fmt("%g", s));
    }
  }
  v.require(worst < 1e-8, "eigenvalue error " + fmt("%.3g", worst));
  if (v.ok) v.detail = "max error " + fmt("%.2e", worst);
  return v;
}

// 6. Each interior winding occurs twice on 50 random operators at N = 512.
Verdict winding_pairing() {
  Verdict v;
  loops::LoopGenerator gen(777);
  int resolution_failures = 0;
  for (int i = 0; i < 50; ++i) {
    try {
      const SpectralData d = spectrum(gen.next_operator(), kDefaultWindow, 512);
      std::map<int, int> count;
      for (const auto& e : d.entries) count[e.winding] += e.multiplicity;
      const int lo = count.begin()->first, hi = count.rbegin()->first;
      for (const auto& [w, c] : count)
        if (w > lo && w < hi) v.require(c == 2, "winding " + std::to_string(w) + " attained " + std::to_string(c) + " times");
    } catch (const ResolutionError&) {
      ++resolution_failures;
    }
  }
  v.require(resolution_failures == 0, std::to_string(resolution_failures) + " pairing violations at N = 512");
  if (v.ok) v.detail = "50 operators, no violations";
  return v;
}

// 7. One-dimensional kernel on Morse-Bott tori; none after a nondegenerate perturbation.
Verdict morse_bott_kernel() {
  Verdict v;
  int tori = 0;
  for (const ContactModel& m : {oval(0.1), ContactModel::tight(1)}) {
    for (const auto& t : rational_tori(m, 3)) {
      if (t.classification != TorusClass::MorseBott) continue;
      const AsymptoticOperator a = operator_from_orbit(m, t);
      const SpectralData d = spectrum(a);
      v.require(kernel_dimension(d, 1e-6) == 1, "kernel != 1 at theta " + fmt("%.9g", t.theta));
      const Mat2 bump = 0.05 * Mat2::Identity();
      const AsymptoticOperator p = AsymptoticOperator::explicit_loop([a, bump](double s) { return a.S(s) + bump; });
      v.require(kernel_dimension(spectrum(p), 1e-6) == 0, "perturbed kernel at theta " + fmt("%.9g", t.theta));
      ++tori;
    }
  }
  if (v.ok) v.detail = std::to_string(tori) + " Morse-Bott tori";
  return v;
}

// 8. Index arithmetic.
Verdict index_arithmetic() {
  Verdict v;
  PuncturedCurveData d;
  for (double th : {0.25, 0.75}) {
    PunctureRecord r;
    r.cls = PunctureClass::Unconstrained;
    r.wind_e = 0;
    r.spectrum = std::make_shared<const SpectralData>(spectrum(operator_from_orbit(oval(0.1), torus_at(oval(0.1), th))));
    d.punctures.push_back(r);
  }
  d.punctures = select_constraints(d.punctures);
  const int cn = normal_chern(d), ind = fredholm_index(d), si = adjunction(d).self_intersection;
  v.require(cn == 0 && ind == 2 && si == 0,
            "triple (" + std::to_string(cn) + ", " + std::to_string(ind) + ", " + std::to_string(si) + ")");
  v.require(closed_sphere_index(2) == 2, "closed sphere index");
  v.require(cover_index(5, 1) == 5 && cover_index(0, 2) == 2 && cover_index(1, 3) == 7, "cover formula");
  v.require(closed_adjunction(0, 1).verdict == AdjunctionVerdict::ParityViolation, "parity contradiction not flagged");
  if (v.ok) v.detail = "(c_N, ind, i) = (0, 2, 0); sphere, covers and parity verdict exact";
  return v;
}

// 9. Cylinder diagnostics on the default 2048-point grid.
Verdict cylinder_family() {
  Verdict v;
  const ContactModel m = oval(0.1);
  const BetaFn beta = constant_beta();
  const CylinderSolution s = cylinder_ode(m, beta);
  v.require(s.s.size() == 2048, "grid is not 2048 points");
  v.require(s.cr_residual < 1e-6, "CR residual " + fmt("%.3g", s.cr_residual));
  v.require(std::abs(s.energy - 0.2) < 1e-4, "energy " + fmt("%.9g", s.energy));
  const double nu = linearized_rate(m, beta, End::Plus);
  const double eig = cli::end_eigenvalue(m, beta, 0.25);
  v.require(std::abs(s.decay_plus / nu - 1) < 0.01, "decay vs linearization " + fmt("%.6g", s.decay_plus));
  v.require(std::abs(s.decay_minus / linearized_rate(m, beta, End::Minus) - 1) < 0.01, "decay at -inf");
  v.require(std::abs(s.decay_plus / eig - 1) < 0.05, "decay vs eigenvalue " + fmt("%.6g", eig));
  if (v.ok)
    v.detail = "cr " + fmt("%.2e", s.cr_residual) + ", energy " + fmt("%.8f", s.energy) + ", decay " +
               fmt("%.6f", s.decay_plus) + " vs nu " + fmt("%.6f", nu) + " and eigenvalue " + fmt("%.6f", eig);
  return v;
}

// 10. Identical configs give byte-identical reports.
Verdict determinism() {
  Verdict v;
  const std::vector<std::vector<std::string>> runs{
      {"torsion", "--epsilon", "0.1", "--qmax", "50"},
      {"cz", "--theta", "0.25", "--shift", "0.5"},
      {"spectrum", "--constant-s", "2.5"},
      {"index", "--input", REEBLAB_DATA_DIR "/u0.json"},
      {"cylinder"},
      {"scan", "--target", "torsion", "--values", "0.05,0.1,0.2", "--threads", "3"}};
  for (const auto& args : runs) {
    std::string first;
    for (int k = 0; k < 2; ++k) {
      std::vector<const char*> argv{"reeblab"};
      for (const auto& a : args) argv.push_back(a.c_str());
      std::ostringstream out, err;
      const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
      v.require(code == 0, args.front() + " exited " + std::to_string(code));
      if (k == 0) first = out.str();
      else v.require(first == out.str(), args.front() + " reports differ");
    }
  }
  if (v.ok) v.detail = std::to_string(runs.size()) + " commands, two runs each";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"torsion lemma", torsion_lemma},
      {"T(0) = 1 on the oval", period_at_zero},
      {"period formula vs flow", formula_vs_flow},
      {"CZ cross-method identity", cz_cross_method},
      {"constant-coefficient spectrum", constant_spectrum},
      {"winding pairing", winding_pairing},
      {"Morse-Bott kernel dimension", morse_bott_kernel},
      {"index arithmetic", index_arithmetic},
      {"cylinder family", cylinder_family},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.ok = false;
      v.detail = std::string("exception: ") + e.what();
    }
    if (!v.ok) ++failed;
    std::printf("%s %2zu %s: %s\n", v.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
