#pragma once

// Command-line front end. Every command writes a JSON report (or a CSV table for scan and
// export) and maps outcomes to exit codes: 0 pass, 1 verified failure, 2 usage, 3 resolution.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "reeblab/curve_index.hpp"
#include "reeblab/errors.hpp"
#include "reeblab/io.hpp"
#include "reeblab/profile_model.hpp"
#include "reeblab/reeb_dynamics.hpp"
#include "reeblab/spectral.hpp"
#include "reeblab/torsion_lab.hpp"

#ifndef REEBLAB_VERSION
#define REEBLAB_VERSION "0.1.0"
#endif

namespace reeblab::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2, kResolution = 3 };

// Acceptance thresholds used in verdicts.
inline constexpr double kFlowPeriodTol = 1e-6;
inline constexpr double kCrTol = 1e-6;
inline constexpr double kEnergyTol = 1e-4;
inline constexpr double kDecayRelTol = 0.01;
inline constexpr double kEigenRelTol = 0.05;

struct RunConfig {
  std::string command;

  std::string model = "oval";  // oval | tight
  double epsilon = 0.1;
  double waist = OvalShape{}.waist;
  int n = 1;
  int grid = ProfileCurve::kDefaultGrid;
  int qmax = 50;
  int flow_qmax = 5;

  int N = 512;
  double window = kDefaultWindow;
  std::optional<double> constant_s;
  std::vector<double> matrix;  // a, b, d for [[a, b], [b, d]]
  std::string operator_file;
  double theta = 0.25;
  int cover = 1;
  double shift = 0.0;

  double beta = 1.0;
  double beta_amplitude = 0.0;  // beta(theta) = beta (1 + amplitude cos 4 pi theta)

  double rho_mid = 0.5;
  double a0 = 0.0, x0 = 0.0;
  int samples = 2048;

  std::string input, output, csv, out_dir, dataset = "all";
  std::string target;
  std::vector<double> values;
  std::string range;  // lo:hi:count

  int threads = 0;
};

inline json to_json(const RunConfig& c) {
  json j{{"model", c.model}, {"epsilon", c.epsilon}, {"waist", c.waist},   {"n", c.n},
         {"grid", c.grid},   {"qmax", c.qmax},       {"flow_qmax", c.flow_qmax},
         {"N", c.N},         {"window", c.window},   {"theta", c.theta},   {"cover", c.cover},
         {"shift", c.shift}, {"beta", c.beta},       {"beta_amplitude", c.beta_amplitude},
         {"rho_mid", c.rho_mid}, {"a0", c.a0},       {"x0", c.x0},         {"samples", c.samples},
         {"threads", c.threads}};
  if (c.constant_s) j["constant_s"] = *c.constant_s;
  if (!c.matrix.empty()) j["matrix"] = c.matrix;
  if (!c.operator_file.empty()) j["operator_file"] = c.operator_file;
  if (!c.input.empty()) j["input"] = c.input;
  if (!c.target.empty()) j["target"] = c.target;
  if (!c.values.empty()) j["values"] = c.values;
  if (!c.range.empty()) j["range"] = c.range;
  return j;
}

inline json tolerances() {
  return json{{"special_period", kSpecialTol},         {"period_agreement", kPeriodAgreementTol},
              {"closure", kClosureTol},                {"flow_rel", kFlowRelTol},
              {"flow_period", kFlowPeriodTol},         {"degeneracy", kDegeneracyTol},
              {"cluster", kClusterTol},                {"on_spectrum", kOnSpectrumTol},
              {"cylinder_rel", kCylinderRelTol},       {"cr_residual", kCrTol},
              {"energy", kEnergyTol},                  {"decay_rel", kDecayRelTol},
              {"eigen_rel", kEigenRelTol},             {"symmetry_S", kSymmetryTolS},
              {"periodicity", kPeriodicityTol},        {"contact_margin", kContactMargin}};
}

/// REEBLAB_THREADS wins over the flag; zero means all cores.
inline int worker_count(const RunConfig& c) {
  int t = c.threads;
  if (const char* env = std::getenv("REEBLAB_THREADS")) {
    try {
      t = std::stoi(env);
    } catch (const std::exception&) {
      throw UsageError("REEBLAB_THREADS must be an integer");
    }
  }
  if (t < 0) throw UsageError("thread count must be non-negative");
  if (t == 0) t = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return t;
}

/// Runs f(i) for i in [0, n) on up to `threads` workers. Results go to caller-owned slots, so the
/// outcome does not depend on completion order. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto k = static_cast<std::size_t>(std::max(1, threads));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(k, n); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------------------------
// Inputs

inline ContactModel build_model(const RunConfig& c) {
  if (c.model == "oval") return ContactModel::thickened(make_oval(c.epsilon, OvalShape{c.waist}, c.grid));
  if (c.model == "tight") return ContactModel::tight(c.n);
  throw UsageError("unknown model '" + c.model + "' (expected oval or tight)");
}

inline BetaFn build_beta(const RunConfig& c) {
  if (!(c.beta > 0)) throw UsageError("beta must be positive");
  if (!(std::abs(c.beta_amplitude) < 1)) throw UsageError("beta amplitude must lie in (-1, 1)");
  if (c.beta_amplitude == 0.0) return constant_beta(c.beta);
  return [b = c.beta, a = c.beta_amplitude](double th) { return b * (1.0 + a * std::cos(2.0 * kTwoPi * th)); };
}

inline std::string beta_label(const RunConfig& c) {
  if (c.beta_amplitude == 0.0) return format_double(c.beta);
  return format_double(c.beta) + "*(1+" + format_double(c.beta_amplitude) + "*cos(4*pi*theta))";
}

/// The operator selected by --constant-s, --matrix, --operator-file or, failing those, the orbit
/// operator of the model torus through --theta.
inline AsymptoticOperator build_operator(const RunConfig& c) {
  if (c.constant_s) return AsymptoticOperator::constant(*c.constant_s * Mat2::Identity(), "constant s=" + format_double(*c.constant_s));
  if (!c.matrix.empty()) {
    if (c.matrix.size() != 3) throw UsageError("--matrix takes a,b,d");
    Mat2 s;
    s << c.matrix[0], c.matrix[1], c.matrix[1], c.matrix[2];
    return AsymptoticOperator::constant(s, "constant matrix");
  }
  if (!c.operator_file.empty()) return operator_from_json(read_json_file(c.operator_file));
  const ContactModel model = build_model(c);
  const InvariantTorus t = torus_at(model, c.theta, c.qmax);
  if (!t.rational) throw UsageError("torus through theta = " + format_double(c.theta) + " is not rational up to qmax");
  return operator_from_orbit(model, t, build_beta(c), c.cover);
}

inline AsymptoticOperator shifted(const AsymptoticOperator& a, double c) {
  return AsymptoticOperator([a, c](double t) { return Mat2(a.S(t) + c * Mat2::Identity()); }, a.provenance(),
                            a.label() + " + " + format_double(c));
}

// ---------------------------------------------------------------------------------------------
// Reports

struct Report {
  json doc;
  int code = kPass;
};

inline Report make_report(const RunConfig& c, bool pass) {
  Report r;
  r.doc["command"] = c.command;
  r.doc["config"] = to_json(c);
  r.doc["provenance"] = {{"program", "reeblab"}, {"version", REEBLAB_VERSION}, {"tolerances", tolerances()}};
  r.doc["verdict"] = pass ? "pass" : "fail";
  r.code = pass ? kPass : kFail;
  return r;
}

inline void set_verdict(Report& r, bool pass) {
  r.doc["verdict"] = pass ? "pass" : "fail";
  r.code = pass ? kPass : kFail;
}

inline json periods_dataset(const std::vector<InvariantTorus>& tori) {
  json d{{"theta", json::array()}, {"p", json::array()}, {"q", json::array()}, {"T", json::array()}};
  for (const auto& t : tori) {
    d["theta"].push_back(t.theta);
    d["p"].push_back(t.p);
    d["q"].push_back(t.q);
    d["T"].push_back(t.period);
  }
  return d;
}

struct FlowCheck {
  bool closed = false;
  double period_error = 0;
  bool winding_ok = false;
};

inline FlowCheck flow_check(const ContactModel& model, const InvariantTorus& t) {
  const Trajectory tr = integrate_orbit(model, {0.0, 0.0, t.theta}, 1.5 * t.period + 1e-3);
  FlowCheck f;
  f.closed = tr.closed;
  if (tr.closed) {
    f.period_error = std::abs(tr.period - t.period);
    f.winding_ok = tr.winding[0] == t.p && tr.winding[1] == t.q;
  }
  return f;
}

inline Report cmd_analyze(const RunConfig& c) {
  const ContactModel model = build_model(c);
  const ValidationReport v = validate_contact(model.curve());
  const auto tori = rational_tori(model, c.qmax);

  std::vector<std::size_t> checked;
  for (std::size_t i = 0; i < tori.size(); ++i)
    if (std::max(std::abs(tori[i].p), std::abs(tori[i].q)) <= c.flow_qmax) checked.push_back(i);
  std::vector<FlowCheck> flows(checked.size());
  parallel_for(checked.size(), worker_count(c), [&](std::size_t k) { flows[k] = flow_check(model, tori[checked[k]]); });

  double max_err = 0;
  int not_closed = 0, winding_bad = 0;
  for (const auto& f : flows) {
    if (!f.closed) {
      ++not_closed;
      continue;
    }
    max_err = std::max(max_err, f.period_error);
    winding_bad += !f.winding_ok;
  }
  std::map<std::string, int> classes;
  for (const auto& t : tori) ++classes[to_string(t.classification)];

  const bool pass = v.pass() && not_closed == 0 && winding_bad == 0 && max_err < kFlowPeriodTol;
  Report r = make_report(c, pass);
  r.doc["results"] = {{"curve", to_json(model.curve())},
                      {"validation", to_json(v)},
                      {"torus_count", tori.size()},
                      {"classification_counts", classes},
                      {"flow_checked", checked.size()},
                      {"flow_not_closed", not_closed},
                      {"flow_winding_mismatches", winding_bad},
                      {"flow_max_period_error", max_err}};
  r.doc["datasets"] = {{"periods", periods_dataset(tori)}};
  return r;
}

inline Report cmd_torsion(const RunConfig& c) {
  if (c.model != "oval") throw UsageError("torsion needs the oval model");
  const TorsionReport t = verify_torsion_lemma(make_oval(c.epsilon, OvalShape{c.waist}, c.grid), c.qmax);
  json res = to_json(t);
  json diamond = res["diamond_case_log"];
  res.erase("diamond_case_log");
  std::map<std::string, int> branches;
  for (const auto& d : t.diamond_case_log) ++branches[to_string(d.branch)];
  res["branch_counts"] = branches;
  Report r = make_report(c, t.pass());
  r.doc["results"] = res;
  json periods{{"theta", json::array()}, {"p", json::array()}, {"q", json::array()}, {"T", json::array()}};
  for (const auto& d : t.diamond_case_log) {
    periods["theta"].push_back(d.theta);
    periods["p"].push_back(d.p);
    periods["q"].push_back(d.q);
    periods["T"].push_back(d.period);
  }
  r.doc["datasets"] = {{"periods", periods}, {"diamond", diamond}};
  return r;
}

inline Report cmd_spectrum(const RunConfig& c) {
  const AsymptoticOperator a = build_operator(c);
  const SpectralData d = spectrum(a, c.window, c.N);
  Report r = make_report(c, true);
  json res = to_json(d);
  res["operator"] = to_json(a, 16);
  res["kernel_dimension"] = kernel_dimension(d);
  res["total_multiplicity"] = d.total_multiplicity();
  r.doc["results"] = res;
  r.doc["datasets"] = {{"ladder", res["spectrum"]}};
  return r;
}

inline Report cmd_cz(const RunConfig& c) {
  const AsymptoticOperator a = build_operator(c);
  const SpectralData d = spectrum(a, c.window, c.N);
  const CZResult spec = cz_spectral(d, c.shift);
  json res{{"cz_spectral", spec.cz}, {"spectral", to_json(spec)}};
  bool pass = true;
  try {
    CZResult path = cz_path(path_from_operator(shifted(a, c.shift)));
    path.shift = c.shift;
    res["cz_path"] = path.cz;
    res["path"] = to_json(path);
    pass = path.cz == spec.cz;
  } catch (const DegenerateEndpointError& e) {
    res["cz_path"] = nullptr;
    res["path_error"] = e.what();
  }
  Report r = make_report(c, pass);
  r.doc["results"] = res;
  r.doc["datasets"] = {{"ladder", to_json(d)["spectrum"]}};
  return r;
}

inline Report cmd_index(const RunConfig& c) {
  if (c.input.empty()) throw UsageError("index needs --input");
  const json in = read_json_file(c.input);
  Report r = make_report(c, true);
  json res;
  // Data whose adjunction has no solution (parity or negative delta) describes no embedded curve.
  auto consistent = [](AdjunctionVerdict v) {
    return v != AdjunctionVerdict::ParityViolation && v != AdjunctionVerdict::NegativeDelta;
  };
  bool ok = true;
  if (in.value("closed", false)) {
    const int c1 = in.value("c1", 0);
    res["ind"] = closed_sphere_index(c1);
    if (in.contains("self_intersection")) {
      const AdjunctionResult adj = closed_adjunction(in.at("self_intersection").get<int>(), c1);
      res["self_intersection"] = adj.self_intersection;
      res["adjunction_verdict"] = to_string(adj.verdict);
      res["delta"] = adj.delta ? json(*adj.delta) : json(nullptr);
      ok = consistent(adj.verdict);
    }
  } else {
    const PuncturedCurveData data = curve_data_from_json(in, c.N, c.window);
    res["curve"] = to_json(data);
    res["c_N"] = normal_chern(data);
    res["ind"] = fredholm_index(data);
    res["even_punctures"] = even_punctures(data);
    const AdjunctionResult adj = adjunction(data);
    res["self_intersection"] = adj.self_intersection;
    res["adjunction_verdict"] = to_string(adj.verdict);
    ok = consistent(adj.verdict);
  }
  if (in.contains("cover")) {
    const int ind0 = res["ind"].get<int>();
    res["cover_index"] = cover_index(ind0, in.at("cover").get<int>());
  }
  r.doc["results"] = res;
  set_verdict(r, ok);
  return r;
}

struct CylinderCheck {
  CylinderSolution sol;
  double nu_plus = 0, nu_minus = 0, eig_plus = 0, eig_minus = 0;
  bool pass = false;
};

/// Largest negative eigenvalue with winding 0 of the orbit operator on the torus through theta.
inline double end_eigenvalue(const ContactModel& model, const BetaFn& beta, double theta) {
  const SpectralData d = spectrum(operator_from_orbit(model, torus_at(model, theta), beta));
  std::optional<double> best;
  for (const auto& e : d.entries)
    if (e.eigenvalue < -kOnSpectrumTol && e.winding == 0) best = e.eigenvalue;
  if (!best) throw ResolutionError("no negative winding-0 eigenvalue at theta = " + format_double(theta));
  return *best;
}

inline CylinderCheck run_cylinder(const RunConfig& c) {
  if (c.model != "oval") throw UsageError("cylinder needs the oval model");
  const ContactModel model = build_model(c);
  const BetaFn beta = build_beta(c);
  CylinderOptions o;
  o.rho_mid = c.rho_mid;
  o.a0 = c.a0;
  o.x0 = c.x0;
  o.samples = c.samples;
  o.beta_label = beta_label(c);
  CylinderCheck k;
  k.sol = cylinder_ode(model, beta, o);
  // An unresolved end is a resolution problem, not a failed verdict: rerun the fit to raise it.
  if (std::isnan(k.sol.decay_plus)) decay_rate(k.sol, End::Plus);
  if (std::isnan(k.sol.decay_minus)) decay_rate(k.sol, End::Minus);
  k.nu_plus = linearized_rate(model, beta, End::Plus);
  k.nu_minus = linearized_rate(model, beta, End::Minus);
  k.eig_plus = end_eigenvalue(model, beta, 0.25);
  k.eig_minus = end_eigenvalue(model, beta, 0.75);
  const auto& s = k.sol;
  auto rel = [](double x, double ref) { return std::abs(x - ref) / std::abs(ref); };
  k.pass = s.cr_residual < kCrTol && std::abs(s.energy - 2.0 * c.epsilon) < kEnergyTol &&
           rel(s.decay_plus, k.nu_plus) < kDecayRelTol && rel(s.decay_minus, k.nu_minus) < kDecayRelTol &&
           rel(s.decay_plus, k.eig_plus) < kEigenRelTol && rel(s.decay_minus, k.eig_minus) < kEigenRelTol;
  return k;
}

inline Report cmd_cylinder(const RunConfig& c) {
  const CylinderCheck k = run_cylinder(c);
  Report r = make_report(c, k.pass);
  json res = to_json(k.sol, false);
  res["expected_energy"] = 2.0 * c.epsilon;
  res["linearized_rate_plus"] = k.nu_plus;
  res["linearized_rate_minus"] = k.nu_minus;
  res["eigenvalue_plus"] = k.eig_plus;
  res["eigenvalue_minus"] = k.eig_minus;
  r.doc["results"] = res;
  r.doc["datasets"] = {{"cylinder", {{"s", k.sol.s}, {"alpha", k.sol.alpha}, {"rho", k.sol.rho}}}};
  return r;
}

// ---------------------------------------------------------------------------------------------
// Scans

inline std::vector<double> scan_values(const RunConfig& c) {
  std::vector<double> v = c.values;
  if (!c.range.empty()) {
    double lo = 0, hi = 0;
    int count = 0;
    char s1 = 0, s2 = 0;
    std::istringstream in(c.range);
    if (!(in >> lo >> s1 >> hi >> s2 >> count) || s1 != ':' || s2 != ':' || count < 1)
      throw UsageError("--range expects lo:hi:count");
    for (int i = 0; i < count; ++i) v.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
  }
  if (v.empty()) throw UsageError("scan grid is empty");
  return v;
}

struct ScanTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool all_ok = true;
};

/// One row per grid value in grid order. Failing rows carry the error text in the last column.
inline ScanTable scan(const RunConfig& c) {
  const std::vector<double> values = scan_values(c);
  ScanTable t;
  std::function<std::vector<std::string>(double)> row;
  const std::string target = c.target.empty() ? "torsion" : c.target;
  if (target == "torsion") {
    t.header = {"index", "epsilon", "pass", "T_quarter", "T_three_quarter", "min_other_period", "torus_count"};
    row = [&c](double eps) {
      const TorsionReport r = verify_torsion_lemma(make_oval(eps, OvalShape{c.waist}, c.grid), c.qmax);
      return std::vector<std::string>{format_double(eps), r.pass() ? "pass" : "fail", format_double(r.special_periods[0]),
                                      format_double(r.special_periods[1]), format_double(r.min_other_period),
                                      std::to_string(r.torus_count)};
    };
  } else if (target == "period") {
    t.header = {"index", "theta", "pass", "p", "q", "T", "classification"};
    const ContactModel model = build_model(c);
    row = [&c, model](double th) {
      const InvariantTorus r = torus_at(model, th, c.qmax);
      if (!r.rational)
        return std::vector<std::string>{format_double(th), "pass", "", "", "", to_string(r.classification)};
      return std::vector<std::string>{format_double(th), "pass", std::to_string(r.p), std::to_string(r.q),
                                      format_double(r.period), to_string(r.classification)};
    };
  } else if (target == "cylinder") {
    t.header = {"index", "epsilon", "pass", "cr_residual", "energy", "decay_plus", "decay_minus"};
    row = [&c](double eps) {
      RunConfig k = c;
      k.epsilon = eps;
      const CylinderCheck r = run_cylinder(k);
      return std::vector<std::string>{format_double(eps), r.pass ? "pass" : "fail", format_double(r.sol.cr_residual),
                                      format_double(r.sol.energy), format_double(r.sol.decay_plus),
                                      format_double(r.sol.decay_minus)};
    };
  } else if (target == "cz") {
    t.header = {"index", "s", "pass", "cz_spectral", "cz_path"};
    row = [&c](double s) {
      const AsymptoticOperator a = AsymptoticOperator::constant(s * Mat2::Identity());
      const int spec = cz_spectral(spectrum(a, c.window, c.N), c.shift).cz;
      const int path = cz_path(path_from_operator(shifted(a, c.shift))).cz;
      return std::vector<std::string>{format_double(s), spec == path ? "pass" : "fail", std::to_string(spec),
                                      std::to_string(path)};
    };
  } else {
    throw UsageError("unknown scan target '" + target + "' (expected torsion, period, cylinder or cz)");
  }
  t.header.push_back("error");

  t.rows.resize(values.size());
  parallel_for(values.size(), worker_count(c), [&](std::size_t i) {
    std::vector<std::string> cells{std::to_string(i)};
    try {
      auto r = row(values[i]);
      cells.insert(cells.end(), r.begin(), r.end());
      cells.push_back("");
    } catch (const std::exception& e) {
      cells.push_back(format_double(values[i]));
      cells.push_back("fail");
      cells.resize(t.header.size() - 1);
      cells.push_back(e.what());
    }
    t.rows[i] = std::move(cells);
  });
  for (const auto& r : t.rows) t.all_ok = t.all_ok && r[2] == "pass" && r.back().empty();
  return t;
}

// ---------------------------------------------------------------------------------------------
// Export

inline const std::vector<std::string>& dataset_names() {
  static const std::vector<std::string> names{"periods", "ladder", "cylinder"};
  return names;
}

inline void export_dataset(const json& report, const std::string& name, std::ostream& out) {
  if (!report.contains("datasets") || !report.at("datasets").contains(name))
    throw MissingSectionError("report has no '" + name + "' dataset");
  const json& d = report.at("datasets").at(name);
  if (name == "periods") {
    CsvWriter w(out, {"theta", "p", "q", "T"});
    for (std::size_t i = 0; i < d.at("theta").size(); ++i)
      w.row({format_double(d["theta"][i].get<double>()), std::to_string(d["p"][i].get<std::int64_t>()),
             std::to_string(d["q"][i].get<std::int64_t>()), format_double(d["T"][i].get<double>())});
  } else if (name == "ladder") {
    write_ladder_csv(out, d);
  } else if (name == "cylinder") {
    write_cylinder_csv(out, d.at("s").get<std::vector<double>>(), d.at("alpha").get<std::vector<double>>(),
                       d.at("rho").get<std::vector<double>>());
  } else {
    throw UsageError("unknown dataset '" + name + "'");
  }
}

/// Writes the requested dataset to --output (or stdout), or every dataset present to --out-dir.
inline int cmd_export(const RunConfig& c, std::ostream& out) {
  if (c.input.empty()) throw UsageError("export needs --input");
  const json report = read_json_file(c.input);
  if (c.dataset != "all") {
    if (c.output.empty()) {
      export_dataset(report, c.dataset, out);
    } else {
      std::ofstream f(c.output);
      if (!f) throw UsageError("cannot write " + c.output);
      export_dataset(report, c.dataset, f);
    }
    return kPass;
  }
  if (c.out_dir.empty()) throw UsageError("export of all datasets needs --out-dir");
  std::filesystem::create_directories(c.out_dir);
  int written = 0;
  for (const auto& name : dataset_names()) {
    if (!report.contains("datasets") || !report["datasets"].contains(name)) continue;
    std::ofstream f(std::filesystem::path(c.out_dir) / (name + ".csv"));
    if (!f) throw UsageError("cannot write into " + c.out_dir);
    export_dataset(report, name, f);
    ++written;
  }
  if (written == 0) throw MissingSectionError("report has no datasets");
  return kPass;
}

// ---------------------------------------------------------------------------------------------
// Dispatch

inline void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
}

/// Main CSV of a report: tori or periods for analyze/torsion, ladder, or the cylinder trace.
inline void write_side_csv(const RunConfig& c, const json& doc) {
  if (c.csv.empty() || !doc.contains("datasets")) return;
  std::ofstream f(c.csv);
  if (!f) throw UsageError("cannot write " + c.csv);
  for (const auto& name : dataset_names())
    if (doc["datasets"].contains(name)) {
      export_dataset(doc, name, f);
      return;
    }
}

inline int run(const RunConfig& c, std::ostream& out) {
  if (c.command == "scan") {
    const ScanTable t = scan(c);
    std::ostringstream s;
    CsvWriter w(s, t.header);
    for (const auto& r : t.rows) w.row(r);
    write_text(c.output, s.str(), out);
    return t.all_ok ? kPass : kFail;
  }
  if (c.command == "export") return cmd_export(c, out);

  Report r;
  if (c.command == "analyze") r = cmd_analyze(c);
  else if (c.command == "torsion") r = cmd_torsion(c);
  else if (c.command == "spectrum") r = cmd_spectrum(c);
  else if (c.command == "cz") r = cmd_cz(c);
  else if (c.command == "index") r = cmd_index(c);
  else if (c.command == "cylinder") r = cmd_cylinder(c);
  else throw UsageError("unknown command '" + c.command + "'");
  write_text(c.output, r.doc.dump(2) + "\n", out);
  write_side_csv(c, r.doc);
  return r.code;
}

/// Numerical resolution problems map to 3; everything else the library rejects is bad input.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ResolutionError*>(&e) || dynamic_cast<const FitFailureError*>(&e) ||
      dynamic_cast<const IntegrationError*>(&e))
    return kResolution;
  return kUsage;
}

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Reeb dynamics, spectra and index arithmetic on torus-invariant contact models", "reeblab"};
  app.set_config("--config", "", "Flat key=value file mirroring the long flags");
  app.require_subcommand(1);
  RunConfig c;

  app.add_option("--model", c.model, "oval or tight")->check(CLI::IsMember({"oval", "tight"}));
  app.add_option("--epsilon", c.epsilon, "Oval parameter in (0, 1/4)");
  app.add_option("--waist", c.waist, "Oval waist width relative to epsilon, in (0, 1)");
  app.add_option("--n", c.n, "Turns of the tight torus");
  app.add_option("--grid", c.grid, "Curve validation grid size");
  app.add_option("--qmax", c.qmax, "Largest |p|, |q| of rational tori");
  app.add_option("--flow-qmax", c.flow_qmax, "Largest |p|, |q| checked by flow integration in analyze");
  app.add_option("--N", c.N, "Fourier discretization size");
  app.add_option("--window", c.window, "Spectral window half-width");
  app.add_option("--constant-s", c.constant_s, "Use S = s I");
  app.add_option("--matrix", c.matrix, "Use constant S = [[a, b], [b, d]] given as a,b,d")->delimiter(',')->expected(3);
  app.add_option("--operator-file", c.operator_file, "JSON operator with samples S");
  app.add_option("--theta", c.theta, "Torus of the orbit operator");
  app.add_option("--cover", c.cover, "Orbit cover multiplicity");
  app.add_option("--shift", c.shift, "Spectral shift c");
  app.add_option("--beta", c.beta, "Scale of beta in J d_theta = beta V");
  app.add_option("--beta-amplitude", c.beta_amplitude, "beta(theta) = beta (1 + amplitude cos 4 pi theta)");
  app.add_option("--rho-mid", c.rho_mid, "rho(0) of the cylinder");
  app.add_option("--a0", c.a0);
  app.add_option("--x0", c.x0);
  app.add_option("--samples", c.samples, "Cylinder grid size");
  app.add_option("--input", c.input, "Input JSON (index: curve data, export: report)");
  app.add_option("--output", c.output, "Report or table path (default stdout)");
  app.add_option("--csv", c.csv, "Also write the main dataset as CSV");
  app.add_option("--out-dir", c.out_dir, "Directory for export of all datasets");
  app.add_option("--dataset", c.dataset, "periods, ladder, cylinder or all")
      ->check(CLI::IsMember({"periods", "ladder", "cylinder", "all"}));
  app.add_option("--target", c.target, "Scan target: torsion, period, cylinder or cz");
  app.add_option("--values", c.values, "Scan grid values")->delimiter(',');
  app.add_option("--range", c.range, "Scan grid lo:hi:count");
  app.add_option("--threads", c.threads, "Workers (0 = all cores); REEBLAB_THREADS overrides");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"analyze", "Validate a model, list rational tori and check periods against the flow"},
      {"torsion", "Verify the oval torsion lemma"},
      {"spectrum", "Spectrum of an asymptotic operator"},
      {"cz", "Conley-Zehnder index by the spectral and path methods"},
      {"index", "Index arithmetic of punctured curve data"},
      {"cylinder", "Holomorphic cylinder family with diagnostics"},
      {"scan", "Run a target over a parameter grid and print a CSV table"},
      {"export", "Write plot-ready CSV from a report"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kUsage;
  }
  c.command = app.get_subcommands().front()->get_name();

  try {
    return run(c, out);
  } catch (const std::exception& e) {
    err << "reeblab " << c.command << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace reeblab::cli
