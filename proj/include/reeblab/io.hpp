#pragma once

// JSON and CSV forms of curves, spectra, reports and curve data. JSON objects use sorted keys so
// that identical inputs give byte-identical documents.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reeblab/curve_index.hpp"
#include "reeblab/errors.hpp"
#include "reeblab/profile_model.hpp"
#include "reeblab/reeb_dynamics.hpp"
#include "reeblab/spectral.hpp"
#include "reeblab/torsion_lab.hpp"

namespace reeblab {

using json = nlohmann::json;

/// Shortest decimal form that reads back to the same double; "inf", "-inf", "nan" otherwise.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

/// Non-finite values become null in JSON.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------------------------
// CSV

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out), columns_(header.size()) {
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw Error("csv row has the wrong number of cells");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << '\n';
  }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  std::ostream& out_;
  std::size_t columns_;
};

// ---------------------------------------------------------------------------------------------
// Curves

inline json to_json(const ProfileCurve& c) {
  json j;
  j["grid_size"] = c.grid_size();
  switch (c.kind()) {
    case CurveKind::Oval:
      j["kind"] = "oval";
      j["epsilon"] = c.epsilon();
      j["waist"] = c.waist();
      break;
    case CurveKind::TightTorus:
      j["kind"] = "tight";
      j["n"] = c.n();
      break;
    case CurveKind::Sampled:
      j["kind"] = "sampled";
      j["h_samples"] = c.h_samples();
      if (c.epsilon() > 0) j["epsilon"] = c.epsilon();
      break;
    case CurveKind::Radial:
      throw Error("closed-form radial curves have no JSON form; sample them first");
  }
  return j;
}

/// Reads {"kind": "oval" | "tight" | "sampled", "epsilon", "waist", "n", "h_samples", "grid_size"}.
/// Ovals go through the checked constructor.
inline ProfileCurve curve_from_json(const json& j) {
  const std::string kind = j.value("kind", "");
  const int grid = j.value("grid_size", ProfileCurve::kDefaultGrid);
  if (kind == "oval") {
    if (!j.contains("epsilon")) throw UsageError("oval curve needs epsilon");
    return make_oval(j.at("epsilon").get<double>(), OvalShape{j.value("waist", OvalShape{}.waist)}, grid);
  }
  if (kind == "tight") return ProfileCurve::tight_torus(j.value("n", 1), grid);
  if (kind == "sampled") {
    if (!j.contains("h_samples")) throw UsageError("sampled curve needs h_samples");
    std::optional<double> eps;
    if (j.contains("epsilon")) eps = j.at("epsilon").get<double>();
    return ProfileCurve::sampled(j.at("h_samples").get<std::vector<double>>(), grid, eps);
  }
  throw UsageError("unknown curve kind '" + kind + "'");
}

inline json to_json(const ValidationReport& r) {
  return json{{"pass", r.pass()},
              {"contact_ok", r.contact_ok},
              {"positive_ok", r.positive_ok},
              {"periodic_ok", r.periodic_ok},
              {"convex", r.convex},
              {"symmetry_ok", r.symmetry_ok},
              {"min_D", number(r.min_D)},
              {"min_radius", number(r.min_radius)},
              {"min_convexity", number(r.min_convexity)},
              {"periodicity_defect", number(r.periodicity_defect)},
              {"symmetry_defect", number(r.symmetry_defect)},
              {"failures", r.failures}};
}

// ---------------------------------------------------------------------------------------------
// Tori

inline json to_json(const InvariantTorus& t) {
  json j{{"theta", t.theta}, {"rational", t.rational}, {"classification", to_string(t.classification)}};
  if (t.rational) {
    j["p"] = t.p;
    j["q"] = t.q;
    j["period"] = number(t.period);
  }
  j["slope"] = number(t.slope);
  return j;
}

inline void write_tori_csv(std::ostream& out, const std::vector<InvariantTorus>& tori) {
  CsvWriter w(out, {"theta0", "p", "q", "T", "classification"});
  for (const auto& t : tori)
    w.row({format_double(t.theta), std::to_string(t.p), std::to_string(t.q), format_double(t.period),
           to_string(t.classification)});
}

// ---------------------------------------------------------------------------------------------
// Operators and spectra

inline json to_json(const AsymptoticOperator& a, int samples = 64) {
  json s = json::array();
  for (const Mat2& m : a.samples(samples)) s.push_back({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}});
  return json{{"label", a.label()}, {"provenance", to_string(a.provenance())}, {"S", s}};
}

/// Reads {"S": [2x2 matrices at t = i/m]}; the loop is the trigonometric interpolant.
inline AsymptoticOperator operator_from_json(const json& j) {
  if (!j.contains("S") || !j.at("S").is_array() || j.at("S").empty()) throw UsageError("operator needs samples S");
  std::vector<Mat2> samples;
  for (const auto& m : j.at("S")) {
    Mat2 s;
    s << m.at(0).at(0).get<double>(), m.at(0).at(1).get<double>(), m.at(1).at(0).get<double>(),
        m.at(1).at(1).get<double>();
    samples.push_back(s);
  }
  return AsymptoticOperator::explicit_loop(trigonometric_loop(std::move(samples)), j.value("label", "explicit"));
}

inline json to_json(const SpectralData& d) {
  json entries = json::array();
  for (const auto& e : d.entries)
    entries.push_back({{"eigenvalue", e.eigenvalue}, {"winding", e.winding}, {"multiplicity", e.multiplicity}});
  return json{{"N", d.N}, {"window", d.window}, {"bandwidth", d.bandwidth}, {"spectrum", entries}};
}

inline SpectralData spectrum_from_json(const json& j) {
  SpectralData d;
  d.N = j.value("N", 0);
  d.window = j.value("window", 0.0);
  d.bandwidth = j.value("bandwidth", 0);
  for (const auto& e : j.at("spectrum"))
    d.entries.push_back({e.at("eigenvalue").get<double>(), e.value("multiplicity", 1), e.at("winding").get<int>()});
  return d;
}

inline void write_ladder_csv(std::ostream& out, const json& spectrum) {
  CsvWriter w(out, {"eigenvalue", "winding", "multiplicity"});
  for (const auto& e : spectrum)
    w.row({format_double(e.at("eigenvalue").get<double>()), std::to_string(e.at("winding").get<int>()),
           std::to_string(e.at("multiplicity").get<int>())});
}

inline json to_json(const CZResult& r) {
  return json{{"alpha_minus", r.alpha_minus}, {"alpha_plus", r.alpha_plus}, {"parity", r.parity},
              {"cz", r.cz},                   {"shift", r.shift},           {"method", r.method == CZMethod::Spectral ? "spectral" : "path"}};
}

// ---------------------------------------------------------------------------------------------
// Torsion lab

inline json to_json(const TorsionReport& r) {
  json log = json::array();
  for (const auto& d : r.diamond_case_log)
    log.push_back({{"theta", d.theta},
                   {"p", d.p},
                   {"q", d.q},
                   {"period", d.period},
                   {"branch", to_string(d.branch)},
                   {"bound", d.bound},
                   {"bound_ok", d.bound_ok}});
  json j{{"epsilon", r.epsilon},
         {"qmax", r.qmax},
         {"applicable", r.applicable},
         {"pass", r.pass()},
         {"torus_count", r.torus_count},
         {"morse_bott_ok", r.morse_bott_ok},
         {"special_field_ok", r.special_field_ok},
         {"special_periods", {r.special_periods[0], r.special_periods[1]}},
         {"min_other_period", number(r.min_other_period)},
         {"case_bounds_ok", r.case_bounds_ok},
         {"diamond_case_log", log}};
  if (!r.applicable) j["reason"] = r.reason;
  if (std::isfinite(r.min_other_period))
    j["witness"] = {{"theta", r.witness.theta}, {"p", r.witness.p}, {"q", r.witness.q}};
  return j;
}

inline json to_json(const CylinderSolution& s, bool with_samples = true) {
  json j{{"a0", s.a0},
         {"x0", s.x0},
         {"rho_mid", s.rho_mid},
         {"beta", s.beta_label},
         {"samples", s.s.size()},
         {"cr_residual", number(s.cr_residual)},
         {"energy", number(s.energy)},
         {"decay_plus", number(s.decay_plus)},
         {"decay_minus", number(s.decay_minus)}};
  if (!s.s.empty()) j["s_range"] = {s.s.front(), s.s.back()};
  if (with_samples) j["trace"] = {{"s", s.s}, {"alpha", s.alpha}, {"rho", s.rho}};
  return j;
}

inline void write_cylinder_csv(std::ostream& out, const std::vector<double>& s, const std::vector<double>& alpha,
                               const std::vector<double>& rho) {
  if (alpha.size() != s.size() || rho.size() != s.size()) throw Error("cylinder trace columns differ in length");
  CsvWriter w(out, {"s", "alpha", "rho"});
  for (std::size_t i = 0; i < s.size(); ++i) w.row({format_double(s[i]), format_double(alpha[i]), format_double(rho[i])});
}

// ---------------------------------------------------------------------------------------------
// Punctured curve data

/// Named operator used by "spectrum_ref": {"constant_s": s}, {"matrix": [[a, b], [b, d]]},
/// {"S": [...]} or {"oval_torus": {"epsilon", "theta", "cover"}} for the torus through theta.
inline AsymptoticOperator operator_from_spec(const json& j) {
  if (j.contains("constant_s")) return AsymptoticOperator::constant(j.at("constant_s").get<double>() * Mat2::Identity());
  if (j.contains("matrix")) {
    const auto& m = j.at("matrix");
    Mat2 s;
    s << m.at(0).at(0).get<double>(), m.at(0).at(1).get<double>(), m.at(1).at(0).get<double>(),
        m.at(1).at(1).get<double>();
    return AsymptoticOperator::constant(s);
  }
  if (j.contains("S")) return operator_from_json(j);
  if (j.contains("oval_torus")) {
    const auto& o = j.at("oval_torus");
    const ContactModel model = ContactModel::thickened(make_oval(o.at("epsilon").get<double>()));
    return operator_from_orbit(model, torus_at(model, o.value("theta", 0.25)), constant_beta(), o.value("cover", 1));
  }
  throw UsageError("operator spec needs one of constant_s, matrix, S, oval_torus");
}

inline PunctureClass puncture_class_from_string(const std::string& s) {
  if (s == "constrained") return PunctureClass::Constrained;
  if (s == "unconstrained") return PunctureClass::Unconstrained;
  throw UsageError("unknown puncture class '" + s + "'");
}

/// Reads {"genus", "wind_pi", "delta", "c1", "simple_distinct_orbits", "punctures": [{"class", "wind_e",
/// "spectrum_ref" | "alpha_minus", "parity"}], "spectra": {name: operator spec}}. Punctures with a
/// spectrum_ref get their weight from select_constraints; the others keep the recorded alpha_minus and parity.
inline PuncturedCurveData curve_data_from_json(const json& j, int N = 512, double window = kDefaultWindow) {
  PuncturedCurveData d;
  d.genus = j.value("genus", 0);
  d.wind_pi = j.value("wind_pi", 0);
  d.delta = j.value("delta", 0);
  d.c1 = j.value("c1", 0);
  d.simple_distinct_orbits = j.value("simple_distinct_orbits", true);
  std::map<std::string, std::shared_ptr<const SpectralData>> spectra;
  const json punctures = j.value("punctures", json::array());
  for (std::size_t z = 0; z < punctures.size(); ++z) {
    const auto& p = punctures[z];
    PunctureRecord rec;
    rec.cls = puncture_class_from_string(p.value("class", "constrained"));
    rec.wind_e = p.value("wind_e", 0);
    if (p.contains("spectrum_ref")) {
      const std::string name = p.at("spectrum_ref").get<std::string>();
      if (!spectra.count(name)) {
        if (!j.contains("spectra") || !j.at("spectra").contains(name))
          throw UsageError("puncture " + std::to_string(z) + ": unknown spectrum '" + name + "'");
        spectra[name] = std::make_shared<const SpectralData>(spectrum(operator_from_spec(j.at("spectra").at(name)), window, N));
      }
      rec.spectrum = spectra[name];
      rec = select_constraints({rec}).front();
    } else {
      if (p.contains("alpha_minus")) rec.alpha_minus = p.at("alpha_minus").get<int>();
      if (p.contains("weight")) rec.weight = p.at("weight").get<double>();
    }
    if (p.contains("parity") && !rec.parity) rec.parity = p.at("parity").get<int>();
    d.punctures.push_back(std::move(rec));
  }
  d.check();
  return d;
}

inline json to_json(const PuncturedCurveData& d) {
  json punctures = json::array();
  for (const auto& p : d.punctures) {
    json r{{"class", to_string(p.cls)}, {"wind_e", p.wind_e}};
    if (p.weight) r["weight"] = *p.weight;
    if (p.alpha_minus) r["alpha_minus"] = *p.alpha_minus;
    if (p.parity) r["parity"] = *p.parity;
    punctures.push_back(r);
  }
  return json{{"genus", d.genus},   {"wind_pi", d.wind_pi}, {"delta", d.delta},
              {"c1", d.c1},         {"punctures", punctures},
              {"simple_distinct_orbits", d.simple_distinct_orbits}};
}

}  // namespace reeblab
