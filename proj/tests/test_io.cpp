#include <cmath>
#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "reeblab/io.hpp"

using namespace reeblab;

TEST(FormatDouble, RoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, std::sqrt(2.0), -2.5e-300, 6.02214076e23, 0.0}) {
    const std::string s = format_double(x);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), x) << s;
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_TRUE(number(std::nan("")).is_null());
}

TEST(Csv, HeaderRowsAndQuoting) {
  std::ostringstream out;
  CsvWriter w(out, {"a", "b"});
  w.row({"1", "x,y"});
  w.row({"say \"hi\"", ""});
  EXPECT_EQ(out.str(), "a,b\n1,\"x,y\"\n\"say \"\"hi\"\"\",\n");
  EXPECT_THROW(w.row({"1"}), Error);
}

TEST(CurveJson, RoundTrip) {
  std::vector<double> samples(64);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = 1.0 + 0.1 * std::cos(kTwoPi * i / 64.0);
  for (const ProfileCurve& c : {make_oval(0.1), ProfileCurve::tight_torus(2), ProfileCurve::sampled(samples)}) {
    const ProfileCurve back = curve_from_json(json::parse(to_json(c).dump()));
    EXPECT_EQ(back.kind(), c.kind());
    for (double t : {0.0, 0.1, 0.37, 0.8}) {
      EXPECT_NEAR(back.jet(t).f, c.jet(t).f, 1e-14);
      EXPECT_NEAR(back.jet(t).dg, c.jet(t).dg, 1e-12);
    }
  }
  EXPECT_THROW(curve_from_json(json{{"kind", "spiral"}}), UsageError);
}

TEST(SpectrumJson, RoundTrip) {
  const SpectralData d = spectrum(AsymptoticOperator::constant(2.0 * Mat2::Identity()), kDefaultWindow, 64);
  const SpectralData back = spectrum_from_json(json::parse(to_json(d).dump()));
  ASSERT_EQ(back.entries.size(), d.entries.size());
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].eigenvalue, d.entries[i].eigenvalue);
    EXPECT_EQ(back.entries[i].winding, d.entries[i].winding);
    EXPECT_EQ(back.entries[i].multiplicity, d.entries[i].multiplicity);
  }
  std::ostringstream out;
  write_ladder_csv(out, to_json(d)["spectrum"]);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "eigenvalue,winding,multiplicity");
}

TEST(OperatorJson, SpecForms) {
  const AsymptoticOperator a = operator_from_spec(json{{"constant_s", 1.5}});
  EXPECT_NEAR(a.S(0.3)(0, 0), 1.5, 1e-15);
  const AsymptoticOperator m = operator_from_spec(json::parse(R"({"matrix": [[1.0, 0.5], [0.5, 2.0]]})"));
  EXPECT_NEAR(m.S(0.7)(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(m.S(0.7)(1, 1), 2.0, 1e-15);
  const AsymptoticOperator o = operator_from_spec(json{{"oval_torus", {{"epsilon", 0.1}, {"theta", 0.25}}}});
  EXPECT_TRUE(o.S(0.0).allFinite());
  EXPECT_THROW(operator_from_spec(json{{"nothing", 1}}), UsageError);
}

TEST(OperatorJson, SamplesRoundTrip) {
  const AsymptoticOperator a = AsymptoticOperator::constant((Mat2() << 1.0, 0.2, 0.2, -0.5).finished());
  const AsymptoticOperator b = operator_from_json(json::parse(to_json(a, 32).dump()));
  for (double t : {0.0, 0.21, 0.5}) EXPECT_NEAR((a.S(t) - b.S(t)).norm(), 0.0, 1e-12);
}

TEST(CurveData, ReadsRecordedFields) {
  const json j = json::parse(R"({"genus": 0, "wind_pi": 0, "punctures": [
      {"class": "unconstrained", "wind_e": 0, "alpha_minus": 0, "parity": 1},
      {"class": "constrained", "wind_e": -1, "alpha_minus": -1, "parity": 1}]})");
  const PuncturedCurveData d = curve_data_from_json(j, 64);
  ASSERT_EQ(d.punctures.size(), 2u);
  EXPECT_EQ(d.punctures[1].cls, PunctureClass::Constrained);
  EXPECT_EQ(*d.punctures[1].alpha_minus, -1);
  EXPECT_EQ(to_json(d)["punctures"][0]["class"], "unconstrained");
  EXPECT_THROW(puncture_class_from_string("sideways"), UsageError);
}

TEST(CurveData, ResolvesSpectrumRefs) {
  const PuncturedCurveData d = curve_data_from_json(read_json_file(REEBLAB_DATA_DIR "/u0.json"), 256);
  ASSERT_EQ(d.punctures.size(), 2u);
  for (const auto& p : d.punctures) {
    ASSERT_TRUE(p.parity);
    EXPECT_EQ(*p.parity, 1);
    EXPECT_EQ(*p.alpha_minus, 0);
  }
}

TEST(ReadJson, Errors) {
  EXPECT_THROW(read_json_file("/nonexistent/reeblab.json"), UsageError);
}

TEST(ToriCsv, Columns) {
  std::ostringstream out;
  const ContactModel m = ContactModel::tight(1);
  write_tori_csv(out, rational_tori(m, 1));
  std::istringstream in(out.str());
  std::string header, first;
  std::getline(in, header);
  EXPECT_EQ(header, "theta0,p,q,T,classification");
  std::getline(in, first);
  EXPECT_FALSE(first.empty());
}

TEST(TorsionJson, Fields) {
  const json j = to_json(verify_torsion_lemma(make_oval(0.1), 4));
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_EQ(j["special_periods"].size(), 2u);
  EXPECT_EQ(j["diamond_case_log"].size(), j["torus_count"].get<std::size_t>());
}

TEST(CylinderCsv, Trace) {
  std::ostringstream out;
  write_cylinder_csv(out, {0.0, 1.0}, {0.0, 0.1}, {0.5, 0.4});
  EXPECT_EQ(out.str(), "s,alpha,rho\n0,0,0.5\n1,0.1,0.4\n");
}

TEST(CurveJson, SampleFile) {
  const ProfileCurve c = curve_from_json(read_json_file(REEBLAB_DATA_DIR "/oval_0.1.json"));
  const ProfileCurve ref = make_oval(0.1);
  for (double t : {0.0, 0.2, 0.25, 0.6}) EXPECT_NEAR(c.jet(t).g, ref.jet(t).g, 1e-14);
}
