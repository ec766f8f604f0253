#pragma once

// Integer index bookkeeping for punctured holomorphic curves: constraint weights, the constrained
// normal Chern number, Fredholm index, covers and the adjunction identities.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reeblab/errors.hpp"
#include "reeblab/spectral.hpp"

namespace reeblab {

enum class PunctureClass { Constrained, Unconstrained };

inline std::string to_string(PunctureClass c) {
  return c == PunctureClass::Constrained ? "constrained" : "unconstrained";
}

struct PunctureRecord {
  PunctureClass cls = PunctureClass::Constrained;
  int wind_e = 0;
  std::shared_ptr<const SpectralData> spectrum;
  std::optional<double> weight;       // c_z
  std::optional<int> alpha_minus;     // alpha_-(gamma_z - c_z)
  std::optional<int> parity;          // p(gamma_z - c_z)
};

struct PuncturedCurveData {
  int genus = 0;
  std::vector<PunctureRecord> punctures;
  int wind_pi = 0;
  int delta = 0;
  int c1 = 0;
  /// Hypothesis of the simplified adjunction formula: simply covered, distinct asymptotic orbits.
  bool simple_distinct_orbits = true;

  void check() const {
    if (genus < 0) throw Error("genus must be non-negative");
    if (wind_pi < 0) throw Error("wind_pi must be non-negative");
    if (delta < 0) throw Error("delta must be non-negative");
  }
};

/// A Morse-Bott family of dimension >= 2 meets the curve iff wind(e_z) < 0, in the frame where
/// the kernel sections have winding zero.
inline bool morse_bott_family_intersected(int wind_e) { return wind_e < 0; }

/// Gamma_C holds the punctures at nondegenerate orbits and at Morse-Bott orbits whose family the
/// curve intersects.
inline PunctureClass classify_puncture(bool nondegenerate, int wind_e) {
  return nondegenerate || morse_bott_family_intersected(wind_e) ? PunctureClass::Constrained
                                                                : PunctureClass::Unconstrained;
}

/// Chooses c_z for every puncture with a spectrum and records alpha_- and the parity at c_z.
/// Constrained: mu* is the largest eigenvalue with winding wind_e, which has to be negative;
/// c_z = mu* + min(gap above mu*, |mu*|) / 2. Unconstrained: half the smallest positive eigenvalue.
inline std::vector<PunctureRecord> select_constraints(std::vector<PunctureRecord> punctures) {
  for (std::size_t z = 0; z < punctures.size(); ++z) {
    auto& rec = punctures[z];
    const std::string where = "puncture " + std::to_string(z);
    if (!rec.spectrum) throw NoValidWeightError(where + " has no spectrum");
    const auto& entries = rec.spectrum->entries;
    double c = 0.0;
    if (rec.cls == PunctureClass::Constrained) {
      std::optional<std::size_t> star;
      for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].winding == rec.wind_e) star = i;
      if (!star) throw NoValidWeightError(where + ": no eigenvalue with winding " + std::to_string(rec.wind_e));
      const double mu = entries[*star].eigenvalue;
      if (!(mu < -kOnSpectrumTol))
        throw NoValidWeightError(where + ": largest eigenvalue with winding " + std::to_string(rec.wind_e) +
                                 " is not negative");
      if (*star + 1 >= entries.size()) throw WindowTooSmallError(where + ": no eigenvalue above mu*");
      const double gap = entries[*star + 1].eigenvalue - mu;
      c = mu + std::min(gap, std::abs(mu)) / 2.0;
    } else {
      std::optional<double> smallest;
      for (const auto& e : entries)
        if (e.eigenvalue > kOnSpectrumTol) {
          smallest = e.eigenvalue;
          break;
        }
      if (!smallest) throw NoValidWeightError(where + ": no positive eigenvalue in the window");
      c = *smallest / 2.0;
    }
    const AlphaParity ap = alpha_parity(*rec.spectrum, c);
    if (rec.cls == PunctureClass::Constrained && (ap.alpha_minus != rec.wind_e || ap.alpha_plus != rec.wind_e + 1))
      throw NoValidWeightError(where + ": selected weight fails the winding conditions");
    rec.weight = c;
    rec.alpha_minus = ap.alpha_minus;
    rec.parity = ap.parity;
  }
  return punctures;
}

/// c_N = wind_pi + sum_z (alpha_-(gamma_z - c_z) - wind(e_z)).
inline int normal_chern(const PuncturedCurveData& data) {
  data.check();
  int c = data.wind_pi;
  for (std::size_t z = 0; z < data.punctures.size(); ++z) {
    const auto& rec = data.punctures[z];
    if (!rec.alpha_minus) throw Error("puncture " + std::to_string(z) + " has no alpha_minus");
    c += *rec.alpha_minus - rec.wind_e;
  }
  return c;
}

/// Number of punctures with even parity at their weight.
inline int even_punctures(const PuncturedCurveData& data) {
  int n = 0;
  for (std::size_t z = 0; z < data.punctures.size(); ++z) {
    const auto& rec = data.punctures[z];
    if (!rec.parity) throw MissingParityError("puncture " + std::to_string(z) + " has no parity record");
    if (*rec.parity != 0 && *rec.parity != 1) throw Error("parity must be 0 or 1");
    if (*rec.parity == 0) ++n;
  }
  return n;
}

/// ind = 2 c_N + 2 - 2g - #Gamma_0.
inline int fredholm_index(const PuncturedCurveData& data) {
  return 2 * normal_chern(data) + 2 - 2 * data.genus - even_punctures(data);
}

inline int closed_sphere_index(int c1) { return -2 + 2 * c1; }

/// Index of a k-fold cover of a curve with index ind0.
inline int cover_index(int ind0, int k) {
  if (k < 1) throw Error("cover multiplicity must be positive");
  return k * ind0 + 2 * (k - 1);
}

enum class AdjunctionVerdict { EmbeddedCompatible, Singular, ParityViolation, NegativeDelta };

inline std::string to_string(AdjunctionVerdict v) {
  switch (v) {
    case AdjunctionVerdict::EmbeddedCompatible: return "embedded-compatible";
    case AdjunctionVerdict::Singular: return "singular";
    case AdjunctionVerdict::ParityViolation: return "parity-violation";
    case AdjunctionVerdict::NegativeDelta: return "negative-delta";
  }
  return "unknown";
}

struct AdjunctionResult {
  int self_intersection = 0;
  std::optional<int> delta;  // empty when no integer delta fits
  AdjunctionVerdict verdict = AdjunctionVerdict::EmbeddedCompatible;
};

/// i(u; c | u; c) = 2 delta + c_N for simply covered curves with distinct asymptotic orbits.
inline AdjunctionResult adjunction(const PuncturedCurveData& data) {
  if (!data.simple_distinct_orbits)
    throw Error("adjunction needs simply covered curves with distinct asymptotic orbits");
  AdjunctionResult r;
  r.self_intersection = 2 * data.delta + normal_chern(data);
  r.delta = data.delta;
  r.verdict = data.delta == 0 ? AdjunctionVerdict::EmbeddedCompatible : AdjunctionVerdict::Singular;
  return r;
}

/// Closed curves: v.v = 2 delta + c1 - 2. Reports a parity violation when no integer delta
/// solves the identity.
inline AdjunctionResult closed_adjunction(int self_intersection, int c1) {
  AdjunctionResult r;
  r.self_intersection = self_intersection;
  const int twice_delta = self_intersection - c1 + 2;
  if (twice_delta % 2 != 0) {
    r.verdict = AdjunctionVerdict::ParityViolation;
    return r;
  }
  if (twice_delta < 0) {
    r.verdict = AdjunctionVerdict::NegativeDelta;
    return r;
  }
  r.delta = twice_delta / 2;
  r.verdict = *r.delta == 0 ? AdjunctionVerdict::EmbeddedCompatible : AdjunctionVerdict::Singular;
  return r;
}

}  // namespace reeblab
