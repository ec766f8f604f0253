#pragma once

#include <stdexcept>
#include <string>

namespace reeblab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// profile_model
class ConstructionError : public Error {
 public:
  using Error::Error;
};

// reeb_dynamics
class NonconvexModelError : public Error {
 public:
  using Error::Error;
};
class SignConventionError : public Error {
 public:
  using Error::Error;
};
class IntegrationError : public Error {
 public:
  using Error::Error;
};

// spectral
class InvalidOperatorError : public Error {
 public:
  using Error::Error;
};
class NonsymplecticPathError : public Error {
 public:
  using Error::Error;
};
/// Raised when the discretized spectrum violates the winding structure, which
/// means the Fourier truncation is too coarse for the requested window.
class ResolutionError : public Error {
 public:
  using Error::Error;
};
class VanishingLoopError : public Error {
 public:
  using Error::Error;
};
class OnSpectrumError : public Error {
 public:
  using Error::Error;
};
class WindowTooSmallError : public Error {
 public:
  using Error::Error;
};
class DegenerateEndpointError : public Error {
 public:
  using Error::Error;
};

// curve_index
class NoValidWeightError : public Error {
 public:
  using Error::Error;
};
class MissingParityError : public Error {
 public:
  using Error::Error;
};

// torsion_lab
class FitFailureError : public Error {
 public:
  using Error::Error;
};

// cli / io
class UsageError : public Error {
 public:
  using Error::Error;
};
class MissingSectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace reeblab
