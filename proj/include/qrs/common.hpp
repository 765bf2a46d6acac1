#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qrs {

using cxd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr const char* kToolName = "qrs";
inline constexpr const char* kToolVersion = "1.0.0";

// Numerical policy shared across modules.  These are part of the public
// contract of the toolkit: file I/O, entropy clamping and canonical Kraus
// forms all depend on them, so they live in one place.
struct Tolerances {
  // Eigenvalues in [-eig_clamp_negative, 0) are clamped to 0 before
  // logarithms; anything more negative is an invalid-state error.
  static constexpr double eig_clamp_negative = 1e-12;
  // Eigenvalue cutoff for rank decisions (Choi spectra, purifier dim).
  static constexpr double rank_cutoff = 1e-12;
  // Trace-preservation / isometry residual allowance.
  static constexpr double cptp = 1e-9;
  // Block-merge tolerance on algebra eigenvalue splittings.
  static constexpr double block_merge = 1e-7;
};

// Error type for malformed inputs (bad layouts, non-states, bad JSON).
// The CLI maps this to exit code 1.
class invalid_input : public std::runtime_error {
 public:
  explicit invalid_input(const std::string& what) : std::runtime_error(what) {}
};

// Error type for internal contract violations (failed certification,
// non-convergent decompositions).
class numeric_failure : public std::runtime_error {
 public:
  explicit numeric_failure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qrs
