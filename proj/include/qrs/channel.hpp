#pragma once

#include <string>
#include <vector>

#include "qrs/tensor.hpp"

namespace qrs {

// Completely positive trace-preserving map between two layouts, stored as an
// ordered Kraus list.  The order is normative: the canonical dilation is
// V = sum_i K_i tensor |i>_env, so the environment basis is the list index.
struct QuantumChannel {
  SystemLayout in;
  SystemLayout out;
  std::vector<Mat> kraus;

  QuantumChannel() = default;
  QuantumChannel(SystemLayout in_lay, SystemLayout out_lay, std::vector<Mat> ks);

  std::size_t dim_in() const { return in.dim(); }
  std::size_t dim_out() const { return out.dim(); }
};

struct StinespringIsometry {
  SystemLayout in;
  SystemLayout out;        // channel output factors (without environment)
  std::string env_label;
  std::size_t env_dim = 1;

  // Isometry from `in` to `out (+) env`, shape (out.dim()*env_dim) x in.dim().
  LinearOperator isometry;
};

// Validity report for a Kraus list.  Never throws: pass iff the
// trace-preservation residual and the most negative Choi eigenvalue are
// within tol (default 1e-9 per the numeric policy).
struct CptpReport {
  double tp_residual = 0.0;        // max-abs entry of (sum K^dag K) - I
  double cp_min_eigenvalue = 0.0;  // smallest Choi eigenvalue
  bool pass = false;
};

CptpReport validate_cptp(const QuantumChannel& ch, double tol = Tolerances::cptp);

// Throwing form used on deserialized input: invalid_input when validate_cptp
// fails.
void require_cptp(const QuantumChannel& ch, double tol = Tolerances::cptp);

// Applies the channel to the factors of `rho` named by ch.in (identity
// elsewhere).  The first acted-on factor's slot receives ch.out's factors.
DensityOperator apply_channel(const QuantumChannel& ch, const DensityOperator& rho);

// V = sum_i K_i tensor |i>_env over the stored Kraus order.
StinespringIsometry stinespring_dilation(const QuantumChannel& ch,
                                         const std::string& env_label = "E");

// Channel A -> env obtained by tracing the output instead of the
// environment of the canonical dilation.
QuantumChannel complementary_channel(const QuantumChannel& ch,
                                     const std::string& env_label = "G");

// Choi operator on in (+) out: J = sum_ij |i><j|_in tensor Ch(|i><j|).
// Trace = dim_in; partial trace over the output factor equals the identity.
Mat to_choi(const QuantumChannel& ch);

// Reconstructs a channel from a Choi operator (eigenvalue cutoff 1e-12,
// descending eigenvalues, deterministic eigenvector phases).  This is also
// the canonicalization path: from_choi(to_choi(ch)) is the canonical Kraus
// form of ch.
QuantumChannel from_choi(const Mat& choi, const SystemLayout& in,
                         const SystemLayout& out);

QuantumChannel canonical_kraus(const QuantumChannel& ch);

// Distance used for channel equality: (1/2) || J1 - J2 ||_1 / dim_in.
double channel_distance(const QuantumChannel& a, const QuantumChannel& b);

// Builds a channel from an isometry column map (single Kraus operator).
QuantumChannel channel_from_isometry(const LinearOperator& v);

// Channel given by an isometry into out (+) env, tracing the environment:
// Kraus K_i = (I_out (+) <i|_env) V.
QuantumChannel channel_from_stinespring(const Mat& v, const SystemLayout& in,
                                        const SystemLayout& out, std::size_t env_dim);

// Identity channel on a layout.
QuantumChannel identity_channel(const SystemLayout& lay);

// Tensor product of two channels (factor labels must stay disjoint).
QuantumChannel tensor(const QuantumChannel& a, const QuantumChannel& b);

// n-fold tensor power with copy-suffixed labels ("A" -> "A#1", "A#2", ...).
// For n == 1 returns the channel unchanged.
QuantumChannel tensor_power(const QuantumChannel& ch, std::size_t n);

// Copy-suffixed tensor power of a state, matching tensor_power's labels.
DensityOperator tensor_power(const DensityOperator& rho, std::size_t n);

std::string copy_label(const std::string& base, std::size_t copy_index);

}  // namespace qrs
