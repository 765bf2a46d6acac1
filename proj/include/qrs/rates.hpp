#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrs/channel.hpp"
#include "qrs/entropy.hpp"
#include "qrs/ki.hpp"
#include "qrs/stiefel.hpp"
#include "qrs/tensor.hpp"

namespace qrs {

// Optimizer knobs shared by the rate functionals.  The fidelity constraint is
// enforced with an augmented penalty: each stage minimizes
//   objective + (1/(2 mu)) * (max(0, lambda + mu c)^2 - lambda^2),
// where c = (1 - gamma_opt) - fidelity is the constraint defect, then updates
// lambda <- max(0, lambda + mu c) and mu <- mu * penalty_growth.
struct OptimizerConfig {
  int restarts = 16;             // restart 0 always starts at the feasible fallback
  int max_iterations = 150;      // descent iterations per penalty stage
  std::uint64_t seed = 7;        // master seed; restart r uses derive_seed(seed, r)
  double penalty_initial = 1e2;  // mu of the first stage
  double penalty_growth = 10.0;
  int penalty_stages = 4;
  double gradient_tolerance = 1e-8;  // descent stops below this gradient norm
  std::size_t dim_e = 0;       // encoder environment dimension (0: |A| * |BK|)
  std::size_t dim_eprime = 0;  // retained environment output dimension (0: dim_e)
};

// A rate computation: a source state shared between the channel-input factors
// and any reference factors, the channel to simulate, the fidelity slack
// gamma, and the number of i.i.d. copies optimized jointly (values are
// reported per copy; for copies > 1 the result is an upper bound on the
// regularized quantity).
struct RateQuery {
  DensityOperator source;
  QuantumChannel channel;
  // Channel output factors retained on the encoding side (the feedback
  // registers K); the remaining outputs are the transmitted registers B.
  std::vector<std::string> feedback_labels;
  double gamma = 0.0;
  int copies = 1;  // 1..3
  OptimizerConfig optimizer;
  // Optional warm start: [encoder] for the assisted functional or
  // [encoder, post-map] for the unassisted one.  It is evaluated directly as
  // an extra candidate (so feasible warm starts can only improve the result)
  // and also seeds restart 1's initial point.
  std::vector<QuantumChannel> warm_start;
};

struct RestartRecord {
  int index = 0;
  double value = 0.0;     // bits per copy at this restart's best feasible iterate
  double fidelity = 0.0;  // constraint fidelity at that iterate
  bool feasible = false;  // some iterate met the internal feasibility bar
  bool certified = false; // candidate survived the independent recomputation
  int iterations = 0;     // descent iterations spent
};

struct RateResult {
  double value = 0.0;  // bits per copy
  // "certified": the reported value comes from a candidate that passed the
  // independent recomputation (fidelity >= 1 - gamma - 1e-6 and value match
  // within 1e-8).  "fallback": no candidate certified; the reported value is
  // the always-feasible construction's, flagged so callers can distrust it.
  std::string status;
  double achieved_fidelity = 0.0;
  double constraint_residual = 0.0;  // max(0, (1 - gamma) - achieved_fidelity)
  double recompute_gap = 0.0;        // |claimed value - recomputed value|
  std::vector<QuantumChannel> channels;  // [encoder] or [encoder, post-map]
  std::vector<RestartRecord> restarts;
  double wall_seconds = 0.0;
  int copies = 1;
  double gamma = 0.0;
  double gamma_effective = 0.0;  // max(gamma, 1e-6)
};

// Geometry of the encoder optimization.  The (copy-expanded) source state is
// purified with a fresh purifier factor; an encoder channel from the input
// factors A to the transmitted/kept output factors B,K is represented by a
// Stinespring isometry V : A -> B K E with environment E, and every figure of
// merit is evaluated on the global pure state (V (x) I)|psi>.
//
// All objective methods use the StiefelObjective gradient convention
// df(Delta) = Re tr(G^dag Delta) and return m-copy totals (no per-copy
// division).
class EncoderProblem {
 public:
  EncoderProblem(const DensityOperator& source, const QuantumChannel& channel,
                 const std::vector<std::string>& feedback_labels, int copies,
                 std::size_t dim_e = 0, std::size_t dim_eprime = 0);

  // Copy-expanded problem data.
  const DensityOperator& source() const { return rho_; }
  const QuantumChannel& channel() const { return chan_; }
  int copies() const { return copies_; }
  std::size_t dim_e() const { return dim_e_; }
  std::size_t dim_eprime() const { return dim_eprime_; }

  // Encoder isometry shape: (dim(BK) * dim_e) x dim(A).
  std::size_t v_rows() const { return vout_.dim(); }
  std::size_t v_cols() const { return chan_.in.dim(); }
  // Post-map isometry shape: (dim_eprime * dim_e) x dim_e (the post map's
  // own environment has dimension dim_e).
  std::size_t u_rows() const { return dim_eprime_ * dim_e_; }
  std::size_t u_cols() const { return dim_e_; }

  // Global pure state (V (x) I)|psi>, layout [B.., K.., E, references..].
  Ket global_state(const Mat& v) const;
  // Same with V extended by extra trailing output factors (row index
  // v_row * extra.dim() + extra_index); used for flagged mixtures.
  Ket extended_global_state(const Mat& v_ext, const SystemLayout& extra) const;

  // (1/2) I(B : references) of the global state, in bits.
  double half_mutual_information(const Mat& v, Mat* grad = nullptr) const;

  // Uhlmann fidelity between the channel target sigma^{BKR} and the B,K,R
  // marginal of the global state (R excludes the purifier).
  double fidelity(const Mat& v, Mat* grad = nullptr) const;

  // S(B E') of (I_BK (x) U (x) I)(V (x) I)|psi> with U : E -> E' E'' -- the
  // unassisted figure of merit.
  double output_environment_entropy(const Mat& v, const Mat& u,
                                    Mat* grad_v = nullptr,
                                    Mat* grad_u = nullptr) const;

  // Always-feasible starting points: the channel's own dilation (fidelity 1)
  // and the post map that traces the environment and prepares |0>.
  Mat fallback_isometry() const;
  Mat fallback_post_isometry() const;

  // Embeds a channel's stored-Kraus dilation into the E environment; throws
  // invalid_input if the channel does not match the problem's layouts or has
  // more Kraus operators than fit.
  Mat encoder_isometry(const QuantumChannel& encoder) const;
  Mat post_isometry(const QuantumChannel& post) const;

  // Reads channels back off isometries (Kraus count = environment dim).
  QuantumChannel extract_encoder(const Mat& v) const;
  QuantumChannel extract_post(const Mat& u) const;

  // The fidelity target sigma^{BKR} in the fidelity factor order.
  const DensityOperator& target() const { return target_; }
  const std::vector<std::string>& b_labels() const { return b_labels_; }
  const std::vector<std::string>& k_labels() const { return k_labels_; }
  // Source reference factors plus the purifier.
  const std::vector<std::string>& reference_labels() const { return ref_labels_; }
  // B,K plus the source reference factors (the constraint marginal).
  const std::vector<std::string>& fidelity_labels() const { return fid_labels_; }
  const std::string& e_label() const { return e_label_; }
  const std::string& eprime_label() const { return eprime_label_; }
  const SystemLayout& output_layout() const { return vout_; }

 private:
  Ket tau_from_matrix(const Mat& m, const SystemLayout& out_layout) const;

  DensityOperator rho_;  // copy-expanded source
  QuantumChannel chan_;  // copy-expanded channel
  int copies_ = 1;
  std::size_t dim_e_ = 1;
  std::size_t dim_eprime_ = 1;
  std::string purifier_label_;
  std::string e_label_;
  std::string eprime_label_;
  std::string eaux_label_;
  std::vector<std::string> a_labels_;
  std::vector<std::string> b_labels_;
  std::vector<std::string> k_labels_;
  std::vector<std::string> ref_labels_;  // source references ++ purifier
  std::vector<std::string> fid_labels_;  // chan out ++ source references
  std::vector<std::string> bke_labels_;
  std::vector<std::string> ke_labels_;
  std::vector<std::string> beprime_labels_;
  Ket psi_;               // purified expanded source
  Mat psi_mat_;           // ket_as_matrix(psi, A-labels)
  SystemLayout rest_layout_;
  SystemLayout vout_;     // chan out ++ E
  SystemLayout wout_;     // chan out ++ E' ++ E''
  DensityOperator target_;
  Mat target_sqrt_;
};

// Entanglement-assisted simulation rate: minimizes (1/2) I(B : references)
// over encoders subject to the target fidelity constraint.
RateResult assisted_rate(const RateQuery& query);

// Unassisted simulation rate: minimizes S(B E') over encoder / post-map
// pairs subject to the same constraint (which involves the encoder only).
RateResult unassisted_rate(const RateQuery& query);

// Independent density-matrix-route evaluation of a candidate channel (pair):
// used for certification and by tests.  Values are bits per copy.
struct ChannelEvaluation {
  double value = 0.0;
  double fidelity = 0.0;
};
ChannelEvaluation evaluate_assisted(const RateQuery& query,
                                    const QuantumChannel& encoder);
ChannelEvaluation evaluate_unassisted(const RateQuery& query,
                                      const QuantumChannel& encoder,
                                      const QuantumChannel& post);

// Flagged mixture of two encoders: with dilations V_a, V_b of the two
// channels, builds the isometry
//   U0 = sqrt(lambda) V_a (x) |00>_{FF'} + sqrt(1-lambda) V_b (x) |11>_{FF'}
// and evaluates the mixture's conditional figure of merit.  Tracing the
// environment and F' leaves the F-flagged convex mixture of the two encoded
// states, so half_conditional_mi must equal the lambda-mixture of the two
// encoders' values exactly, and the mixture fidelity is at least the
// lambda-mixture of their fidelities (joint concavity).
struct FlagMixtureReport {
  double half_conditional_mi = 0.0;  // (1/2) I(B : references | F), per copy
  double component_a = 0.0;          // encoder a's (1/2) I(B : references), per copy
  double component_b = 0.0;
  double mixture_fidelity = 0.0;     // F(target, flagged mixture's BKR marginal)
  double lambda = 0.0;
};
FlagMixtureReport assisted_flag_mixture(const RateQuery& query,
                                        const QuantumChannel& encoder_a,
                                        const QuantumChannel& encoder_b,
                                        double lambda);

// Entanglement of purification of a bipartite state: with |s> a minimal
// purification of `state` through a purifier factor P, minimizes S(X E')
// over isometries U : P -> E' E''.
struct EopOptions {
  int restarts = 8;
  int max_iterations = 200;
  std::uint64_t seed = 7;
  std::size_t dim_keep = 0;     // E' dimension (0: purifier dimension)
  std::size_t dim_ancilla = 0;  // E'' dimension (0: purifier dimension)
  double gradient_tolerance = 1e-9;
};
struct EopResult {
  double value = 0.0;
  std::vector<double> restart_values;
  int best_restart = 0;
};
EopResult entanglement_of_purification(const DensityOperator& state,
                                       const std::vector<std::string>& x_labels,
                                       const EopOptions& options = {});

// Brute-force upper bound on the same quantity: the minimum of S(X E') over
// `samples` Haar-random isometries.  Used as an optimizer oracle.
double eop_random_search(const DensityOperator& state,
                         const std::vector<std::string>& x_labels, int samples,
                         std::uint64_t seed, std::size_t dim_keep = 0,
                         std::size_t dim_ancilla = 0);

// Closed-form values of the two rate functionals for the identity channel
// (no feedback, gamma -> 0), read off the block decomposition of the source:
// assisted = S(CQ) - S(C)/2, unassisted = S(CQ).
double identity_channel_assisted_oracle(const DensityOperator& source,
                                        const std::vector<std::string>& input_labels,
                                        const KiOptions& options = {});
double identity_channel_unassisted_oracle(const DensityOperator& source,
                                          const std::vector<std::string>& input_labels,
                                          const KiOptions& options = {});

}  // namespace qrs
