#include "qrs/rates.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/SVD>

#include "qrs/rng.hpp"

namespace qrs {
namespace {

constexpr double kInvLn2 = 1.4426950408889634;  // 1 / ln 2
constexpr double kGradEigenZero = 1e-15;        // spectrum cutoff in entropy gradients
constexpr double kCertifyFidelityGrace = 1e-6;  // certification allowance below 1 - gamma
constexpr double kCertifyValueTol = 1e-8;       // claimed-vs-recomputed value match

Ket raw_ket(SystemLayout lay, Vec amps) {
  // Bypasses the shape-validating constructor on purpose: gradient kets are
  // not normalized states. Shapes are correct by construction here.
  Ket k;
  k.layout = std::move(lay);
  k.amps = std::move(amps);
  return k;
}

Vec flatten_rows(const Mat& m) {
  Vec v(m.size());
  const Eigen::Index nc = m.cols();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < nc; ++c) v(r * nc + c) = m(r, c);
  return v;
}

std::string fresh_label(const std::string& base, std::vector<std::string>& taken) {
  std::string l = base;
  while (std::find(taken.begin(), taken.end(), l) != taken.end()) l += "'";
  taken.push_back(l);
  return l;
}

// Accumulates *g += weight * grad, where grad is the gradient ket matching
// g_t: a (front x rest) matrix gradient of some scalar with respect to the
// ket reshaped as ket_as_matrix(psi, front).
void scatter_grad(const Mat& g_t, const Ket& psi, const std::vector<std::string>& front,
                  double weight, Vec* g) {
  SystemLayout lay = psi.layout.sublayout(front).concat(psi.layout.complement(front));
  Ket gk = raw_ket(std::move(lay), flatten_rows(g_t));
  Ket gp = permute_systems(gk, psi.layout.labels());
  *g += weight * gp.amps;
}

// S(X) of the (pure) ket in bits; when g is non-null, accumulates
// *g += weight * grad with the convention dS = 2 Re <grad, d psi>.
// Computes over the smaller of X and its complement (same spectrum).
double ket_entropy_acc(const Ket& psi, const std::vector<std::string>& labels,
                       Vec* g, double weight) {
  if (labels.empty()) return 0.0;
  std::vector<std::string> front = labels;
  {
    const std::size_t df = psi.layout.dim_of_labels(front);
    const std::size_t dc = psi.layout.dim() / df;
    if (df > dc) {
      auto comp = psi.layout.complement(front).labels();
      if (!comp.empty()) front = std::move(comp);
    }
  }
  const Mat t = ket_as_matrix(psi, front);
  const EigH e = eig_hermitian(Mat(t * t.adjoint()));
  const double s = entropy_of_spectrum(e.values);
  if (g) {
    Mat w = e.vectors.adjoint() * t;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      const double lam = e.values(i);
      // Kernel directions of the Gram matrix pair with exactly-zero rows of
      // w; zero them instead of evaluating the divergent derivative.
      if (lam < kGradEigenZero)
        w.row(i).setZero();
      else
        w.row(i) *= -(std::log2(lam) + kInvLn2);
    }
    scatter_grad(Mat(e.vectors * w), psi, front, weight, g);
  }
  return s;
}

// F(sigma, M) where M is the `front` marginal of |psi><psi| and sigma is
// given through its Hermitian square root in the `front` basis.  With
// T = ket_as_matrix(psi, front), F equals the nuclear norm of sqrt(sigma) T.
// When g is non-null accumulates *g += weight * grad, dF = 2 Re <grad, d psi>.
double ket_fidelity_acc(const Ket& psi, const std::vector<std::string>& front,
                        const Mat& sigma_sqrt, Vec* g, double weight) {
  const Mat t = ket_as_matrix(psi, front);
  const Mat a = sigma_sqrt * t;
  // JacobiSVD rather than BDCSVD: the latter can emit NaN factors on nearly
  // rank-deficient inputs (observed with Eigen 3.4), and these matrices are
  // small enough that the robust solver costs about the same.
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double f = sv.sum();
  if (g) {
    const double cutoff = (sv.size() > 0 ? sv(0) : 0.0) * 1e-12;
    Eigen::Index keep = 0;
    while (keep < sv.size() && sv(keep) > cutoff) ++keep;
    const Mat polar =
        svd.matrixU().leftCols(keep) * svd.matrixV().leftCols(keep).adjoint();
    scatter_grad(Mat(0.5 * sigma_sqrt * polar), psi, front, weight, g);
  }
  return f;
}

Mat hermitian_sqrt(const Mat& m) {
  const EigH e = eig_hermitian(m);
  RVec root = e.values;
  for (Eigen::Index i = 0; i < root.size(); ++i) root(i) = std::sqrt(std::max(0.0, root(i)));
  return e.vectors * root.asDiagonal() * e.vectors.adjoint();
}

std::vector<std::string> concat_labels(std::vector<std::string> a,
                                       const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Copy-expanded problem data shared by the optimizer and the independent
// density-route evaluation.
struct Expanded {
  DensityOperator rho;
  QuantumChannel chan;
  std::vector<std::string> a;         // channel inputs
  std::vector<std::string> b;         // transmitted outputs
  std::vector<std::string> k;         // feedback outputs
  std::vector<std::string> src_refs;  // source factors that are not inputs
  std::vector<std::string> fid;       // chan out ++ src_refs
};

Expanded expand_query(const DensityOperator& source, const QuantumChannel& channel,
                      const std::vector<std::string>& feedback, int copies) {
  if (copies < 1 || copies > 3)
    throw invalid_input("copies must lie in 1..3, got " + std::to_string(copies));
  validate_density(source);
  for (const auto& fac : channel.in.factors()) {
    if (!source.layout.has(fac.label))
      throw invalid_input("channel input factor '" + fac.label +
                          "' is missing from the source state");
    if (source.layout.dim_of(fac.label) != fac.dim)
      throw invalid_input("channel input factor '" + fac.label +
                          "' has dim " + std::to_string(fac.dim) +
                          " but the source carries dim " +
                          std::to_string(source.layout.dim_of(fac.label)));
  }
  for (const auto& f : feedback)
    if (!channel.out.has(f))
      throw invalid_input("feedback label '" + f + "' is not a channel output");

  Expanded ex;
  ex.rho = tensor_power(source, static_cast<std::size_t>(copies));
  ex.chan = tensor_power(channel, static_cast<std::size_t>(copies));
  if (copies == 1) {
    ex.k = feedback;
  } else {
    for (int i = 1; i <= copies; ++i)
      for (const auto& f : feedback)
        ex.k.push_back(copy_label(f, static_cast<std::size_t>(i)));
  }
  for (const auto& l : ex.chan.out.labels())
    if (std::find(ex.k.begin(), ex.k.end(), l) == ex.k.end()) ex.b.push_back(l);
  ex.a = ex.chan.in.labels();
  ex.src_refs = ex.rho.layout.complement(ex.a).labels();
  ex.fid = concat_labels(ex.chan.out.labels(), ex.src_refs);
  return ex;
}

void validate_optimizer(const OptimizerConfig& oc) {
  if (oc.restarts < 1) throw invalid_input("optimizer: restarts must be >= 1");
  if (oc.max_iterations < 1) throw invalid_input("optimizer: max_iterations must be >= 1");
  if (oc.penalty_stages < 1) throw invalid_input("optimizer: penalty_stages must be >= 1");
  if (!(oc.penalty_initial > 0.0)) throw invalid_input("optimizer: penalty_initial must be > 0");
  if (!(oc.penalty_growth >= 1.0)) throw invalid_input("optimizer: penalty_growth must be >= 1");
  if (!(oc.gradient_tolerance > 0.0)) throw invalid_input("optimizer: gradient_tolerance must be > 0");
}

struct GammaPolicy {
  double user = 0.0;
  double eff = 0.0;            // max(gamma, 1e-6)
  double opt = 0.0;            // eff minus a safety margin; the optimizer's target
  double track_fidelity = 0.0; // feasibility bar for candidate iterates
  double certify_fidelity = 0.0;
};

GammaPolicy make_gamma_policy(double gamma) {
  if (!(gamma >= 0.0) || !(gamma < 1.0))
    throw invalid_input("gamma must lie in [0, 1)");
  GammaPolicy p;
  p.user = gamma;
  p.eff = std::max(gamma, 1e-6);
  const double margin = std::min(p.eff / 2.0, 1e-4);
  p.opt = p.eff - margin;
  p.track_fidelity = 1.0 - p.eff + margin / 2.0;
  p.certify_fidelity = 1.0 - gamma - kCertifyFidelityGrace;
  return p;
}

struct Candidate {
  int restart = 0;
  double claimed = 0.0;  // m-copy bits
  double tracked_fidelity = 0.0;
  std::vector<QuantumChannel> channels;
};

// Certifies candidates through `eval` (the independent density route), marks
// the per-restart records, and assembles the result around the best certified
// candidate (falling back to `fallback_channels` if none survives).
template <typename EvalFn>
RateResult merge_candidates(const std::vector<Candidate>& cands,
                            std::vector<RestartRecord> records, const GammaPolicy& gp,
                            int copies, EvalFn&& eval,
                            const std::vector<QuantumChannel>& fallback_channels) {
  const double m = static_cast<double>(copies);
  int best = -1;
  double best_value = std::numeric_limits<double>::infinity();
  ChannelEvaluation best_ev;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const Candidate& c = cands[i];
    bool ok = true;
    for (const auto& ch : c.channels) ok = ok && validate_cptp(ch).pass;
    ChannelEvaluation ev;
    if (ok) {
      ev = eval(c.channels);
      const double claimed_pc = c.claimed / m;
      ok = ev.fidelity >= gp.certify_fidelity &&
           std::abs(ev.value - claimed_pc) <= kCertifyValueTol;
    }
    if (c.restart >= 0 && c.restart < static_cast<int>(records.size()))
      records[static_cast<std::size_t>(c.restart)].certified =
          records[static_cast<std::size_t>(c.restart)].certified || ok;
    if (ok) {
      const double claimed_pc = c.claimed / m;
      const bool better =
          claimed_pc < best_value ||
          (claimed_pc == best_value && best >= 0 && c.restart < cands[static_cast<std::size_t>(best)].restart);
      if (better) {
        best = static_cast<int>(i);
        best_value = claimed_pc;
        best_ev = ev;
      }
    }
  }

  RateResult out;
  out.copies = copies;
  out.gamma = gp.user;
  out.gamma_effective = gp.eff;
  out.restarts = std::move(records);
  if (best >= 0) {
    const Candidate& c = cands[static_cast<std::size_t>(best)];
    out.status = "certified";
    out.value = best_value;
    out.achieved_fidelity = best_ev.fidelity;
    out.constraint_residual = std::max(0.0, (1.0 - gp.user) - best_ev.fidelity);
    out.recompute_gap = std::abs(best_ev.value - best_value);
    out.channels = c.channels;
  } else {
    const ChannelEvaluation ev = eval(fallback_channels);
    out.status = "fallback";
    out.value = ev.value;
    out.achieved_fidelity = ev.fidelity;
    out.constraint_residual = std::max(0.0, (1.0 - gp.user) - ev.fidelity);
    out.recompute_gap = 0.0;
    out.channels = fallback_channels;
  }
  return out;
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

EncoderProblem::EncoderProblem(const DensityOperator& source, const QuantumChannel& channel,
                               const std::vector<std::string>& feedback_labels, int copies,
                               std::size_t dim_e, std::size_t dim_eprime)
    : copies_(copies) {
  Expanded ex = expand_query(source, channel, feedback_labels, copies);
  rho_ = std::move(ex.rho);
  chan_ = std::move(ex.chan);
  a_labels_ = std::move(ex.a);
  b_labels_ = std::move(ex.b);
  k_labels_ = std::move(ex.k);
  fid_labels_ = std::move(ex.fid);

  std::vector<std::string> taken = rho_.layout.labels();
  for (const auto& l : chan_.out.labels()) taken.push_back(l);
  purifier_label_ = fresh_label("R'", taken);
  e_label_ = fresh_label("E", taken);
  eprime_label_ = fresh_label("E'", taken);
  eaux_label_ = fresh_label("E''", taken);

  dim_e_ = dim_e ? dim_e : chan_.in.dim() * chan_.out.dim();
  dim_eprime_ = dim_eprime ? dim_eprime : dim_e_;
  if (chan_.kraus.size() > dim_e_)
    throw invalid_input("environment dim " + std::to_string(dim_e_) +
                        " cannot embed the channel's dilation (needs " +
                        std::to_string(chan_.kraus.size()) + ")");
  if (chan_.out.dim() * dim_e_ < chan_.in.dim())
    throw invalid_input("environment dim too small for an isometric encoder");

  psi_ = purify(rho_, purifier_label_);
  psi_mat_ = ket_as_matrix(psi_, a_labels_);
  rest_layout_ = psi_.layout.complement(a_labels_);
  ref_labels_ = rest_layout_.labels();

  vout_ = chan_.out.concat(SystemLayout({Factor{e_label_, dim_e_}}));
  wout_ = chan_.out.concat(
      SystemLayout({Factor{eprime_label_, dim_eprime_}, Factor{eaux_label_, dim_e_}}));
  bke_labels_ = concat_labels(b_labels_, k_labels_);
  bke_labels_.push_back(e_label_);
  ke_labels_ = k_labels_;
  ke_labels_.push_back(e_label_);
  beprime_labels_ = b_labels_;
  beprime_labels_.push_back(eprime_label_);

  DensityOperator sigma = apply_channel(chan_, rho_);
  target_ = permute_systems(sigma, fid_labels_);
  target_sqrt_ = hermitian_sqrt(target_.matrix);
}

Ket EncoderProblem::tau_from_matrix(const Mat& m, const SystemLayout& out_layout) const {
  return raw_ket(out_layout.concat(rest_layout_), flatten_rows(m));
}

Ket EncoderProblem::global_state(const Mat& v) const {
  if (v.rows() != static_cast<Eigen::Index>(v_rows()) ||
      v.cols() != static_cast<Eigen::Index>(v_cols()))
    throw invalid_input("encoder isometry has the wrong shape");
  return tau_from_matrix(v * psi_mat_, vout_);
}

Ket EncoderProblem::extended_global_state(const Mat& v_ext, const SystemLayout& extra) const {
  if (v_ext.rows() != static_cast<Eigen::Index>(v_rows() * extra.dim()) ||
      v_ext.cols() != static_cast<Eigen::Index>(v_cols()))
    throw invalid_input("extended encoder isometry has the wrong shape");
  return tau_from_matrix(v_ext * psi_mat_, vout_.concat(extra));
}

double EncoderProblem::half_mutual_information(const Mat& v, Mat* grad) const {
  const Ket tau = global_state(v);
  Vec g;
  Vec* gp = nullptr;
  if (grad) {
    g = Vec::Zero(static_cast<Eigen::Index>(tau.amps.size()));
    gp = &g;
  }
  // (1/2) I(B : references) of the pure global state equals
  // (1/2) [S(B) + S(BKE) - S(KE)].
  const double sb = ket_entropy_acc(tau, b_labels_, gp, 0.5);
  const double sbke = ket_entropy_acc(tau, bke_labels_, gp, 0.5);
  const double ske = ket_entropy_acc(tau, ke_labels_, gp, -0.5);
  if (grad) {
    const Mat ghat = ket_as_matrix(raw_ket(tau.layout, std::move(g)), vout_.labels());
    *grad = 2.0 * (ghat * psi_mat_.adjoint());
  }
  return 0.5 * (sb + sbke - ske);
}

double EncoderProblem::fidelity(const Mat& v, Mat* grad) const {
  const Ket tau = global_state(v);
  Vec g;
  Vec* gp = nullptr;
  if (grad) {
    g = Vec::Zero(static_cast<Eigen::Index>(tau.amps.size()));
    gp = &g;
  }
  const double f = ket_fidelity_acc(tau, fid_labels_, target_sqrt_, gp, 1.0);
  if (grad) {
    const Mat ghat = ket_as_matrix(raw_ket(tau.layout, std::move(g)), vout_.labels());
    *grad = 2.0 * (ghat * psi_mat_.adjoint());
  }
  return f;
}

double EncoderProblem::output_environment_entropy(const Mat& v, const Mat& u,
                                                  Mat* grad_v, Mat* grad_u) const {
  if (v.rows() != static_cast<Eigen::Index>(v_rows()) ||
      v.cols() != static_cast<Eigen::Index>(v_cols()))
    throw invalid_input("encoder isometry has the wrong shape");
  if (u.rows() != static_cast<Eigen::Index>(u_rows()) ||
      u.cols() != static_cast<Eigen::Index>(u_cols()))
    throw invalid_input("post-map isometry has the wrong shape");
  const Eigen::Index dbk = static_cast<Eigen::Index>(chan_.out.dim());
  const Eigen::Index de = static_cast<Eigen::Index>(dim_e_);
  const Eigen::Index du = static_cast<Eigen::Index>(u_rows());
  const Eigen::Index da = static_cast<Eigen::Index>(v_cols());

  // w = (I_BK (x) U) V maps A -> B K E' E''.
  Mat w(dbk * du, da);
  for (Eigen::Index bk = 0; bk < dbk; ++bk)
    w.block(bk * du, 0, du, da) = u * v.block(bk * de, 0, de, da);
  const Ket tau = tau_from_matrix(w * psi_mat_, wout_);

  Vec g;
  Vec* gp = nullptr;
  if (grad_v || grad_u) {
    g = Vec::Zero(static_cast<Eigen::Index>(tau.amps.size()));
    gp = &g;
  }
  const double s = ket_entropy_acc(tau, beprime_labels_, gp, 1.0);
  if (gp) {
    const Mat ghat = ket_as_matrix(raw_ket(tau.layout, std::move(g)), wout_.labels());
    const Mat gw = 2.0 * (ghat * psi_mat_.adjoint());
    if (grad_v) {
      grad_v->resize(v.rows(), v.cols());
      for (Eigen::Index bk = 0; bk < dbk; ++bk)
        grad_v->block(bk * de, 0, de, da) = u.adjoint() * gw.block(bk * du, 0, du, da);
    }
    if (grad_u) {
      Mat acc = Mat::Zero(du, de);
      for (Eigen::Index bk = 0; bk < dbk; ++bk)
        acc += gw.block(bk * du, 0, du, da) * v.block(bk * de, 0, de, da).adjoint();
      *grad_u = std::move(acc);
    }
  }
  return s;
}

Mat EncoderProblem::fallback_isometry() const {
  const StinespringIsometry st = stinespring_dilation(chan_, e_label_);
  Mat v = Mat::Zero(static_cast<Eigen::Index>(v_rows()), static_cast<Eigen::Index>(v_cols()));
  const Eigen::Index n = static_cast<Eigen::Index>(st.env_dim);
  for (std::size_t o = 0; o < chan_.out.dim(); ++o)
    v.block(static_cast<Eigen::Index>(o * dim_e_), 0, n, v.cols()) =
        st.isometry.matrix.block(static_cast<Eigen::Index>(o) * n, 0, n, v.cols());
  return v;
}

Mat EncoderProblem::fallback_post_isometry() const {
  // Trace the environment and prepare |0> on E': Kraus |0><e|, e = 0..de-1.
  Mat u = Mat::Zero(static_cast<Eigen::Index>(u_rows()), static_cast<Eigen::Index>(u_cols()));
  u.block(0, 0, static_cast<Eigen::Index>(dim_e_), static_cast<Eigen::Index>(dim_e_)) =
      Mat::Identity(static_cast<Eigen::Index>(dim_e_), static_cast<Eigen::Index>(dim_e_));
  return u;
}

Mat EncoderProblem::encoder_isometry(const QuantumChannel& encoder) const {
  if (!(encoder.in == chan_.in) || !(encoder.out == chan_.out))
    throw invalid_input("encoder channel layouts do not match the problem");
  if (encoder.kraus.size() > dim_e_)
    throw invalid_input("encoder needs environment dim " +
                        std::to_string(encoder.kraus.size()) + " > " +
                        std::to_string(dim_e_));
  const StinespringIsometry st = stinespring_dilation(encoder, e_label_);
  Mat v = Mat::Zero(static_cast<Eigen::Index>(v_rows()), static_cast<Eigen::Index>(v_cols()));
  const Eigen::Index n = static_cast<Eigen::Index>(st.env_dim);
  for (std::size_t o = 0; o < chan_.out.dim(); ++o)
    v.block(static_cast<Eigen::Index>(o * dim_e_), 0, n, v.cols()) =
        st.isometry.matrix.block(static_cast<Eigen::Index>(o) * n, 0, n, v.cols());
  return v;
}

Mat EncoderProblem::post_isometry(const QuantumChannel& post) const {
  if (post.in.dim() != dim_e_ || post.out.dim() != dim_eprime_)
    throw invalid_input("post map dims do not match the problem");
  if (post.kraus.size() > dim_e_)
    throw invalid_input("post map needs environment dim " +
                        std::to_string(post.kraus.size()) + " > " +
                        std::to_string(dim_e_));
  Mat u = Mat::Zero(static_cast<Eigen::Index>(u_rows()), static_cast<Eigen::Index>(u_cols()));
  for (std::size_t k = 0; k < post.kraus.size(); ++k)
    for (std::size_t ep = 0; ep < dim_eprime_; ++ep)
      for (std::size_t e = 0; e < dim_e_; ++e)
        u(static_cast<Eigen::Index>(ep * dim_e_ + k), static_cast<Eigen::Index>(e)) =
            post.kraus[k](static_cast<Eigen::Index>(ep), static_cast<Eigen::Index>(e));
  return u;
}

QuantumChannel EncoderProblem::extract_encoder(const Mat& v) const {
  return channel_from_stinespring(v, chan_.in, chan_.out, dim_e_);
}

QuantumChannel EncoderProblem::extract_post(const Mat& u) const {
  return channel_from_stinespring(u, SystemLayout({Factor{e_label_, dim_e_}}),
                                  SystemLayout({Factor{eprime_label_, dim_eprime_}}), dim_e_);
}

ChannelEvaluation evaluate_assisted(const RateQuery& query, const QuantumChannel& encoder) {
  Expanded ex = expand_query(query.source, query.channel, query.feedback_labels, query.copies);
  if (!(encoder.in == ex.chan.in) || !(encoder.out == ex.chan.out))
    throw invalid_input("encoder channel layouts do not match the query");
  std::vector<std::string> taken = ex.rho.layout.labels();
  for (const auto& l : ex.chan.out.labels()) taken.push_back(l);
  const std::string pur = fresh_label("R'", taken);
  const Ket psi = purify(ex.rho, pur);
  const DensityOperator omega = apply_channel(encoder, to_density(psi));
  std::vector<std::string> refs = ex.src_refs;
  refs.push_back(pur);
  ChannelEvaluation ev;
  ev.value = ex.b.empty()
                 ? 0.0
                 : 0.5 * mutual_information(omega, ex.b, refs) / query.copies;
  const DensityOperator sigma = apply_channel(ex.chan, ex.rho);
  ev.fidelity = fidelity(sigma, partial_trace(omega, ex.fid));
  return ev;
}

ChannelEvaluation evaluate_unassisted(const RateQuery& query, const QuantumChannel& encoder,
                                      const QuantumChannel& post) {
  Expanded ex = expand_query(query.source, query.channel, query.feedback_labels, query.copies);
  if (!(encoder.in == ex.chan.in) || !(encoder.out == ex.chan.out))
    throw invalid_input("encoder channel layouts do not match the query");
  if (post.in.size() != 1)
    throw invalid_input("post map input must be a single environment factor");
  if (post.in.dim() != encoder.kraus.size())
    throw invalid_input("post map input dim " + std::to_string(post.in.dim()) +
                        " must equal the encoder's Kraus count " +
                        std::to_string(encoder.kraus.size()));
  const std::string env = post.in.factor(0).label;
  if (ex.rho.layout.has(env) || ex.chan.out.has(env))
    throw invalid_input("post map environment label '" + env +
                        "' collides with a problem factor");

  std::vector<std::string> taken = ex.rho.layout.labels();
  for (const auto& l : ex.chan.out.labels()) taken.push_back(l);
  taken.push_back(env);
  for (const auto& l : post.out.labels()) taken.push_back(l);
  const std::string pur = fresh_label("R'", taken);

  const Ket psi = purify(ex.rho, pur);
  const StinespringIsometry st = stinespring_dilation(encoder, env);
  const DensityOperator chi = apply_channel(channel_from_isometry(st.isometry), to_density(psi));
  const DensityOperator xi = apply_channel(post, chi);
  ChannelEvaluation ev;
  ev.value =
      von_neumann_entropy(xi, concat_labels(ex.b, post.out.labels())) / query.copies;
  const DensityOperator sigma = apply_channel(ex.chan, ex.rho);
  ev.fidelity = fidelity(sigma, partial_trace(chi, ex.fid));
  return ev;
}

RateResult assisted_rate(const RateQuery& query) {
  const auto t0 = std::chrono::steady_clock::now();
  const OptimizerConfig& oc = query.optimizer;
  validate_optimizer(oc);
  if (!query.warm_start.empty() && query.warm_start.size() != 1)
    throw invalid_input("assisted warm start takes exactly one channel");
  const GammaPolicy gp = make_gamma_policy(query.gamma);
  const EncoderProblem prob(query.source, query.channel, query.feedback_labels,
                            query.copies, oc.dim_e, oc.dim_eprime);
  const double m = static_cast<double>(query.copies);

  DescentOptions dopt;
  dopt.max_iterations = oc.max_iterations;
  dopt.grad_tol = oc.gradient_tolerance;

  std::vector<Candidate> cands;
  std::vector<RestartRecord> records;
  for (int r = 0; r < oc.restarts; ++r) {
    Mat v;
    if (r == 0) {
      v = prob.fallback_isometry();
    } else if (r == 1 && !query.warm_start.empty()) {
      v = prob.encoder_isometry(query.warm_start[0]);
    } else {
      Rng rng(derive_seed(oc.seed, static_cast<std::uint64_t>(r)));
      v = random_isometry(prob.v_rows(), prob.v_cols(), rng);
    }

    double best = std::numeric_limits<double>::infinity();
    Mat best_v;
    double best_fid = 0.0;
    bool any = false;
    double lam = 0.0;
    double mu = oc.penalty_initial;
    int iters = 0;
    for (int stage = 0; stage < oc.penalty_stages; ++stage) {
      const StiefelObjective obj = [&, lam, mu](const Mat& vv, Mat* gg) -> double {
        Mat go, gf;
        const double val = prob.half_mutual_information(vv, gg ? &go : nullptr);
        const double fid = prob.fidelity(vv, gg ? &gf : nullptr);
        const double c = (1.0 - gp.opt) - fid;
        const double t = lam + mu * c;
        if (gg) *gg = (t > 0.0) ? Mat(go - t * gf) : std::move(go);
        if (fid >= gp.track_fidelity && val < best) {
          best = val;
          best_v = vv;
          best_fid = fid;
          any = true;
        }
        return val + ((t > 0.0 ? t * t : 0.0) - lam * lam) / (2.0 * mu);
      };
      const DescentResult dr = stiefel_descent(v, obj, dopt);
      v = dr.v;
      iters += dr.iterations;
      lam = std::max(0.0, lam + mu * ((1.0 - gp.opt) - prob.fidelity(v, nullptr)));
      mu *= oc.penalty_growth;
    }

    RestartRecord rec;
    rec.index = r;
    rec.iterations = iters;
    rec.feasible = any;
    if (any) {
      rec.value = best / m;
      rec.fidelity = best_fid;
      Candidate c;
      c.restart = r;
      c.claimed = best;
      c.tracked_fidelity = best_fid;
      c.channels = {prob.extract_encoder(best_v)};
      cands.push_back(std::move(c));
    }
    records.push_back(std::move(rec));
  }

  if (!query.warm_start.empty()) {
    // The warm start is also a candidate in its own right: any encoder that
    // certifies at a smaller gamma certifies here, which makes the rate
    // monotone under warm-started slack increases.
    const ChannelEvaluation ev = evaluate_assisted(query, query.warm_start[0]);
    Candidate c;
    c.restart = static_cast<int>(records.size());
    c.claimed = ev.value * m;
    c.tracked_fidelity = ev.fidelity;
    c.channels = {query.warm_start[0]};
    cands.push_back(std::move(c));
    RestartRecord rec;
    rec.index = c.restart;
    rec.value = ev.value;
    rec.fidelity = ev.fidelity;
    rec.feasible = true;
    rec.iterations = 0;
    records.push_back(std::move(rec));
  }

  RateResult out = merge_candidates(
      cands, std::move(records), gp, query.copies,
      [&](const std::vector<QuantumChannel>& chs) {
        return evaluate_assisted(query, chs.at(0));
      },
      {prob.extract_encoder(prob.fallback_isometry())});
  out.wall_seconds = elapsed_seconds(t0);
  return out;
}

RateResult unassisted_rate(const RateQuery& query) {
  const auto t0 = std::chrono::steady_clock::now();
  const OptimizerConfig& oc = query.optimizer;
  validate_optimizer(oc);
  if (!query.warm_start.empty() && query.warm_start.size() != 2)
    throw invalid_input("unassisted warm start takes an encoder and a post map");
  const GammaPolicy gp = make_gamma_policy(query.gamma);
  const EncoderProblem prob(query.source, query.channel, query.feedback_labels,
                            query.copies, oc.dim_e, oc.dim_eprime);
  const double m = static_cast<double>(query.copies);

  DescentOptions dopt;
  dopt.max_iterations = oc.max_iterations;
  dopt.grad_tol = oc.gradient_tolerance;

  std::vector<Candidate> cands;
  std::vector<RestartRecord> records;
  for (int r = 0; r < oc.restarts; ++r) {
    Mat v, u;
    if (r == 0) {
      v = prob.fallback_isometry();
      u = prob.fallback_post_isometry();
    } else if (r == 1 && !query.warm_start.empty()) {
      v = prob.encoder_isometry(query.warm_start[0]);
      u = prob.post_isometry(query.warm_start[1]);
    } else {
      Rng rng(derive_seed(oc.seed, static_cast<std::uint64_t>(r)));
      v = random_isometry(prob.v_rows(), prob.v_cols(), rng);
      u = random_isometry(prob.u_rows(), prob.u_cols(), rng);
    }

    double best = std::numeric_limits<double>::infinity();
    Mat best_v, best_u;
    double best_fid = 0.0;
    bool any = false;
    double lam = 0.0;
    double mu = oc.penalty_initial;
    int iters = 0;
    for (int stage = 0; stage < oc.penalty_stages; ++stage) {
      // Alternate: the encoder carries the fidelity constraint, the post map
      // is unconstrained.
      const StiefelObjective obj_v = [&, lam, mu](const Mat& vv, Mat* gg) -> double {
        Mat go, gf;
        const double val = prob.output_environment_entropy(vv, u, gg ? &go : nullptr, nullptr);
        const double fid = prob.fidelity(vv, gg ? &gf : nullptr);
        const double c = (1.0 - gp.opt) - fid;
        const double t = lam + mu * c;
        if (gg) *gg = (t > 0.0) ? Mat(go - t * gf) : std::move(go);
        if (fid >= gp.track_fidelity && val < best) {
          best = val;
          best_v = vv;
          best_u = u;
          best_fid = fid;
          any = true;
        }
        return val + ((t > 0.0 ? t * t : 0.0) - lam * lam) / (2.0 * mu);
      };
      const DescentResult drv = stiefel_descent(v, obj_v, dopt);
      v = drv.v;
      iters += drv.iterations;

      const double fid_v = prob.fidelity(v, nullptr);
      const StiefelObjective obj_u = [&](const Mat& uu, Mat* gg) -> double {
        const double val = prob.output_environment_entropy(v, uu, nullptr, gg);
        if (fid_v >= gp.track_fidelity && val < best) {
          best = val;
          best_v = v;
          best_u = uu;
          best_fid = fid_v;
          any = true;
        }
        return val;
      };
      const DescentResult dru = stiefel_descent(u, obj_u, dopt);
      u = dru.v;
      iters += dru.iterations;

      lam = std::max(0.0, lam + mu * ((1.0 - gp.opt) - prob.fidelity(v, nullptr)));
      mu *= oc.penalty_growth;
    }

    RestartRecord rec;
    rec.index = r;
    rec.iterations = iters;
    rec.feasible = any;
    if (any) {
      rec.value = best / m;
      rec.fidelity = best_fid;
      Candidate c;
      c.restart = r;
      c.claimed = best;
      c.tracked_fidelity = best_fid;
      c.channels = {prob.extract_encoder(best_v), prob.extract_post(best_u)};
      cands.push_back(std::move(c));
    }
    records.push_back(std::move(rec));
  }

  if (!query.warm_start.empty()) {
    const ChannelEvaluation ev =
        evaluate_unassisted(query, query.warm_start[0], query.warm_start[1]);
    Candidate c;
    c.restart = static_cast<int>(records.size());
    c.claimed = ev.value * m;
    c.tracked_fidelity = ev.fidelity;
    c.channels = {query.warm_start[0], query.warm_start[1]};
    cands.push_back(std::move(c));
    RestartRecord rec;
    rec.index = c.restart;
    rec.value = ev.value;
    rec.fidelity = ev.fidelity;
    rec.feasible = true;
    rec.iterations = 0;
    records.push_back(std::move(rec));
  }

  RateResult out = merge_candidates(
      cands, std::move(records), gp, query.copies,
      [&](const std::vector<QuantumChannel>& chs) {
        return evaluate_unassisted(query, chs.at(0), chs.at(1));
      },
      {prob.extract_encoder(prob.fallback_isometry()),
       prob.extract_post(prob.fallback_post_isometry())});
  out.wall_seconds = elapsed_seconds(t0);
  return out;
}

FlagMixtureReport assisted_flag_mixture(const RateQuery& query,
                                        const QuantumChannel& encoder_a,
                                        const QuantumChannel& encoder_b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw invalid_input("lambda must lie in [0, 1]");
  const EncoderProblem prob(query.source, query.channel, query.feedback_labels,
                            query.copies, query.optimizer.dim_e, query.optimizer.dim_eprime);
  const Mat va = prob.encoder_isometry(encoder_a);
  const Mat vb = prob.encoder_isometry(encoder_b);

  std::vector<std::string> taken = prob.output_layout().labels();
  for (const auto& l : prob.reference_labels()) taken.push_back(l);
  const std::string f = fresh_label("F", taken);
  const std::string f2 = fresh_label("F'", taken);

  Mat e00 = Mat::Zero(4, 1);
  e00(0, 0) = 1.0;
  Mat e11 = Mat::Zero(4, 1);
  e11(3, 0) = 1.0;
  const Mat u0 = std::sqrt(lambda) * kron(va, e00) + std::sqrt(1.0 - lambda) * kron(vb, e11);
  const Ket tau = prob.extended_global_state(u0, SystemLayout({Factor{f, 2}, Factor{f2, 2}}));

  const auto vne = [&tau](const std::vector<std::string>& labels) -> double {
    return labels.empty() ? 0.0 : von_neumann_entropy(tau, labels);
  };
  std::vector<std::string> bf = prob.b_labels();
  bf.push_back(f);
  std::vector<std::string> rf = prob.reference_labels();
  rf.push_back(f);
  std::vector<std::string> brf = concat_labels(prob.b_labels(), prob.reference_labels());
  brf.push_back(f);

  const double m = static_cast<double>(query.copies);
  FlagMixtureReport rep;
  rep.lambda = lambda;
  rep.half_conditional_mi =
      0.5 * (vne(bf) + vne(rf) - vne(brf) - vne({f})) / m;
  rep.component_a = prob.half_mutual_information(va) / m;
  rep.component_b = prob.half_mutual_information(vb) / m;
  rep.mixture_fidelity = fidelity(prob.target(), partial_trace(tau, prob.fidelity_labels()));
  return rep;
}

namespace {

// Shared setup for the purification-splitting optimization.
struct EopSetup {
  Ket psi;
  Mat psi_mat;
  SystemLayout out_layout;
  std::vector<std::string> xe;
  std::vector<std::string> vout_labels;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

EopSetup eop_setup(const DensityOperator& state, const std::vector<std::string>& x_labels,
                   std::size_t dim_keep, std::size_t dim_ancilla) {
  validate_density(state);
  if (x_labels.empty()) throw invalid_input("the kept side must name at least one factor");
  for (const auto& l : x_labels)
    if (!state.layout.has(l))
      throw invalid_input("kept factor '" + l + "' is missing from the state");
  std::vector<std::string> taken = state.layout.labels();
  const std::string pur = fresh_label("P", taken);
  const std::string ep = fresh_label("E'", taken);
  const std::string ea = fresh_label("E''", taken);

  EopSetup s;
  s.psi = purify(state, pur);
  const std::size_t dp = s.psi.layout.dim_of(pur);
  const std::size_t dk = dim_keep ? dim_keep : dp;
  const std::size_t da = dim_ancilla ? dim_ancilla : dp;
  if (dk * da < dp)
    throw invalid_input("split dims cannot embed the purifier (need dim_keep * dim_ancilla >= " +
                        std::to_string(dp) + ")");
  s.psi_mat = ket_as_matrix(s.psi, {pur});
  s.out_layout = SystemLayout({Factor{ep, dk}, Factor{ea, da}})
                     .concat(s.psi.layout.complement({pur}));
  s.xe = x_labels;
  s.xe.push_back(ep);
  s.vout_labels = {ep, ea};
  s.rows = dk * da;
  s.cols = dp;
  return s;
}

}  // namespace

EopResult entanglement_of_purification(const DensityOperator& state,
                                       const std::vector<std::string>& x_labels,
                                       const EopOptions& options) {
  if (options.restarts < 1) throw invalid_input("eop: restarts must be >= 1");
  if (options.max_iterations < 1) throw invalid_input("eop: max_iterations must be >= 1");
  const EopSetup s = eop_setup(state, x_labels, options.dim_keep, options.dim_ancilla);

  const StiefelObjective objective = [&s](const Mat& u, Mat* grad) -> double {
    const Ket tau = raw_ket(s.out_layout, flatten_rows(u * s.psi_mat));
    Vec g;
    Vec* gp = nullptr;
    if (grad) {
      g = Vec::Zero(static_cast<Eigen::Index>(tau.amps.size()));
      gp = &g;
    }
    const double val = ket_entropy_acc(tau, s.xe, gp, 1.0);
    if (grad) {
      const Mat ghat = ket_as_matrix(raw_ket(tau.layout, std::move(g)), s.vout_labels);
      *grad = 2.0 * (ghat * s.psi_mat.adjoint());
    }
    return val;
  };

  DescentOptions dopt;
  dopt.max_iterations = options.max_iterations;
  dopt.grad_tol = options.gradient_tolerance;

  EopResult res;
  res.value = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Mat u0;
    if (r == 0 && s.out_layout.factor(0).dim >= s.cols) {
      // Embed the purifier into E' with |0> on E''.
      u0 = Mat::Zero(static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
      const std::size_t da = s.out_layout.factor(1).dim;
      for (std::size_t e = 0; e < s.cols; ++e)
        u0(static_cast<Eigen::Index>(e * da), static_cast<Eigen::Index>(e)) = 1.0;
    } else {
      Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(r)));
      u0 = random_isometry(s.rows, s.cols, rng);
    }
    const DescentResult dr = stiefel_descent(u0, objective, dopt);
    res.restart_values.push_back(dr.value);
    if (dr.value < res.value) {
      res.value = dr.value;
      res.best_restart = r;
    }
  }
  return res;
}

double eop_random_search(const DensityOperator& state,
                         const std::vector<std::string>& x_labels, int samples,
                         std::uint64_t seed, std::size_t dim_keep, std::size_t dim_ancilla) {
  if (samples < 1) throw invalid_input("eop search: samples must be >= 1");
  const EopSetup s = eop_setup(state, x_labels, dim_keep, dim_ancilla);
  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const Mat u = random_isometry(s.rows, s.cols, rng);
    const Ket tau = raw_ket(s.out_layout, flatten_rows(u * s.psi_mat));
    best = std::min(best, ket_entropy_acc(tau, s.xe, nullptr, 1.0));
  }
  return best;
}

double identity_channel_assisted_oracle(const DensityOperator& source,
                                        const std::vector<std::string>& input_labels,
                                        const KiOptions& options) {
  const KIDecomposition d = ki_decompose(source, input_labels, options);
  const KiEntropies e = ki_entropies(d);
  return e.s_cq - 0.5 * e.s_c;
}

double identity_channel_unassisted_oracle(const DensityOperator& source,
                                          const std::vector<std::string>& input_labels,
                                          const KiOptions& options) {
  const KIDecomposition d = ki_decompose(source, input_labels, options);
  return ki_entropies(d).s_cq;
}

}  // namespace qrs
