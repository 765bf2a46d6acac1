#include "qrs/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "qrs/entropy.hpp"
#include "qrs/rng.hpp"

namespace qrs {
namespace {

Ket raw_ket(SystemLayout lay, Vec amps) {
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

bool same_label_set(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

Ket ket_tensor(const Ket& a, const Ket& b) {
  Vec amps(a.amps.size() * b.amps.size());
  for (Eigen::Index i = 0; i < a.amps.size(); ++i)
    for (Eigen::Index j = 0; j < b.amps.size(); ++j)
      amps(i * b.amps.size() + j) = a.amps(i) * b.amps(j);
  return raw_ket(a.layout.concat(b.layout), std::move(amps));
}

DensityOperator density_tensor(const DensityOperator& a, const DensityOperator& b) {
  return DensityOperator(a.layout.concat(b.layout), kron(a.matrix, b.matrix));
}

// Applies the isometry v : in_labels -> out_layout to the ket, keeping the
// remaining factors in place (the result lists out_layout's factors first).
Ket apply_isometry_ket(const Ket& psi, const Mat& v,
                       const std::vector<std::string>& in_labels,
                       const SystemLayout& out_layout) {
  const Mat m = v * ket_as_matrix(psi, in_labels);
  return raw_ket(out_layout.concat(psi.layout.complement(in_labels)), flatten_rows(m));
}

void validate_unit_ket(const Ket& k, const std::string& what) {
  if (std::abs(k.amps.norm() - 1.0) > 1e-9)
    throw invalid_input(what + " must be normalized");
}

std::vector<std::string> concat_labels(std::vector<std::string> a,
                                       const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

QuantumChannel relabel_identity(const std::string& from, const std::string& to,
                                std::size_t dim) {
  QuantumChannel ch;
  ch.in = SystemLayout({Factor{from, dim}});
  ch.out = SystemLayout({Factor{to, dim}});
  ch.kraus = {Mat::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))};
  return ch;
}

Mat unitary_exp_ih(const Mat& h, double delta) {
  const EigH e = eig_hermitian(h);
  Vec phases(e.values.size());
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    phases(i) = std::exp(cxd(0.0, delta * e.values(i)));
  return e.vectors * phases.asDiagonal() * e.vectors.adjoint();
}

}  // namespace

ProtocolReport run_protocol(const SimProtocol& p) {
  if (p.n < 1 || p.n > 3)
    throw invalid_input("protocol copies must lie in 1..3, got " + std::to_string(p.n));
  validate_density(p.source);
  validate_unit_ket(p.shared_state, "shared state");
  validate_unit_ket(p.target_state, "target state");
  for (const auto& fac : p.channel.in.factors()) {
    if (!p.source.layout.has(fac.label) ||
        p.source.layout.dim_of(fac.label) != fac.dim)
      throw invalid_input("channel input factor '" + fac.label +
                          "' does not match the source");
  }
  for (const auto& f : p.feedback_labels)
    if (!p.channel.out.has(f))
      throw invalid_input("feedback label '" + f + "' is not a channel output");
  for (const auto& l : p.alice_shared)
    if (!p.shared_state.layout.has(l))
      throw invalid_input("alice_shared label '" + l + "' is not a shared-state factor");
  for (const auto& l : p.alice_target)
    if (!p.target_state.layout.has(l))
      throw invalid_input("alice_target label '" + l + "' is not a target-state factor");

  const std::size_t nn = static_cast<std::size_t>(p.n);
  const DensityOperator rho_n = tensor_power(p.source, nn);
  const QuantumChannel chan_n = tensor_power(p.channel, nn);
  std::vector<std::string> k_n;
  if (p.n == 1) {
    k_n = p.feedback_labels;
  } else {
    for (int i = 1; i <= p.n; ++i)
      for (const auto& f : p.feedback_labels)
        k_n.push_back(copy_label(f, static_cast<std::size_t>(i)));
  }
  std::vector<std::string> b_n;
  for (const auto& l : chan_n.out.labels())
    if (std::find(k_n.begin(), k_n.end(), l) == k_n.end()) b_n.push_back(l);
  const std::vector<std::string> src_refs =
      rho_n.layout.complement(chan_n.in.labels()).labels();

  const std::vector<std::string> bob_shared =
      p.shared_state.layout.complement(p.alice_shared).labels();
  const std::vector<std::string> bob_target =
      p.target_state.layout.complement(p.alice_target).labels();

  if (!same_label_set(p.encoder.in.labels(),
                      concat_labels(chan_n.in.labels(), p.alice_shared)))
    throw invalid_input("encoder input must be the n-copy channel inputs plus alice_shared");
  if (!same_label_set(p.encoder.out.labels(),
                      concat_labels(concat_labels(p.message_labels, k_n), p.alice_target)))
    throw invalid_input("encoder output must be the message, feedback, and alice_target factors");
  if (!same_label_set(p.decoder.in.labels(), concat_labels(p.message_labels, bob_shared)))
    throw invalid_input("decoder input must be the message plus bob_shared factors");
  if (!same_label_set(p.decoder.out.labels(), concat_labels(b_n, bob_target)))
    throw invalid_input("decoder output must be the transmitted and bob_target factors");
  for (const auto& m : p.message_labels)
    if (p.encoder.out.dim_of(m) != p.decoder.in.dim_of(m))
      throw invalid_input("message factor '" + m + "' has mismatched dims");

  std::vector<std::string> taken = rho_n.layout.labels();
  for (const auto& l : p.encoder.out.labels()) taken.push_back(l);
  for (const auto& l : p.decoder.out.labels()) taken.push_back(l);
  for (const auto& l : p.shared_state.layout.labels()) taken.push_back(l);
  const std::string pur = fresh_label("R'", taken);
  const std::string wa = fresh_label("W_A", taken);
  const std::string wb = fresh_label("W_B", taken);

  const Ket psi = purify(rho_n, pur);
  Ket state = ket_tensor(psi, p.shared_state);

  const StinespringIsometry enc = stinespring_dilation(p.encoder, wa);
  state = apply_isometry_ket(state, enc.isometry.matrix, p.encoder.in.labels(),
                             p.encoder.out.concat(SystemLayout({Factor{wa, enc.env_dim}})));
  const StinespringIsometry dec = stinespring_dilation(p.decoder, wb);
  state = apply_isometry_ket(state, dec.isometry.matrix, p.decoder.in.labels(),
                             p.decoder.out.concat(SystemLayout({Factor{wb, dec.env_dim}})));

  ProtocolReport rep;
  rep.n = p.n;

  // Fidelity between the honest n-copy channel output (tensored with the
  // leftover target state) and the protocol's marginal; the purifier and the
  // environments stay outside the comparison.
  const DensityOperator sigma_n = apply_channel(chan_n, rho_n);
  const DensityOperator target_full = density_tensor(sigma_n, to_density(p.target_state));
  const std::vector<std::string> fid_labels = target_full.layout.labels();
  rep.fidelity = fidelity(target_full, partial_trace(state, fid_labels));

  std::size_t message_dim = 1;
  for (const auto& m : p.message_labels) message_dim *= p.encoder.out.dim_of(m);
  rep.classical_bits = std::log2(static_cast<double>(message_dim)) / p.n;

  const double s_a0 =
      p.alice_shared.empty() ? 0.0 : von_neumann_entropy(p.shared_state, p.alice_shared);
  const double s_a1 =
      p.alice_target.empty() ? 0.0 : von_neumann_entropy(p.target_state, p.alice_target);
  rep.entanglement_rate = (s_a0 - s_a1) / p.n;

  const std::vector<std::string> tgt = p.target_state.layout.labels();
  rep.leftover_entropy_doubled = tgt.empty() ? 0.0 : 2.0 * von_neumann_entropy(state, tgt);
  const double eps = std::min(1.0, std::max(0.0, 1.0 - rep.fidelity));
  const DecouplingCheck chk = decoupling_check(state, tgt, static_cast<std::size_t>(p.n), eps);
  rep.leftover_mi = chk.lhs;
  rep.bound = chk.rhs;
  rep.holds = chk.holds;
  rep.norm_defect = std::abs(state.amps.norm() - 1.0);
  return rep;
}

DecouplingCheck decoupling_check(const Ket& xi_n,
                                 const std::vector<std::string>& target_labels,
                                 std::size_t n, double eps) {
  std::size_t dim_tgt = 1;
  for (const auto& l : target_labels) dim_tgt *= xi_n.layout.dim_of(l);
  std::vector<std::string> rest;
  for (const auto& l : xi_n.layout.labels())
    if (std::find(target_labels.begin(), target_labels.end(), l) == target_labels.end())
      rest.push_back(l);
  DecouplingCheck chk;
  chk.lhs = (target_labels.empty() || rest.empty())
                ? 0.0
                : mutual_information(xi_n, target_labels, rest);
  chk.rhs = decoupling_delta(n, std::min(1.0, std::max(0.0, eps)), dim_tgt, 1);
  chk.holds = chk.lhs <= chk.rhs + 1e-9;
  return chk;
}

DecouplingInstance random_decoupling_instance(std::uint64_t seed, double min_fidelity) {
  if (!(min_fidelity > 0.0 && min_fidelity <= 1.0))
    throw invalid_input("min_fidelity must lie in (0, 1]");
  Rng rng(seed);

  SimProtocol p;
  p.n = 1;
  p.source = random_density(SystemLayout({Factor{"A", 2}, Factor{"R", 2}}), rng);
  p.channel = channel_from_stinespring(random_isometry(4, 2, rng),
                                       SystemLayout({Factor{"A", 2}}),
                                       SystemLayout({Factor{"B", 2}}), 2);
  p.shared_state = random_ket(SystemLayout({Factor{"A0", 2}, Factor{"B0", 2}}), rng);
  p.alice_shared = {"A0"};
  p.target_state = raw_ket(SystemLayout({Factor{"A1", 2}, Factor{"B1", 2}}),
                           p.shared_state.amps);
  p.alice_target = {"A1"};
  p.message_labels = {"M"};

  // Exact relay: apply the channel, send its output as the message, pass the
  // shared pair through untouched.
  QuantumChannel send = p.channel;
  send.out = SystemLayout({Factor{"M", 2}});
  const QuantumChannel enc0 = tensor(send, relabel_identity("A0", "A1", 2));
  const QuantumChannel dec0 =
      tensor(relabel_identity("M", "B", 2), relabel_identity("B0", "B1", 2));

  const Mat h_enc = random_hermitian(4, rng);
  const Mat h_dec = random_hermitian(4, rng);

  DecouplingInstance inst;
  inst.seed = seed;
  double delta = 0.8;
  for (int tries = 0; tries < 80; ++tries) {
    p.encoder = enc0;
    const Mat ue = unitary_exp_ih(h_enc, delta);
    for (auto& k : p.encoder.kraus) k = ue * k;
    p.decoder = dec0;
    const Mat ud = unitary_exp_ih(h_dec, delta);
    for (auto& k : p.decoder.kraus) k = ud * k;
    const ProtocolReport rep = run_protocol(p);
    if (rep.fidelity >= min_fidelity) {
      inst.protocol = p;
      inst.report = rep;
      inst.delta = delta;
      return inst;
    }
    delta /= 2.0;
  }
  throw numeric_failure("decoupling instance generator failed to reach the fidelity floor");
}

}  // namespace qrs
