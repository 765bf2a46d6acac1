#include "qrs/channel.hpp"

#include <algorithm>
#include <set>

namespace qrs {

QuantumChannel::QuantumChannel(SystemLayout in_lay, SystemLayout out_lay,
                               std::vector<Mat> ks)
    : in(std::move(in_lay)), out(std::move(out_lay)), kraus(std::move(ks)) {
  if (kraus.empty()) throw invalid_input("channel: empty Kraus list");
  for (const Mat& k : kraus) {
    if (static_cast<std::size_t>(k.rows()) != out.dim() ||
        static_cast<std::size_t>(k.cols()) != in.dim())
      throw invalid_input("channel: Kraus shape does not match layouts " + out.to_string() +
                          " x " + in.to_string());
  }
}

CptpReport validate_cptp(const QuantumChannel& ch, double tol) {
  CptpReport rep;
  Mat acc = Mat::Zero(ch.dim_in(), ch.dim_in());
  for (const Mat& k : ch.kraus) acc += k.adjoint() * k;
  rep.tp_residual = (acc - Mat::Identity(ch.dim_in(), ch.dim_in())).cwiseAbs().maxCoeff();
  // The Choi operator of a Kraus-given map is PSD by construction; the
  // eigenvalue check guards against corrupted (e.g. deserialized) data.
  Mat j = to_choi(ch);
  EigH e = eig_hermitian((j + j.adjoint()) / 2.0);
  rep.cp_min_eigenvalue = e.values.minCoeff();
  rep.pass = rep.tp_residual <= tol && rep.cp_min_eigenvalue >= -tol;
  return rep;
}

void require_cptp(const QuantumChannel& ch, double tol) {
  CptpReport rep = validate_cptp(ch, tol);
  if (!rep.pass)
    throw invalid_input("channel is not CPTP (tp residual " +
                        std::to_string(rep.tp_residual) + ", min Choi eigenvalue " +
                        std::to_string(rep.cp_min_eigenvalue) + ")");
}

namespace {

// Applies X (+) I_rest three-tensor style: rho is (d_act*d_rest) square with
// the acted factors leading; returns (X (+) I) rho.
Mat left_apply(const Mat& x, const Mat& rho, std::size_t d_rest) {
  const std::size_t d_in = x.cols(), d_out = x.rows();
  const std::size_t cols = rho.cols();
  Mat out(d_out * d_rest, cols);
  for (std::size_t r = 0; r < d_rest; ++r) {
    Mat slice(d_in, cols);
    for (std::size_t i = 0; i < d_in; ++i) slice.row(i) = rho.row(i * d_rest + r);
    Mat moved = x * slice;
    for (std::size_t o = 0; o < d_out; ++o) out.row(o * d_rest + r) = moved.row(o);
  }
  return out;
}

}  // namespace

DensityOperator apply_channel(const QuantumChannel& ch, const DensityOperator& rho) {
  const std::vector<std::string> acted = ch.in.labels();
  for (const auto& l : acted)
    if (rho.layout.dim_of(l) != ch.in.dim_of(l))
      throw invalid_input("apply_channel: dim mismatch on factor '" + l + "'");
  const SystemLayout rest = rho.layout.complement(acted);
  for (const auto& f : ch.out.factors())
    if (rest.has(f.label))
      throw invalid_input("apply_channel: output label '" + f.label +
                          "' collides with a surviving factor");

  // Permute acted factors to the front.
  std::vector<std::string> order = acted;
  for (const auto& l : rest.labels()) order.push_back(l);
  DensityOperator p = permute_systems(rho, order);
  const std::size_t d_rest = rest.dim();

  const std::size_t d_out_total = ch.dim_out() * d_rest;
  Mat acc = Mat::Zero(d_out_total, d_out_total);
  for (const Mat& k : ch.kraus) {
    Mat half = left_apply(k, p.matrix, d_rest);        // (K (+) I) rho
    acc += left_apply(k, half.adjoint(), d_rest);      // (K (+) I) rho (K (+) I)^dag
  }
  // Assembled layout is [out..., rest...].
  SystemLayout tmp_lay = ch.out.concat(rest);
  DensityOperator assembled(tmp_lay, std::move(acc));

  // In-place order: out factors take the first acted factor's slot.
  std::vector<std::string> final_order;
  const std::string& first_acted = acted.front();
  std::set<std::string> acted_set(acted.begin(), acted.end());
  for (const auto& f : rho.layout.factors()) {
    if (f.label == first_acted) {
      for (const auto& of : ch.out.factors()) final_order.push_back(of.label);
    } else if (!acted_set.count(f.label)) {
      final_order.push_back(f.label);
    }
  }
  return permute_systems(assembled, final_order);
}

StinespringIsometry stinespring_dilation(const QuantumChannel& ch,
                                         const std::string& env_label) {
  const std::size_t n_env = ch.kraus.size();
  const std::size_t d_in = ch.dim_in(), d_out = ch.dim_out();
  Mat v = Mat::Zero(d_out * n_env, d_in);
  // Big-endian [out, env]: row (o, e) = o * n_env + e.
  for (std::size_t e = 0; e < n_env; ++e)
    for (std::size_t o = 0; o < d_out; ++o)
      v.row(o * n_env + e) = ch.kraus[e].row(o);
  if (ch.out.has(env_label))
    throw invalid_input("stinespring_dilation: env label '" + env_label +
                        "' collides with channel output");
  StinespringIsometry s;
  s.in = ch.in;
  s.out = ch.out;
  s.env_label = env_label;
  s.env_dim = n_env;
  SystemLayout full_out = ch.out.concat(SystemLayout({{env_label, n_env}}));
  s.isometry = LinearOperator(ch.in, full_out, std::move(v));
  return s;
}

QuantumChannel complementary_channel(const QuantumChannel& ch,
                                     const std::string& env_label) {
  // Kraus of the complement: C_o = (<o|_out (+) I_env) V, one per output
  // basis vector; C_o[e, i] = K_e[o, i].
  const std::size_t n_env = ch.kraus.size();
  const std::size_t d_in = ch.dim_in(), d_out = ch.dim_out();
  std::vector<Mat> comp(d_out, Mat::Zero(n_env, d_in));
  for (std::size_t o = 0; o < d_out; ++o)
    for (std::size_t e = 0; e < n_env; ++e) comp[o].row(e) = ch.kraus[e].row(o);
  return QuantumChannel(ch.in, SystemLayout({{env_label, n_env}}), std::move(comp));
}

Mat to_choi(const QuantumChannel& ch) {
  const std::size_t d_in = ch.dim_in(), d_out = ch.dim_out();
  Mat j = Mat::Zero(d_in * d_out, d_in * d_out);
  for (const Mat& k : ch.kraus) {
    // |phi_k> = sum_i |i> (+) K|i>, vectorized big-endian [in, out].
    Vec phi(d_in * d_out);
    for (std::size_t i = 0; i < d_in; ++i)
      for (std::size_t o = 0; o < d_out; ++o) phi(i * d_out + o) = k(o, i);
    j += phi * phi.adjoint();
  }
  return j;
}

QuantumChannel from_choi(const Mat& choi, const SystemLayout& in,
                         const SystemLayout& out) {
  const std::size_t d_in = in.dim(), d_out = out.dim();
  if (static_cast<std::size_t>(choi.rows()) != d_in * d_out || choi.rows() != choi.cols())
    throw invalid_input("from_choi: shape does not match layouts");
  if ((choi - choi.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
    throw invalid_input("from_choi: Choi operator not Hermitian");
  // Trace over the output factor must be the identity on the input factor.
  Mat tr_out = Mat::Zero(d_in, d_in);
  for (std::size_t i = 0; i < d_in; ++i)
    for (std::size_t j = 0; j < d_in; ++j)
      for (std::size_t o = 0; o < d_out; ++o)
        tr_out(i, j) += choi(i * d_out + o, j * d_out + o);
  if ((tr_out - Mat::Identity(d_in, d_in)).cwiseAbs().maxCoeff() > 1e-8)
    throw invalid_input("from_choi: partial trace over output is not the identity");
  EigH e = eig_hermitian((choi + choi.adjoint()) / 2.0);
  if (e.values.minCoeff() < -1e-8)
    throw invalid_input("from_choi: Choi operator not positive semidefinite");
  std::vector<Mat> kraus;
  for (Eigen::Index c = 0; c < e.values.size(); ++c) {
    if (e.values(c) <= Tolerances::rank_cutoff) continue;
    const double w = std::sqrt(e.values(c));
    Mat k(d_out, d_in);
    for (std::size_t i = 0; i < d_in; ++i)
      for (std::size_t o = 0; o < d_out; ++o)
        k(o, i) = w * e.vectors(static_cast<Eigen::Index>(i * d_out + o), c);
    kraus.push_back(std::move(k));
  }
  if (kraus.empty()) throw invalid_input("from_choi: zero Choi operator");
  return QuantumChannel(in, out, std::move(kraus));
}

QuantumChannel canonical_kraus(const QuantumChannel& ch) {
  return from_choi(to_choi(ch), ch.in, ch.out);
}

double channel_distance(const QuantumChannel& a, const QuantumChannel& b) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out())
    throw invalid_input("channel_distance: shape mismatch");
  Mat d = to_choi(a) - to_choi(b);
  EigH e = eig_hermitian((d + d.adjoint()) / 2.0);
  return 0.5 * e.values.cwiseAbs().sum() / static_cast<double>(a.dim_in());
}

QuantumChannel channel_from_isometry(const LinearOperator& v) {
  return QuantumChannel(v.in, v.out, {v.matrix});
}

QuantumChannel channel_from_stinespring(const Mat& v, const SystemLayout& in,
                                        const SystemLayout& out, std::size_t env_dim) {
  const std::size_t d_in = in.dim(), d_out = out.dim();
  if (static_cast<std::size_t>(v.rows()) != d_out * env_dim ||
      static_cast<std::size_t>(v.cols()) != d_in)
    throw invalid_input("channel_from_stinespring: shape mismatch");
  std::vector<Mat> kraus(env_dim, Mat::Zero(d_out, d_in));
  for (std::size_t e = 0; e < env_dim; ++e)
    for (std::size_t o = 0; o < d_out; ++o) kraus[e].row(o) = v.row(o * env_dim + e);
  return QuantumChannel(in, out, std::move(kraus));
}

QuantumChannel identity_channel(const SystemLayout& lay) {
  return QuantumChannel(lay, lay, {Mat::Identity(lay.dim(), lay.dim())});
}

QuantumChannel tensor(const QuantumChannel& a, const QuantumChannel& b) {
  SystemLayout in = a.in.concat(b.in);
  SystemLayout out = a.out.concat(b.out);
  std::vector<Mat> kraus;
  kraus.reserve(a.kraus.size() * b.kraus.size());
  for (const Mat& ka : a.kraus)
    for (const Mat& kb : b.kraus) {
      Mat k(ka.rows() * kb.rows(), ka.cols() * kb.cols());
      for (Eigen::Index i = 0; i < ka.rows(); ++i)
        for (Eigen::Index j = 0; j < ka.cols(); ++j)
          k.block(i * kb.rows(), j * kb.cols(), kb.rows(), kb.cols()) = ka(i, j) * kb;
      kraus.push_back(std::move(k));
    }
  return QuantumChannel(std::move(in), std::move(out), std::move(kraus));
}

std::string copy_label(const std::string& base, std::size_t copy_index) {
  return base + "#" + std::to_string(copy_index);
}

namespace {

SystemLayout suffixed(const SystemLayout& lay, std::size_t copy_index) {
  std::vector<Factor> fs;
  for (const Factor& f : lay.factors())
    fs.push_back({copy_label(f.label, copy_index), f.dim});
  return SystemLayout(std::move(fs));
}

}  // namespace

QuantumChannel tensor_power(const QuantumChannel& ch, std::size_t n) {
  if (n == 0) throw invalid_input("tensor_power: n must be >= 1");
  if (n == 1) return ch;
  QuantumChannel acc(suffixed(ch.in, 1), suffixed(ch.out, 1), ch.kraus);
  for (std::size_t c = 2; c <= n; ++c)
    acc = tensor(acc, QuantumChannel(suffixed(ch.in, c), suffixed(ch.out, c), ch.kraus));
  return acc;
}

DensityOperator tensor_power(const DensityOperator& rho, std::size_t n) {
  if (n == 0) throw invalid_input("tensor_power: n must be >= 1");
  if (n == 1) return rho;
  DensityOperator acc(suffixed(rho.layout, 1), rho.matrix);
  for (std::size_t c = 2; c <= n; ++c)
    acc = tensor(acc, DensityOperator(suffixed(rho.layout, c), rho.matrix));
  return acc;
}

}  // namespace qrs
