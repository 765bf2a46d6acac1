#include "qrs/ki.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qrs/algebra.hpp"
#include "qrs/entropy.hpp"
#include "qrs/rng.hpp"

namespace qrs {

namespace {

std::string fresh_label(const std::string& base, const SystemLayout& taken) {
  std::string l = base;
  while (taken.has(l)) l += "'";
  return l;
}

// Hermitian operator basis on C^d: diagonal units, symmetrized and
// antisymmetrized off-diagonal pairs (d^2 elements).
std::vector<Mat> hermitian_basis(std::size_t d) {
  std::vector<Mat> out;
  out.reserve(d * d);
  for (std::size_t k = 0; k < d; ++k) {
    Mat m = Mat::Zero(d, d);
    m(k, k) = 1.0;
    out.push_back(std::move(m));
  }
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t l = k + 1; l < d; ++l) {
      Mat m = Mat::Zero(d, d);
      m(k, l) = m(l, k) = 1.0;
      out.push_back(std::move(m));
      Mat a = Mat::Zero(d, d);
      a(k, l) = cxd(0.0, 1.0);
      a(l, k) = cxd(0.0, -1.0);
      out.push_back(std::move(a));
    }
  return out;
}

struct RawBlock {
  Mat columns;  // d_A x (m*q), N-major, orthonormal, embedded in the full A space
  std::size_t m = 1, q = 1;
  double p = 0.0;
  Mat omega;   // m x m, trace 1
  Mat rho_qr;  // (q*dR) x (q*dR), trace 1
};

struct AttemptResult {
  std::vector<RawBlock> blocks;
  Mat full_basis;  // d_A x d_A unitary (block columns then kernel columns)
  double max_merged_gap = 0.0;
  double max_product_residual = 0.0;
  double off_block_residual = 0.0;
};

double trace_distance_mats(const Mat& a, const Mat& b) {
  EigH e = eig_hermitian(((a - b) + (a - b).adjoint()) / 2.0);
  return 0.5 * e.values.cwiseAbs().sum();
}

// One full structure-extraction pass with its own random stream.
AttemptResult run_attempt(const Mat& rho_mat, std::size_t d_a, std::size_t d_r,
                          const Mat& support, const Mat& kernel, const RVec& abar_evals,
                          const std::vector<Mat>& conditionals, double merge_tol,
                          std::uint64_t seed) {
  Rng rng(seed);
  const auto s = static_cast<std::size_t>(support.cols());

  // Sandwich the conditionals by abar^{-1/2} on the support.  In the support
  // eigenbasis the marginal is diagonal, so the sandwich is a scaling.
  Vec inv_sqrt(static_cast<Eigen::Index>(s));
  for (std::size_t i = 0; i < s; ++i) inv_sqrt(static_cast<Eigen::Index>(i)) = 1.0 / std::sqrt(abar_evals(static_cast<Eigen::Index>(i)));
  std::vector<Mat> sandwiched;
  sandwiched.reserve(conditionals.size());
  for (const Mat& c : conditionals) {
    Mat compressed = support.adjoint() * c * support;
    Mat sw = inv_sqrt.asDiagonal() * compressed * inv_sqrt.asDiagonal();
    sandwiched.push_back((sw + sw.adjoint()) / 2.0);
  }

  WedderburnResult wed = wedderburn_blocks(sandwiched, rng, merge_tol);

  AttemptResult res;
  res.max_merged_gap = wed.max_merged_gap;

  for (const AlgebraBlock& ab : wed.blocks) {
    const std::size_t m = ab.dim_n, q = ab.dim_q;
    Mat u_blk = support * ab.isometry;  // d_A x (m q)
    const std::size_t qdr = q * d_r;
    Mat t = kron(u_blk, Mat::Identity(d_r, d_r));
    Mat chi_raw = t.adjoint() * rho_mat * t;  // (m q dR)^2

    // Split the multiplicity factor along the state: a random effect on QR
    // diagonalizes the N direction whenever the block glues several true
    // blocks together (families linked by a fixed unitary on Q).
    Mat g = random_hermitian(qdr, rng);
    Mat kstar(m, m);
    for (std::size_t mu = 0; mu < m; ++mu)
      for (std::size_t nu = 0; nu < m; ++nu)
        kstar(mu, nu) = (g.transpose().cwiseProduct(
                             chi_raw.block(mu * qdr, nu * qdr, qdr, qdr)))
                            .sum();
    EigH ek = eig_hermitian((kstar + kstar.adjoint()) / 2.0);
    Mat rot = kron(ek.vectors, Mat::Identity(q, q));
    Mat cols_rot = ab.isometry * rot;                        // s x (m q), refined N basis
    Mat chi = kron(ek.vectors, Mat::Identity(qdr, qdr)).adjoint() * chi_raw *
              kron(ek.vectors, Mat::Identity(qdr, qdr));

    // Group the refined N directions by their conditional QR states.
    std::vector<Mat> cond(m);
    std::vector<double> weight(m);
    for (std::size_t mu = 0; mu < m; ++mu) {
      Mat blk = chi.block(mu * qdr, mu * qdr, qdr, qdr);
      weight[mu] = blk.trace().real();
      cond[mu] = weight[mu] > 1e-14 ? Mat((blk / weight[mu] + (blk / weight[mu]).adjoint()) / 2.0)
                                    : Mat(Mat::Zero(qdr, qdr));
    }
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t mu = 0; mu < m; ++mu) {
      bool placed = false;
      for (auto& grp : groups) {
        if (trace_distance_mats(cond[mu], cond[grp.front()]) <= merge_tol) {
          grp.push_back(mu);
          placed = true;
          break;
        }
      }
      if (!placed) groups.push_back({mu});
    }

    for (const auto& grp : groups) {
      RawBlock rb;
      rb.m = grp.size();
      rb.q = q;
      const std::size_t gd = rb.m * qdr;
      Mat gcols(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(rb.m * q));
      Mat gchi(gd, gd);
      for (std::size_t i = 0; i < rb.m; ++i) {
        gcols.block(0, static_cast<Eigen::Index>(i * q), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(q)) =
            cols_rot.block(0, static_cast<Eigen::Index>(grp[i] * q), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(q));
        for (std::size_t j = 0; j < rb.m; ++j)
          gchi.block(i * qdr, j * qdr, qdr, qdr) = chi.block(grp[i] * qdr, grp[j] * qdr, qdr, qdr);
      }
      rb.p = gchi.trace().real();
      if (rb.p < -1e-12) throw numeric_failure("ki: negative block weight");
      Mat gnorm = rb.p > 1e-14 ? Mat(gchi / rb.p) : Mat(Mat::Identity(gd, gd) / static_cast<double>(gd));
      // omega(mu,nu) = tr of the (mu,nu) QR sub-block; rho_qr = sum of the
      // diagonal sub-blocks.
      rb.omega = Mat::Zero(rb.m, rb.m);
      rb.rho_qr = Mat::Zero(qdr, qdr);
      for (std::size_t i = 0; i < rb.m; ++i) {
        for (std::size_t j = 0; j < rb.m; ++j)
          rb.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              gnorm.block(i * qdr, j * qdr, qdr, qdr).trace();
        rb.rho_qr += gnorm.block(i * qdr, i * qdr, qdr, qdr);
      }
      rb.omega = (rb.omega + rb.omega.adjoint()) / 2.0;
      rb.rho_qr = (rb.rho_qr + rb.rho_qr.adjoint()) / 2.0;
      Mat product = kron(rb.omega, rb.rho_qr);
      res.max_product_residual =
          std::max(res.max_product_residual, trace_distance_mats(gnorm, product));
      rb.columns = support * gcols;
      res.blocks.push_back(std::move(rb));
    }
  }

  // Assemble the full unitary: refined block columns, then the kernel.
  res.full_basis = Mat(d_a, d_a);
  Eigen::Index col = 0;
  for (const RawBlock& rb : res.blocks) {
    res.full_basis.block(0, col, d_a, rb.columns.cols()) = rb.columns;
    col += rb.columns.cols();
  }
  if (kernel.cols() > 0) res.full_basis.block(0, col, d_a, kernel.cols()) = kernel;

  // Off-block mass of the rotated state (independent global check).
  Mat tfull = kron(res.full_basis, Mat::Identity(d_r, d_r));
  Mat rot_state = tfull.adjoint() * rho_mat * tfull;
  Mat stripped = rot_state;
  Eigen::Index off = 0;
  for (const RawBlock& rb : res.blocks) {
    const Eigen::Index bd = static_cast<Eigen::Index>(rb.m * rb.q * d_r);
    stripped.block(off, off, bd, bd).setZero();
    off += bd;
  }
  res.off_block_residual = stripped.norm();
  return res;
}

bool signatures_agree(const std::vector<RawBlock>& a, const std::vector<RawBlock>& b) {
  if (a.size() != b.size()) return false;
  auto key = [](const RawBlock& rb) { return std::make_tuple(-rb.p, rb.m, rb.q); };
  std::vector<std::tuple<double, std::size_t, std::size_t>> ka, kb;
  for (const auto& rb : a) ka.push_back(key(rb));
  for (const auto& rb : b) kb.push_back(key(rb));
  std::sort(ka.begin(), ka.end());
  std::sort(kb.begin(), kb.end());
  for (std::size_t i = 0; i < ka.size(); ++i) {
    if (std::abs(std::get<0>(ka[i]) - std::get<0>(kb[i])) > 1e-7 ||
        std::get<1>(ka[i]) != std::get<1>(kb[i]) || std::get<2>(ka[i]) != std::get<2>(kb[i]))
      return false;
  }
  return true;
}

}  // namespace

KIDecomposition ki_decompose(const DensityOperator& rho,
                             const std::vector<std::string>& a_labels_in,
                             const KiOptions& options) {
  // Normalize the A labels to the state's layout order; R is the complement.
  std::set<std::string> a_set(a_labels_in.begin(), a_labels_in.end());
  if (a_set.size() != a_labels_in.size()) throw invalid_input("ki_decompose: duplicate A label");
  std::vector<std::string> a_labels;
  for (const auto& f : rho.layout.factors())
    if (a_set.count(f.label)) a_labels.push_back(f.label);
  if (a_labels.size() != a_labels_in.size())
    throw invalid_input("ki_decompose: unknown A label");
  SystemLayout r_layout = rho.layout.complement(a_labels);

  std::vector<std::string> order = a_labels;
  for (const auto& l : r_layout.labels()) order.push_back(l);
  DensityOperator perm = permute_systems(rho, order);
  SystemLayout a_layout = rho.layout.sublayout_ordered(a_labels);
  const std::size_t d_a = a_layout.dim();
  const std::size_t d_r = r_layout.dim();

  // A marginal, its support, and its kernel.
  Mat abar = Mat::Zero(d_a, d_a);
  for (std::size_t a = 0; a < d_a; ++a)
    for (std::size_t b = 0; b < d_a; ++b)
      for (std::size_t r = 0; r < d_r; ++r) abar(a, b) += perm.matrix(a * d_r + r, b * d_r + r);
  EigH ea = eig_hermitian((abar + abar.adjoint()) / 2.0);
  std::size_t s = 0;
  while (s < d_a && ea.values(static_cast<Eigen::Index>(s)) > Tolerances::rank_cutoff) ++s;
  if (s == 0) throw invalid_input("ki_decompose: zero A marginal");
  Mat support = ea.vectors.leftCols(static_cast<Eigen::Index>(s));
  Mat kernel = ea.vectors.rightCols(static_cast<Eigen::Index>(d_a - s));
  RVec sup_evals = ea.values.head(static_cast<Eigen::Index>(s));

  // Conditional operators rho_X = Tr_R[(I (+) X^T) rho] over a Hermitian
  // effect basis on R.
  std::vector<Mat> conditionals;
  for (const Mat& x : hermitian_basis(d_r)) {
    Mat c(d_a, d_a);
    for (std::size_t a = 0; a < d_a; ++a)
      for (std::size_t b = 0; b < d_a; ++b)
        c(a, b) = (x.cwiseProduct(perm.matrix.block(a * d_r, b * d_r, d_r, d_r))).sum();
    conditionals.push_back(std::move(c));
  }

  AttemptResult accepted;
  int attempts = 0;
  bool ok = false;
  for (int attempt = 0; attempt < options.max_attempts && !ok; ++attempt) {
    attempts = attempt + 1;
    AttemptResult first =
        run_attempt(perm.matrix, d_a, d_r, support, kernel, sup_evals, conditionals,
                    options.merge_tol, derive_seed(options.seed, 2 * static_cast<std::uint64_t>(attempt)));
    AttemptResult second =
        run_attempt(perm.matrix, d_a, d_r, support, kernel, sup_evals, conditionals,
                    options.merge_tol, derive_seed(options.seed, 2 * static_cast<std::uint64_t>(attempt) + 1));
    if (!signatures_agree(first.blocks, second.blocks)) continue;
    if (first.max_product_residual > 1e-8 || first.off_block_residual > 1e-8) continue;
    accepted = std::move(first);
    ok = true;
  }
  if (!ok)
    throw numeric_failure("ki_decompose: no consistent block structure after " +
                          std::to_string(attempts) + " attempts");

  // Canonical block order: weight descending, then dims, then omega spectrum.
  std::vector<std::size_t> idx(accepted.blocks.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<RVec> spectra(accepted.blocks.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    spectra[i] = eig_hermitian(accepted.blocks[i].omega).values;
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    const RawBlock &bx = accepted.blocks[x], &by = accepted.blocks[y];
    if (std::abs(bx.p - by.p) > 1e-12) return bx.p > by.p;
    if (bx.m != by.m) return bx.m < by.m;
    if (bx.q != by.q) return bx.q < by.q;
    for (Eigen::Index k = 0; k < spectra[x].size(); ++k) {
      if (std::abs(spectra[x](k) - spectra[y](k)) > 1e-12) return spectra[x](k) > spectra[y](k);
    }
    return x < y;
  });

  KIDecomposition d;
  d.full_layout = rho.layout;
  d.a_labels = a_labels;
  d.r_layout = r_layout;
  d.kernel_dim = d_a - s;
  d.cnq_label = fresh_label("CNQ", rho.layout);
  d.n_label = fresh_label("N", rho.layout);
  d.q_label = fresh_label("Q", rho.layout);
  d.diagnostics.attempts = attempts;
  d.diagnostics.near_degenerate_merge = accepted.max_merged_gap > 1e-10;
  d.diagnostics.max_block_product_residual = accepted.max_product_residual;
  d.diagnostics.off_block_residual = accepted.off_block_residual;

  Mat full_basis(d_a, d_a);
  Eigen::Index col = 0;
  std::size_t offset = 0;
  for (std::size_t i : idx) {
    RawBlock& rb = accepted.blocks[i];
    d.block_offsets.push_back(offset);
    offset += rb.m * rb.q;
    full_basis.block(0, col, d_a, rb.columns.cols()) = rb.columns;
    col += rb.columns.cols();

    KiBlock kb;
    kb.p = rb.p;
    kb.dim_n = rb.m;
    kb.dim_q = rb.q;
    kb.omega = DensityOperator(SystemLayout({{d.n_label, rb.m}}), rb.omega);
    SystemLayout qr_layout = SystemLayout({{d.q_label, rb.q}}).concat(r_layout);
    kb.rho_qr = DensityOperator(qr_layout, rb.rho_qr);
    d.blocks.push_back(std::move(kb));
  }
  if (d.kernel_dim > 0) full_basis.block(0, col, d_a, kernel.cols()) = kernel;

  d.u_ki = LinearOperator(a_layout, SystemLayout({{d.cnq_label, d_a}}), full_basis.adjoint());

  DensityOperator rec = ki_reconstruct(d);
  d.diagnostics.reconstruction_residual = trace_distance(rec, rho);
  return d;
}

DensityOperator ki_reconstruct(const KIDecomposition& d) {
  const std::size_t d_a = d.u_ki.out.dim();
  const std::size_t d_r = d.r_layout.dim();
  Mat omega_bd = Mat::Zero(d_a * d_r, d_a * d_r);
  for (std::size_t c = 0; c < d.blocks.size(); ++c) {
    const KiBlock& b = d.blocks[c];
    const std::size_t bd = b.dim_n * b.dim_q * d_r;
    const std::size_t off = d.block_offsets[c] * d_r;
    omega_bd.block(off, off, bd, bd) = b.p * kron(b.omega.matrix, b.rho_qr.matrix);
  }
  Mat u = kron(d.u_ki.matrix, Mat::Identity(d_r, d_r));
  Mat rec = u.adjoint() * omega_bd * u;

  std::vector<std::string> order = d.a_labels;
  for (const auto& l : d.r_layout.labels()) order.push_back(l);
  SystemLayout a_layout = d.full_layout.sublayout_ordered(d.a_labels);
  DensityOperator out(a_layout.concat(d.r_layout), (rec + rec.adjoint()) / 2.0);
  return permute_systems(out, d.full_layout.labels());
}

KiEntropies ki_entropies(const KIDecomposition& d) {
  KiEntropies e;
  RVec p(static_cast<Eigen::Index>(d.blocks.size()));
  for (std::size_t c = 0; c < d.blocks.size(); ++c) p(static_cast<Eigen::Index>(c)) = d.blocks[c].p;
  e.s_c = entropy_of_spectrum(p);
  e.s_cq = e.s_c;
  e.s_cnq = e.s_c;
  for (const KiBlock& b : d.blocks) {
    if (b.p <= 0.0) continue;
    DensityOperator q_marg = partial_trace(b.rho_qr, {d.q_label});
    e.s_cq += b.p * von_neumann_entropy(q_marg);
    e.s_cnq += b.p * (von_neumann_entropy(q_marg) + von_neumann_entropy(b.omega));
  }
  return e;
}

}  // namespace qrs
