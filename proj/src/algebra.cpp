#include "qrs/algebra.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "qrs/tensor.hpp"

namespace qrs {

namespace {

Vec vectorize(const Mat& m) {
  Vec v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(k++) = m(i, j);
  return v;
}

Mat unvectorize(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v(k++);
  return m;
}

}  // namespace

std::vector<Mat> orthonormal_matrix_span(const std::vector<Mat>& mats, double rel_tol) {
  if (mats.empty()) return {};
  const Eigen::Index rows = mats.front().rows(), cols = mats.front().cols();
  Mat stack(rows * cols, static_cast<Eigen::Index>(mats.size()));
  for (std::size_t i = 0; i < mats.size(); ++i) stack.col(static_cast<Eigen::Index>(i)) = vectorize(mats[i]);
  // JacobiSVD throughout this file: BDCSVD can emit NaN factors on the very
  // rank-deficient stacks built here (observed with Eigen 3.4).
  Eigen::JacobiSVD<Mat> svd(stack, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0) return {};
  std::vector<Mat> basis;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) basis.push_back(unvectorize(svd.matrixU().col(i), rows, cols));
  }
  return basis;
}

std::vector<Mat> algebra_closure(const std::vector<Mat>& generators, double rel_tol) {
  if (generators.empty()) throw invalid_input("algebra_closure: no generators");
  const Eigen::Index s = generators.front().rows();
  std::vector<Mat> seed = generators;
  seed.push_back(Mat::Identity(s, s));
  std::vector<Mat> basis = orthonormal_matrix_span(seed, rel_tol);
  for (Eigen::Index round = 0; round < s * s + 1; ++round) {
    std::vector<Mat> extended = basis;
    for (const Mat& a : basis)
      for (const Mat& b : basis) extended.push_back(a * b);
    std::vector<Mat> next = orthonormal_matrix_span(extended, rel_tol);
    if (next.size() == basis.size()) return next;
    basis = std::move(next);
  }
  throw numeric_failure("algebra_closure: dimension did not stabilize");
}

std::vector<Mat> algebra_center(const std::vector<Mat>& basis,
                                const std::vector<Mat>& generators, double rel_tol) {
  if (basis.empty()) return {};
  const Eigen::Index s = basis.front().rows();
  const Eigen::Index k = static_cast<Eigen::Index>(basis.size());
  const Eigen::Index g = static_cast<Eigen::Index>(generators.size());
  Mat constraints(s * s * g, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index r = 0; r < g; ++r) {
      Mat comm = basis[static_cast<std::size_t>(i)] * generators[static_cast<std::size_t>(r)] -
                 generators[static_cast<std::size_t>(r)] * basis[static_cast<std::size_t>(i)];
      constraints.block(r * s * s, i, s * s, 1) = vectorize(comm);
    }
  }
  Eigen::JacobiSVD<Mat> svd(constraints, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = rel_tol * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  std::vector<Mat> center;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double sigma = i < sv.size() ? sv(i) : 0.0;
    if (sigma <= cutoff) {
      Mat z = Mat::Zero(s, s);
      for (Eigen::Index j = 0; j < k; ++j) z += svd.matrixV()(j, i) * basis[static_cast<std::size_t>(j)];
      center.push_back(std::move(z));
    }
  }
  if (center.empty()) throw numeric_failure("algebra_center: identity not detected as central");
  return center;
}

namespace {

// Groups the (sorted descending) eigenvalues of a Hermitian operator into
// clusters separated by gaps > tol.  Returns cluster index ranges and tracks
// the largest merged gap.
std::vector<std::pair<Eigen::Index, Eigen::Index>> cluster_eigenvalues(const RVec& values,
                                                                       double tol,
                                                                       double* max_merged_gap) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;
  Eigen::Index start = 0;
  for (Eigen::Index i = 1; i <= values.size(); ++i) {
    if (i == values.size() || values(i - 1) - values(i) > tol) {
      groups.push_back({start, i});
      start = i;
    } else if (max_merged_gap) {
      *max_merged_gap = std::max(*max_merged_gap, values(i - 1) - values(i));
    }
  }
  return groups;
}

Mat random_hermitian_combo(const std::vector<Mat>& basis, Rng& rng) {
  const Eigen::Index s = basis.front().rows();
  Mat z = Mat::Zero(s, s);
  for (const Mat& b : basis) z += rng.complex_gaussian() * b;
  return (z + z.adjoint()) / 2.0;
}

// Splits one central eigenspace (columns of `block_basis`) into N (+) Q via a
// random element of the compressed algebra.  Returns false when the random
// draw was degenerate and a retry is warranted.
bool factor_block(const Mat& block_basis, const std::vector<Mat>& algebra_basis, Rng& rng,
                  double merge_tol, AlgebraBlock* out) {
  const Eigen::Index bd = block_basis.cols();
  std::vector<Mat> compressed;
  compressed.reserve(algebra_basis.size());
  for (const Mat& b : algebra_basis) compressed.push_back(block_basis.adjoint() * b * block_basis);
  std::vector<Mat> cbasis = orthonormal_matrix_span(compressed, 1e-10);
  const std::size_t kc = cbasis.size();
  const auto q = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(kc))));
  if (static_cast<std::size_t>(q) * static_cast<std::size_t>(q) != kc || q < 1 || bd % q != 0)
    throw numeric_failure("factor_block: compressed algebra dimension is not a square");
  const Eigen::Index m = bd / q;

  // Generic Hermitian element acts as X (+) I_m; its spectrum has q clusters
  // of size m whose eigenspaces are x_i (+) C^m.
  Mat a = random_hermitian_combo(cbasis, rng);
  EigH ea = eig_hermitian(a);
  const double scale = std::max(1.0, ea.values.cwiseAbs().maxCoeff());
  RVec scaled = ea.values / scale;
  auto groups = cluster_eigenvalues(scaled, merge_tol, nullptr);
  if (static_cast<Eigen::Index>(groups.size()) != q) return false;
  for (const auto& g : groups)
    if (g.second - g.first != m) return false;

  // Multiplicity basis: the top eigenspace is x_1 (+) N.
  Mat e = ea.vectors.block(0, groups[0].first, bd, m);  // bd x m

  // Sweep the algebra through e's first column to get a Q basis, keeping the
  // expansion coefficients so the same Q basis is reproduced on every
  // multiplicity direction.
  Mat swept(bd, static_cast<Eigen::Index>(kc));
  for (std::size_t i = 0; i < kc; ++i) swept.col(static_cast<Eigen::Index>(i)) = cbasis[i] * e.col(0);
  Eigen::JacobiSVD<Mat> svd(swept, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * sv(0)) ++rank;
  if (rank != q) return false;

  // Column mu*q + nu = y_nu (+) n_mu, built as sum_i coeff(nu,i) X_i e_mu.
  Mat cols(bd, m * q);
  for (Eigen::Index mu = 0; mu < m; ++mu) {
    Mat swept_mu(bd, static_cast<Eigen::Index>(kc));
    for (std::size_t i = 0; i < kc; ++i) swept_mu.col(static_cast<Eigen::Index>(i)) = cbasis[i] * e.col(mu);
    for (Eigen::Index nu = 0; nu < q; ++nu)
      cols.col(mu * q + nu) = swept_mu * svd.matrixV().col(nu) / sv(nu);
  }
  if ((cols.adjoint() * cols - Mat::Identity(m * q, m * q)).cwiseAbs().maxCoeff() > 1e-8)
    return false;

  out->isometry = block_basis * cols;
  out->dim_n = static_cast<std::size_t>(m);
  out->dim_q = static_cast<std::size_t>(q);
  return true;
}

}  // namespace

WedderburnResult wedderburn_blocks(const std::vector<Mat>& generators, Rng& rng,
                                   double merge_tol) {
  std::vector<Mat> basis = algebra_closure(generators);
  std::vector<Mat> center = algebra_center(basis, generators);

  WedderburnResult res;
  for (int attempt = 0; attempt < 8; ++attempt) {
    res.blocks.clear();
    res.max_merged_gap = 0.0;

    Mat z = random_hermitian_combo(center, rng);
    EigH ez = eig_hermitian(z);
    const double scale = std::max(1.0, ez.values.cwiseAbs().maxCoeff());
    RVec scaled = ez.values / scale;
    auto groups = cluster_eigenvalues(scaled, merge_tol, &res.max_merged_gap);
    // A generic central element separates all blocks; too few clusters only
    // happens on a degenerate draw, caught by the factor step below or by the
    // caller's two-draw agreement check.

    bool ok = true;
    for (const auto& g : groups) {
      Mat block_basis = ez.vectors.block(0, g.first, ez.vectors.rows(), g.second - g.first);
      AlgebraBlock blk;
      if (!factor_block(block_basis, basis, rng, merge_tol, &blk)) {
        ok = false;
        break;
      }
      res.blocks.push_back(std::move(blk));
    }
    if (ok) return res;
  }
  throw numeric_failure("wedderburn_blocks: could not factor blocks after retries");
}

}  // namespace qrs
