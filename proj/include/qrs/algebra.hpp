#pragma once

#include <vector>

#include "qrs/common.hpp"
#include "qrs/rng.hpp"

namespace qrs {

// Finite-dimensional *-algebra machinery over C^s with the Hilbert-Schmidt
// inner product <A,B> = tr(A^dag B).  Used to block-diagonalize the algebra
// generated by a family of Hermitian operators.

// Orthonormal basis of the linear span of `mats`.  Rank decided by singular
// values > rel_tol * sigma_max.
std::vector<Mat> orthonormal_matrix_span(const std::vector<Mat>& mats,
                                         double rel_tol = 1e-10);

// Orthonormal basis of the unital algebra generated by `generators`
// (closure of span{I, generators} under products).  When the generators are
// Hermitian the result is automatically a *-algebra.
std::vector<Mat> algebra_closure(const std::vector<Mat>& generators,
                                 double rel_tol = 1e-10);

// Orthonormal basis of {z in span(basis) : [z, g] = 0 for all generators g}.
// Commuting with the generators is equivalent to commuting with the whole
// generated algebra.
std::vector<Mat> algebra_center(const std::vector<Mat>& basis,
                                const std::vector<Mat>& generators,
                                double rel_tol = 1e-9);

// One Wedderburn factor: an isometry onto a reducing subspace N (+) Q on
// which the algebra acts as I_N (+) B(Q).  Columns are ordered N-major:
// column mu*dim_q + nu is the basis vector |n_mu> (+) |q_nu>.
struct AlgebraBlock {
  Mat isometry;  // s x (dim_n * dim_q), orthonormal columns
  std::size_t dim_n = 1;
  std::size_t dim_q = 1;
};

struct WedderburnResult {
  std::vector<AlgebraBlock> blocks;
  // Largest eigenvalue gap of the central splitting element that was merged
  // into one block (0 when all merged gaps are at roundoff level); a value
  // near merge_tol signals a borderline split decision.
  double max_merged_gap = 0.0;
};

// Decomposes C^s = (+)_c N_c (+) Q_c adapted to the algebra generated by the
// Hermitian `generators`, so that the algebra equals (+)_c I_{N_c} (+) B(Q_c).
// Randomized (seeded via rng) but exact up to numerical tolerance; throws
// numeric_failure when the structure cannot be extracted consistently.
WedderburnResult wedderburn_blocks(const std::vector<Mat>& generators, Rng& rng,
                                   double merge_tol);

}  // namespace qrs
