#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrs/tensor.hpp"

namespace qrs {

// Block decomposition of a bipartite state's A side: a unitary U on A such
// that (U (+) I_R) rho (U^dag (+) I_R) = sum_c p_c Pi_c (omega_c^N (+)
// rho_c^{QR}) Pi_c, with the blocks laid out contiguously (direct sum) in the
// rotated space.  The structure is maximal: within each block, every channel
// on A preserving rho acts as a unitary on the N factor only.

struct KiBlock {
  double p = 0.0;
  std::size_t dim_n = 1;
  std::size_t dim_q = 1;
  DensityOperator omega;   // on [[n_label, dim_n]]
  DensityOperator rho_qr;  // on [[q_label, dim_q], R factors...]
};

struct KiDiagnostics {
  int attempts = 1;                        // seed pairs consumed
  bool near_degenerate_merge = false;      // a splitting gap fell inside merge_tol
  double max_block_product_residual = 0.0; // worst trace distance to product form
  double off_block_residual = 0.0;         // Frobenius mass outside the block diagonal
  double reconstruction_residual = 0.0;    // trace distance of the round trip
};

struct KIDecomposition {
  std::vector<KiBlock> blocks;

  // Isometry from the A factors onto the rotated block space, as a single
  // factor labeled cnq_label.  Rows are block-major: block c occupies rows
  // [block_offsets[c], block_offsets[c] + dim_n*dim_q), each block ordered
  // N-major; kernel_dim zero-weight rows (the kernel of the A marginal) sit
  // at the end, making the map a full unitary on A.
  LinearOperator u_ki;
  std::vector<std::size_t> block_offsets;
  std::size_t kernel_dim = 0;

  SystemLayout full_layout;          // original layout of the input state
  std::vector<std::string> a_labels; // in original layout order
  SystemLayout r_layout;             // remaining factors, original order
  std::string cnq_label, n_label, q_label;

  KiDiagnostics diagnostics;
};

struct KiOptions {
  std::uint64_t seed = 7;
  double merge_tol = Tolerances::block_merge;
  int max_attempts = 5;
};

// Computes the decomposition.  Randomized internally but a pure function of
// (state, options): two independent seeded draws must agree on the block
// signatures (p_c, dim_n, dim_q) or the attempt is retried (max_attempts,
// then numeric_failure).
KIDecomposition ki_decompose(const DensityOperator& rho,
                             const std::vector<std::string>& a_labels,
                             const KiOptions& options = {});

// Rebuilds the state from the block data: (U^dag (+) I) [ sum_c p_c omega_c
// (+) rho_c ] (U (+) I), returned on the original layout.
DensityOperator ki_reconstruct(const KIDecomposition& d);

// S(C) = H({p_c}); S(CQ) = H({p_c}) + sum_c p_c S(rho_c^Q);
// S(CNQ) = S(CQ) + sum_c p_c S(omega_c).  All in bits.
struct KiEntropies {
  double s_c = 0.0;
  double s_cq = 0.0;
  double s_cnq = 0.0;
};

KiEntropies ki_entropies(const KIDecomposition& d);

}  // namespace qrs
