#pragma once

#include <vector>

#include "qrs/tensor.hpp"

namespace qrs {

// All entropies are in bits (binary logarithm).

// Entropy of a spectrum: eigenvalues in [-1e-12, 0) are clamped to zero
// before the logarithm; anything more negative throws invalid_input.
double entropy_of_spectrum(const RVec& eigenvalues);

double von_neumann_entropy(const DensityOperator& rho);
double von_neumann_entropy(const DensityOperator& rho,
                           const std::vector<std::string>& subsystem);
double von_neumann_entropy(const Ket& psi,
                           const std::vector<std::string>& subsystem);

// Entropy of a marginal together with the spectrum it was computed from and
// the total negative eigenvalue mass clamped to zero along the way.
struct EntropyReport {
  double value = 0.0;
  RVec spectrum;  // marginal eigenvalues, descending
  double clamped_mass = 0.0;
};
// Empty subsystem list: the whole state.
EntropyReport entropy_report(const DensityOperator& rho,
                             const std::vector<std::string>& subsystem = {});

// S(X|Y) = S(XY) - S(Y).
double conditional_entropy(const DensityOperator& rho,
                           const std::vector<std::string>& x,
                           const std::vector<std::string>& y);

// I(X:Y) = S(X) + S(Y) - S(XY).
double mutual_information(const DensityOperator& rho,
                          const std::vector<std::string>& x,
                          const std::vector<std::string>& y);
double mutual_information(const Ket& psi, const std::vector<std::string>& x,
                          const std::vector<std::string>& y);

// I(X:Y|Z) = S(XZ) + S(YZ) - S(XYZ) - S(Z).
double conditional_mutual_information(const DensityOperator& rho,
                                      const std::vector<std::string>& x,
                                      const std::vector<std::string>& y,
                                      const std::vector<std::string>& z);

// Uhlmann fidelity F(rho, xi) = || sqrt(rho) sqrt(xi) ||_1.  Layouts must
// carry the same factors; xi is permuted to rho's order first.
double fidelity(const DensityOperator& rho, const DensityOperator& xi);

// (1/2) || rho - xi ||_1.
double trace_distance(const DensityOperator& rho, const DensityOperator& xi);

// h(x) = -x log2 x - (1-x) log2(1-x) on [0,1], h(0)=h(1)=0.
double binary_entropy(double x);

// Entropy-difference bound eps*log2(dim) + h(eps) at trace distance eps.
double fannes_audenaert_bound(double eps, std::size_t dim);

// Conditional-entropy continuity bound 2*eps*log2(dim_a) + (1+eps)*h(eps/(1+eps)).
double afw_bound(double eps, std::size_t dim_a);

// Right-hand side of the decoupling inequality for an n-copy protocol with
// fidelity defect eps and entanglement registers of dims (dim_a1, dim_b1):
//   2*sqrt(6 eps)*log2(dim_a1*dim_b1) + 2*h(min(sqrt(6 eps), 1)).
// Returns the n-copy total (what the mutual information is compared to).
double decoupling_delta(std::size_t n, double eps, std::size_t dim_a1,
                        std::size_t dim_b1);

}  // namespace qrs
