#include "qrs/entropy.hpp"

#include <cmath>

namespace qrs {

namespace {

std::vector<std::string> join(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  std::vector<std::string> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

double entropy_of_spectrum(const RVec& eigenvalues) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    double v = eigenvalues(i);
    if (v < -Tolerances::eig_clamp_negative)
      throw invalid_input("entropy: eigenvalue " + std::to_string(v) +
                          " below clamping range (invalid state)");
    if (v <= 0.0) continue;
    s -= v * std::log2(v);
  }
  return s;
}

double von_neumann_entropy(const DensityOperator& rho) {
  EigH e = eig_hermitian((rho.matrix + rho.matrix.adjoint()) / 2.0);
  return entropy_of_spectrum(e.values);
}

double von_neumann_entropy(const DensityOperator& rho,
                           const std::vector<std::string>& subsystem) {
  return von_neumann_entropy(partial_trace(rho, subsystem));
}

double von_neumann_entropy(const Ket& psi,
                           const std::vector<std::string>& subsystem) {
  return von_neumann_entropy(partial_trace(psi, subsystem));
}

EntropyReport entropy_report(const DensityOperator& rho,
                             const std::vector<std::string>& subsystem) {
  const DensityOperator marg = subsystem.empty() ? rho : partial_trace(rho, subsystem);
  const EigH e = eig_hermitian((marg.matrix + marg.matrix.adjoint()) / 2.0);
  EntropyReport rep;
  rep.spectrum = e.values;
  rep.value = entropy_of_spectrum(e.values);
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (e.values(i) < 0.0) rep.clamped_mass += -e.values(i);
  return rep;
}

double conditional_entropy(const DensityOperator& rho,
                           const std::vector<std::string>& x,
                           const std::vector<std::string>& y) {
  return von_neumann_entropy(rho, join(x, y)) - von_neumann_entropy(rho, y);
}

double mutual_information(const DensityOperator& rho,
                          const std::vector<std::string>& x,
                          const std::vector<std::string>& y) {
  return von_neumann_entropy(rho, x) + von_neumann_entropy(rho, y) -
         von_neumann_entropy(rho, join(x, y));
}

double mutual_information(const Ket& psi, const std::vector<std::string>& x,
                          const std::vector<std::string>& y) {
  return von_neumann_entropy(psi, x) + von_neumann_entropy(psi, y) -
         von_neumann_entropy(psi, join(x, y));
}

double conditional_mutual_information(const DensityOperator& rho,
                                      const std::vector<std::string>& x,
                                      const std::vector<std::string>& y,
                                      const std::vector<std::string>& z) {
  return von_neumann_entropy(rho, join(x, z)) + von_neumann_entropy(rho, join(y, z)) -
         von_neumann_entropy(rho, join(join(x, y), z)) - von_neumann_entropy(rho, z);
}

double fidelity(const DensityOperator& rho, const DensityOperator& xi_in) {
  if (rho.layout.dim() != xi_in.layout.dim())
    throw invalid_input("fidelity: dimension mismatch");
  Mat xi = xi_in.matrix;
  if (!(rho.layout == xi_in.layout)) {
    xi = permute_systems(xi_in, rho.layout.labels()).matrix;
  }
  EigH er = eig_hermitian((rho.matrix + rho.matrix.adjoint()) / 2.0);
  Mat sqrt_rho = Mat::Zero(rho.matrix.rows(), rho.matrix.cols());
  for (Eigen::Index i = 0; i < er.values.size(); ++i) {
    double v = er.values(i);
    if (v < -Tolerances::eig_clamp_negative)
      throw invalid_input("fidelity: first argument has negative eigenvalue");
    if (v <= 0.0) continue;
    sqrt_rho += std::sqrt(v) * er.vectors.col(i) * er.vectors.col(i).adjoint();
  }
  Mat inner = sqrt_rho * xi * sqrt_rho;
  EigH ei = eig_hermitian((inner + inner.adjoint()) / 2.0);
  double f = 0.0;
  for (Eigen::Index i = 0; i < ei.values.size(); ++i) {
    double v = ei.values(i);
    if (v <= 0.0) continue;  // clamp tiny negatives from roundoff
    f += std::sqrt(v);
  }
  return f;
}

double trace_distance(const DensityOperator& rho, const DensityOperator& xi_in) {
  if (rho.layout.dim() != xi_in.layout.dim())
    throw invalid_input("trace_distance: dimension mismatch");
  Mat xi = xi_in.matrix;
  if (!(rho.layout == xi_in.layout)) {
    xi = permute_systems(xi_in, rho.layout.labels()).matrix;
  }
  Mat d = rho.matrix - xi;
  EigH e = eig_hermitian((d + d.adjoint()) / 2.0);
  return 0.5 * e.values.cwiseAbs().sum();
}

double binary_entropy(double x) {
  if (x < 0.0 || x > 1.0)
    throw invalid_input("binary_entropy: argument " + std::to_string(x) + " outside [0,1]");
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double fannes_audenaert_bound(double eps, std::size_t dim) {
  if (eps < 0.0 || eps > 1.0) throw invalid_input("fannes_audenaert_bound: eps outside [0,1]");
  if (dim == 0) throw invalid_input("fannes_audenaert_bound: dim 0");
  return eps * std::log2(static_cast<double>(dim)) + binary_entropy(eps);
}

double afw_bound(double eps, std::size_t dim_a) {
  if (eps < 0.0 || eps > 1.0) throw invalid_input("afw_bound: eps outside [0,1]");
  if (dim_a == 0) throw invalid_input("afw_bound: dim 0");
  return 2.0 * eps * std::log2(static_cast<double>(dim_a)) +
         (1.0 + eps) * binary_entropy(eps / (1.0 + eps));
}

double decoupling_delta(std::size_t n, double eps, std::size_t dim_a1,
                        std::size_t dim_b1) {
  if (n == 0) throw invalid_input("decoupling_delta: n must be >= 1");
  if (eps < 0.0 || eps > 1.0) throw invalid_input("decoupling_delta: eps outside [0,1]");
  if (dim_a1 == 0 || dim_b1 == 0) throw invalid_input("decoupling_delta: dim 0");
  const double t = std::min(std::sqrt(6.0 * eps), 1.0);
  return 2.0 * t * std::log2(static_cast<double>(dim_a1) * static_cast<double>(dim_b1)) +
         2.0 * binary_entropy(t);
}

}  // namespace qrs
