#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qrs/common.hpp"

namespace qrs {

// One tensor factor: a named Hilbert space.
struct Factor {
  std::string label;
  std::size_t dim = 1;

  friend bool operator==(const Factor& a, const Factor& b) {
    return a.label == b.label && a.dim == b.dim;
  }
};

// Ordered list of named factors.  Basis indexing is row-major big-endian:
// the FIRST factor is the most significant digit, so for dims (d1,...,dk)
// the composite index of (i1,...,ik) is ((i1*d2 + i2)*d3 + ...)*dk + ik.
// This convention is fixed; file formats depend on it bit-exactly.
class SystemLayout {
 public:
  SystemLayout() = default;
  explicit SystemLayout(std::vector<Factor> factors);
  SystemLayout(std::initializer_list<Factor> factors)
      : SystemLayout(std::vector<Factor>(factors)) {}

  std::size_t size() const { return factors_.size(); }
  std::size_t dim() const { return dim_; }
  const Factor& factor(std::size_t i) const { return factors_.at(i); }
  const std::vector<Factor>& factors() const { return factors_; }

  bool has(const std::string& label) const;
  // Position of a labeled factor; throws invalid_input if absent.
  std::size_t position(const std::string& label) const;
  std::optional<std::size_t> find(const std::string& label) const;
  std::size_t dim_of(const std::string& label) const;

  // Product of dims of the named factors (labels must exist).
  std::size_t dim_of_labels(const std::vector<std::string>& labels) const;

  // Sub-layout of the named factors, kept in *this* layout's order.
  SystemLayout sublayout_ordered(const std::vector<std::string>& labels) const;
  // Sub-layout of the named factors in the order given.
  SystemLayout sublayout(const std::vector<std::string>& labels) const;
  // Layout of all factors not named.
  SystemLayout complement(const std::vector<std::string>& labels) const;
  // Concatenation: this ++ other (labels must stay unique).
  SystemLayout concat(const SystemLayout& other) const;

  std::vector<std::string> labels() const;
  std::vector<std::size_t> dims() const;

  std::string to_string() const;

  friend bool operator==(const SystemLayout& a, const SystemLayout& b) {
    return a.factors_ == b.factors_;
  }

 private:
  std::vector<Factor> factors_;
  std::size_t dim_ = 1;
};

// Pure state on a layout.
struct Ket {
  SystemLayout layout;
  Vec amps;

  Ket() = default;
  Ket(SystemLayout lay, Vec a);
  std::size_t dim() const { return layout.dim(); }
};

// Density operator on a layout (Hermitian PSD, unit trace up to validation).
struct DensityOperator {
  SystemLayout layout;
  Mat matrix;

  DensityOperator() = default;
  DensityOperator(SystemLayout lay, Mat m);
  std::size_t dim() const { return layout.dim(); }
};

// Linear map between two layouts (rows: out, cols: in).
struct LinearOperator {
  SystemLayout in;
  SystemLayout out;
  Mat matrix;

  LinearOperator() = default;
  LinearOperator(SystemLayout in_lay, SystemLayout out_lay, Mat m);
};

// Result of a Hermitian eigendecomposition, eigenvalues descending.
// Eigenvector phases are fixed deterministically: the first entry of each
// vector with magnitude > 1e-10 is made real positive.
struct EigH {
  RVec values;   // descending
  Mat vectors;   // columns match values
};

EigH eig_hermitian(const Mat& h);

// Validates Hermiticity, positivity (eigenvalues >= -1e-12) and unit trace
// (within tol); throws invalid_input otherwise.
void validate_density(const DensityOperator& rho, double tol = 1e-8);

// Reorders factors to the given label order (a permutation of the layout).
Ket permute_systems(const Ket& psi, const std::vector<std::string>& order);
DensityOperator permute_systems(const DensityOperator& rho,
                                const std::vector<std::string>& order);

// Partial trace keeping the named factors (result keeps this layout's order).
DensityOperator partial_trace(const DensityOperator& rho,
                              const std::vector<std::string>& keep);
// Partial trace of a pure state |psi><psi| keeping the named factors.
DensityOperator partial_trace(const Ket& psi,
                              const std::vector<std::string>& keep);

// Minimal purification: appends a purifier factor of dimension rank(rho)
// (eigenvalue cutoff 1e-12).  The returned ket satisfies
// partial_trace(ket, original labels) == rho.
Ket purify(const DensityOperator& rho, const std::string& purifier_label);

DensityOperator to_density(const Ket& psi);

// Tensor product (labels must stay unique).
Ket tensor(const Ket& a, const Ket& b);
DensityOperator tensor(const DensityOperator& a, const DensityOperator& b);

// Kronecker product with the big-endian convention (a is the more
// significant factor).
Mat kron(const Mat& a, const Mat& b);

// Applies M to the factors named by M.in (identity elsewhere).  The factor
// slot of the FIRST acted-on factor receives M.out's factors (in M.out's
// order); remaining acted-on factors are removed from the layout.
Ket apply_to_factors(const LinearOperator& m, const Ket& psi);

// Returns the ket reshaped as a (dim(front) x dim(rest)) matrix after
// permuting `front` labels to the front, in the given order.  Row index runs
// over the front factors big-endian, column index over the rest.
Mat ket_as_matrix(const Ket& psi, const std::vector<std::string>& front);

}  // namespace qrs
