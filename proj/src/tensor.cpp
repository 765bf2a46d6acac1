#include "qrs/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace qrs {

namespace {

// Strides for big-endian indexing: stride of the last factor is 1.
std::vector<std::size_t> strides_of(const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) s[i - 1] = s[i] * dims[i];
  return s;
}

}  // namespace

SystemLayout::SystemLayout(std::vector<Factor> factors)
    : factors_(std::move(factors)) {
  std::set<std::string> seen;
  dim_ = 1;
  for (const Factor& f : factors_) {
    if (f.label.empty()) throw invalid_input("layout: empty factor label");
    if (f.dim == 0) throw invalid_input("layout: factor '" + f.label + "' has dim 0");
    if (!seen.insert(f.label).second)
      throw invalid_input("layout: duplicate factor label '" + f.label + "'");
    dim_ *= f.dim;
  }
}

bool SystemLayout::has(const std::string& label) const {
  return find(label).has_value();
}

std::optional<std::size_t> SystemLayout::find(const std::string& label) const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].label == label) return i;
  return std::nullopt;
}

std::size_t SystemLayout::position(const std::string& label) const {
  auto p = find(label);
  if (!p) throw invalid_input("layout: no factor labeled '" + label + "' in " + to_string());
  return *p;
}

std::size_t SystemLayout::dim_of(const std::string& label) const {
  return factors_[position(label)].dim;
}

std::size_t SystemLayout::dim_of_labels(const std::vector<std::string>& labels) const {
  std::size_t d = 1;
  for (const auto& l : labels) d *= dim_of(l);
  return d;
}

SystemLayout SystemLayout::sublayout_ordered(const std::vector<std::string>& labels) const {
  std::set<std::string> want(labels.begin(), labels.end());
  if (want.size() != labels.size()) throw invalid_input("layout: duplicate label in selection");
  std::vector<Factor> out;
  for (const Factor& f : factors_)
    if (want.count(f.label)) out.push_back(f);
  if (out.size() != labels.size()) {
    for (const auto& l : labels) position(l);  // throws with a precise message
  }
  return SystemLayout(std::move(out));
}

SystemLayout SystemLayout::sublayout(const std::vector<std::string>& labels) const {
  std::vector<Factor> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(factors_[position(l)]);
  return SystemLayout(std::move(out));
}

SystemLayout SystemLayout::complement(const std::vector<std::string>& labels) const {
  std::set<std::string> drop(labels.begin(), labels.end());
  for (const auto& l : labels) position(l);
  std::vector<Factor> out;
  for (const Factor& f : factors_)
    if (!drop.count(f.label)) out.push_back(f);
  return SystemLayout(std::move(out));
}

SystemLayout SystemLayout::concat(const SystemLayout& other) const {
  std::vector<Factor> out = factors_;
  out.insert(out.end(), other.factors_.begin(), other.factors_.end());
  return SystemLayout(std::move(out));
}

std::vector<std::string> SystemLayout::labels() const {
  std::vector<std::string> out;
  out.reserve(factors_.size());
  for (const Factor& f : factors_) out.push_back(f.label);
  return out;
}

std::vector<std::size_t> SystemLayout::dims() const {
  std::vector<std::size_t> out;
  out.reserve(factors_.size());
  for (const Factor& f : factors_) out.push_back(f.dim);
  return out;
}

std::string SystemLayout::to_string() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (i) os << ",";
    os << factors_[i].label << ":" << factors_[i].dim;
  }
  os << "]";
  return os.str();
}

Ket::Ket(SystemLayout lay, Vec a) : layout(std::move(lay)), amps(std::move(a)) {
  if (static_cast<std::size_t>(amps.size()) != layout.dim())
    throw invalid_input("ket: amplitude count " + std::to_string(amps.size()) +
                        " does not match layout dim " + std::to_string(layout.dim()));
}

DensityOperator::DensityOperator(SystemLayout lay, Mat m)
    : layout(std::move(lay)), matrix(std::move(m)) {
  if (static_cast<std::size_t>(matrix.rows()) != layout.dim() ||
      static_cast<std::size_t>(matrix.cols()) != layout.dim())
    throw invalid_input("density operator: matrix shape does not match layout dim " +
                        std::to_string(layout.dim()));
}

LinearOperator::LinearOperator(SystemLayout in_lay, SystemLayout out_lay, Mat m)
    : in(std::move(in_lay)), out(std::move(out_lay)), matrix(std::move(m)) {
  if (static_cast<std::size_t>(matrix.rows()) != out.dim() ||
      static_cast<std::size_t>(matrix.cols()) != in.dim())
    throw invalid_input("linear operator: matrix shape (" + std::to_string(matrix.rows()) +
                        "x" + std::to_string(matrix.cols()) + ") does not match layouts " +
                        out.to_string() + " x " + in.to_string());
}

EigH eig_hermitian(const Mat& h) {
  if (h.rows() != h.cols()) throw invalid_input("eig_hermitian: non-square matrix");
  Eigen::SelfAdjointEigenSolver<Mat> solver(h);
  if (solver.info() != Eigen::Success)
    throw numeric_failure("eig_hermitian: eigensolver did not converge");
  const Eigen::Index n = h.rows();
  EigH out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  // Eigen returns ascending order; store descending.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  // Deterministic phase: first entry with |v| > 1e-10 made real positive.
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) {
      const cxd v = out.vectors(r, c);
      if (std::abs(v) > 1e-10) {
        out.vectors.col(c) *= std::conj(v) / std::abs(v);
        break;
      }
    }
  }
  return out;
}

void validate_density(const DensityOperator& rho, double tol) {
  const Mat& m = rho.matrix;
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol)
    throw invalid_input("density operator is not Hermitian");
  if (std::abs(m.trace().real() - 1.0) > tol || std::abs(m.trace().imag()) > tol)
    throw invalid_input("density operator trace is not 1");
  EigH e = eig_hermitian((m + m.adjoint()) / 2.0);
  if (e.values.minCoeff() < -1e-8)
    throw invalid_input("density operator has negative eigenvalue " +
                        std::to_string(e.values.minCoeff()));
}

namespace {

// Index permutation table: for each new composite index, the old index.
// new_of_old_pos[j] = position in the OLD layout of the j-th NEW factor.
std::vector<std::size_t> permutation_table(const std::vector<std::size_t>& old_dims,
                                           const std::vector<std::size_t>& old_pos_of_new) {
  const std::vector<std::size_t> old_strides = strides_of(old_dims);
  std::vector<std::size_t> new_dims(old_pos_of_new.size());
  for (std::size_t j = 0; j < old_pos_of_new.size(); ++j)
    new_dims[j] = old_dims[old_pos_of_new[j]];
  const std::vector<std::size_t> new_strides = strides_of(new_dims);
  std::size_t total = 1;
  for (std::size_t d : new_dims) total *= d;

  std::vector<std::size_t> old_of_new(total);
  std::vector<std::size_t> digit(new_dims.size(), 0);
  std::size_t old_index = 0;
  for (std::size_t n = 0; n < total; ++n) {
    old_of_new[n] = old_index;
    // Increment mixed-radix counter (last digit fastest), updating old_index.
    for (std::size_t j = new_dims.size(); j-- > 0;) {
      ++digit[j];
      old_index += old_strides[old_pos_of_new[j]];
      if (digit[j] < new_dims[j]) break;
      old_index -= new_dims[j] * old_strides[old_pos_of_new[j]];
      digit[j] = 0;
    }
  }
  return old_of_new;
}

std::vector<std::size_t> positions_of(const SystemLayout& lay,
                                      const std::vector<std::string>& order) {
  if (order.size() != lay.size())
    throw invalid_input("permute_systems: order must list every factor of " + lay.to_string());
  std::vector<std::size_t> pos;
  pos.reserve(order.size());
  std::set<std::string> seen;
  for (const auto& l : order) {
    if (!seen.insert(l).second) throw invalid_input("permute_systems: duplicate label '" + l + "'");
    pos.push_back(lay.position(l));
  }
  return pos;
}

}  // namespace

Ket permute_systems(const Ket& psi, const std::vector<std::string>& order) {
  const std::vector<std::size_t> pos = positions_of(psi.layout, order);
  const auto table = permutation_table(psi.layout.dims(), pos);
  Vec out(psi.amps.size());
  for (std::size_t n = 0; n < table.size(); ++n) out(n) = psi.amps(table[n]);
  return Ket(psi.layout.sublayout(order), std::move(out));
}

DensityOperator permute_systems(const DensityOperator& rho,
                                const std::vector<std::string>& order) {
  const std::vector<std::size_t> pos = positions_of(rho.layout, order);
  const auto table = permutation_table(rho.layout.dims(), pos);
  const std::size_t d = table.size();
  Mat out(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) = rho.matrix(table[r], table[c]);
  return DensityOperator(rho.layout.sublayout(order), std::move(out));
}

Mat ket_as_matrix(const Ket& psi, const std::vector<std::string>& front) {
  std::vector<std::string> order = front;
  for (const auto& l : psi.layout.complement(front).labels()) order.push_back(l);
  Ket p = permute_systems(psi, order);
  const std::size_t d_front = psi.layout.dim_of_labels(front);
  const std::size_t d_rest = psi.layout.dim() / d_front;
  // Big-endian: composite = front_index * d_rest + rest_index, so the
  // permuted amplitude vector is exactly this matrix in row-major order.
  Mat m(d_front, d_rest);
  for (std::size_t r = 0; r < d_front; ++r)
    for (std::size_t c = 0; c < d_rest; ++c) m(r, c) = p.amps(r * d_rest + c);
  return m;
}

DensityOperator partial_trace(const Ket& psi, const std::vector<std::string>& keep) {
  const SystemLayout keep_lay = psi.layout.sublayout_ordered(keep);
  Mat m = ket_as_matrix(psi, keep_lay.labels());
  Mat rho = m * m.adjoint();
  return DensityOperator(keep_lay, std::move(rho));
}

DensityOperator partial_trace(const DensityOperator& rho,
                              const std::vector<std::string>& keep) {
  const SystemLayout keep_lay = rho.layout.sublayout_ordered(keep);
  std::vector<std::string> order = keep_lay.labels();
  const SystemLayout rest_lay = rho.layout.complement(order);
  for (const auto& l : rest_lay.labels()) order.push_back(l);
  DensityOperator p = permute_systems(rho, order);
  const std::size_t dk = keep_lay.dim();
  const std::size_t dr = rest_lay.dim();
  Mat out = Mat::Zero(dk, dk);
  for (std::size_t i = 0; i < dk; ++i)
    for (std::size_t j = 0; j < dk; ++j) {
      cxd s = 0.0;
      for (std::size_t t = 0; t < dr; ++t) s += p.matrix(i * dr + t, j * dr + t);
      out(i, j) = s;
    }
  return DensityOperator(keep_lay, std::move(out));
}

Ket purify(const DensityOperator& rho, const std::string& purifier_label) {
  if (rho.layout.has(purifier_label))
    throw invalid_input("purify: purifier label '" + purifier_label + "' already present");
  EigH e = eig_hermitian((rho.matrix + rho.matrix.adjoint()) / 2.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (e.values(i) > Tolerances::rank_cutoff) ++rank;
  if (rank == 0) throw invalid_input("purify: zero operator");
  const std::size_t d = rho.layout.dim();
  SystemLayout out_lay = rho.layout.concat(SystemLayout({{purifier_label, rank}}));
  Vec amps = Vec::Zero(d * rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const double w = std::sqrt(e.values(static_cast<Eigen::Index>(k)));
    for (std::size_t i = 0; i < d; ++i)
      amps(i * rank + k) = w * e.vectors(static_cast<Eigen::Index>(i),
                                         static_cast<Eigen::Index>(k));
  }
  return Ket(std::move(out_lay), std::move(amps));
}

DensityOperator to_density(const Ket& psi) {
  Mat m = psi.amps * psi.amps.adjoint();
  return DensityOperator(psi.layout, std::move(m));
}

Ket tensor(const Ket& a, const Ket& b) {
  SystemLayout lay = a.layout.concat(b.layout);
  Vec out(lay.dim());
  const std::size_t db = b.layout.dim();
  for (std::size_t i = 0; i < a.layout.dim(); ++i)
    for (std::size_t j = 0; j < db; ++j) out(i * db + j) = a.amps(i) * b.amps(j);
  return Ket(std::move(lay), std::move(out));
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  return DensityOperator(a.layout.concat(b.layout), kron(a.matrix, b.matrix));
}

Ket apply_to_factors(const LinearOperator& m, const Ket& psi) {
  const std::vector<std::string> acted = m.in.labels();
  if (acted.empty()) throw invalid_input("apply_to_factors: operator has no input factors");
  for (const auto& l : acted) {
    if (psi.layout.dim_of(l) != m.in.dim_of(l))
      throw invalid_input("apply_to_factors: dim mismatch on factor '" + l + "'");
  }
  // Output labels must not collide with surviving factors.
  const SystemLayout rest = psi.layout.complement(acted);
  for (const auto& f : m.out.factors())
    if (rest.has(f.label))
      throw invalid_input("apply_to_factors: output label '" + f.label +
                          "' collides with a surviving factor");

  Mat block = ket_as_matrix(psi, acted);  // d_in x d_rest, rest in layout order
  Mat moved = m.matrix * block;           // d_out x d_rest

  // Assemble [out..., rest...] ket, then permute to the in-place order.
  SystemLayout tmp_lay = m.out.concat(rest);
  Vec amps(tmp_lay.dim());
  const std::size_t d_rest = rest.dim();
  for (std::size_t r = 0; r < m.out.dim(); ++r)
    for (std::size_t c = 0; c < d_rest; ++c) amps(r * d_rest + c) = moved(r, c);
  Ket assembled(std::move(tmp_lay), std::move(amps));

  // Final order: original order with the first acted factor replaced by the
  // out factors and other acted factors dropped.
  std::vector<std::string> final_order;
  const std::string& first_acted = acted.front();
  std::set<std::string> acted_set(acted.begin(), acted.end());
  for (const auto& f : psi.layout.factors()) {
    if (f.label == first_acted) {
      for (const auto& of : m.out.factors()) final_order.push_back(of.label);
    } else if (!acted_set.count(f.label)) {
      final_order.push_back(f.label);
    }
  }
  return permute_systems(assembled, final_order);
}

}  // namespace qrs
