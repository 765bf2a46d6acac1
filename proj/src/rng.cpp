#include "qrs/rng.hpp"

namespace qrs {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  return splitmix64(master ^ splitmix64(counter + 0x5851f42d4c957f2dULL));
}

std::size_t Rng::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(engine_);
}

Mat random_ginibre(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat g(rows, cols);
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) g(r, c) = rng.complex_gaussian();
  return g;
}

Mat random_isometry(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows < cols) throw invalid_input("random_isometry: rows < cols");
  Mat g = random_ginibre(rows, cols, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(rows, cols);
  Mat r = qr.matrixQR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();
  // Fix phases so the distribution is Haar and the result deterministic.
  for (std::size_t c = 0; c < cols; ++c) {
    cxd d = r(c, c);
    if (std::abs(d) > 1e-300) q.col(c) *= d / std::abs(d);
  }
  return q;
}

Mat random_unitary(std::size_t dim, Rng& rng) { return random_isometry(dim, dim, rng); }

Mat random_hermitian(std::size_t dim, Rng& rng) {
  Mat g = random_ginibre(dim, dim, rng);
  return (g + g.adjoint()) / 2.0;
}

Ket random_ket(const SystemLayout& layout, Rng& rng) {
  Vec v(layout.dim());
  for (std::size_t i = 0; i < layout.dim(); ++i) v(i) = rng.complex_gaussian();
  v /= v.norm();
  return Ket(layout, std::move(v));
}

DensityOperator random_density(const SystemLayout& layout, Rng& rng) {
  return random_density_rank(layout, layout.dim(), rng);
}

DensityOperator random_density_rank(const SystemLayout& layout, std::size_t rank,
                                    Rng& rng) {
  if (rank == 0 || rank > layout.dim())
    throw invalid_input("random_density_rank: bad rank");
  Mat g = random_ginibre(layout.dim(), rank, rng);
  Mat m = g * g.adjoint();
  m /= m.trace().real();
  return DensityOperator(layout, std::move(m));
}

}  // namespace qrs
