#pragma once

#include <cstdint>
#include <random>

#include "qrs/tensor.hpp"

namespace qrs {

// splitmix64 step; used to derive independent stream seeds from a master
// seed and a counter so restarts and instances are reproducible.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  cxd complex_gaussian() { return cxd(gaussian(), gaussian()); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Complex Ginibre matrix (iid standard complex Gaussians).
Mat random_ginibre(std::size_t rows, std::size_t cols, Rng& rng);

// Haar-ish random isometry (rows >= cols) via QR of a Ginibre matrix with
// the R-diagonal phase fix.
Mat random_isometry(std::size_t rows, std::size_t cols, Rng& rng);

Mat random_unitary(std::size_t dim, Rng& rng);

// Random Hermitian with Gaussian entries (GUE-like, not normalized).
Mat random_hermitian(std::size_t dim, Rng& rng);

// Haar-random pure state on the layout.
Ket random_ket(const SystemLayout& layout, Rng& rng);

// Random full-rank density operator: G G^dag / tr with G square Ginibre.
DensityOperator random_density(const SystemLayout& layout, Rng& rng);

// Random density operator of the given rank.
DensityOperator random_density_rank(const SystemLayout& layout, std::size_t rank,
                                    Rng& rng);

}  // namespace qrs
