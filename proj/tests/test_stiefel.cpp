#include <doctest.h>

#include <cmath>

#include "qrs/rng.hpp"
#include "qrs/stiefel.hpp"

using namespace qrs;

namespace {

// Rayleigh-type quadratic tr(V^dag A V): smooth benchmark with the known
// minimizer spanned by the lowest eigenvectors of A.
StiefelObjective quadratic(const Mat& a) {
  return [a](const Mat& v, Mat* g) {
    if (g) *g = 2.0 * (a * v);
    return (v.adjoint() * a * v).trace().real();
  };
}

}  // namespace

TEST_CASE("gradient check is tight on the quadratic model") {
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    Mat a = random_hermitian(6, rng);
    Mat v0 = random_isometry(6, 2, rng);
    CHECK(gradient_check(v0, quadratic(a), rng) <= 1e-7);
  }
}

TEST_CASE("descent reaches the bottom eigenvalue sum") {
  Rng rng(5);
  Mat a = random_hermitian(8, rng);
  EigH e = eig_hermitian(a);
  const double target = e.values(7) + e.values(6);  // two smallest

  DescentOptions opt;
  opt.max_iterations = 500;
  opt.grad_tol = 1e-10;
  double best = 1e100;
  for (int r = 0; r < 3; ++r) {
    Mat v0 = random_isometry(8, 2, rng);
    DescentResult res = stiefel_descent(v0, quadratic(a), opt);
    // Always on the manifold.
    CHECK((res.v.adjoint() * res.v - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <=
          1e-10);
    best = std::min(best, res.value);
  }
  CHECK(best == doctest::Approx(target).epsilon(1e-6));
}

TEST_CASE("descent is monotone and respects the iteration budget") {
  Rng rng(11);
  Mat a = random_hermitian(6, rng);
  StiefelObjective obj = quadratic(a);
  Mat v0 = random_isometry(6, 3, rng);
  const double start = obj(v0, nullptr);

  DescentOptions opt;
  opt.max_iterations = 4;
  DescentResult res = stiefel_descent(v0, obj, opt);
  CHECK(res.iterations <= 4);
  CHECK(res.value <= start + 1e-12);
}

TEST_CASE("a zero-gradient start terminates immediately") {
  Rng rng(13);
  // Objective constant in V: gradient vanishes identically.
  StiefelObjective flat = [](const Mat& v, Mat* g) {
    if (g) *g = Mat::Zero(v.rows(), v.cols());
    return 2.5;
  };
  Mat v0 = random_isometry(5, 2, rng);
  DescentResult res = stiefel_descent(v0, flat, DescentOptions{});
  CHECK(res.iterations <= 1);
  CHECK(res.value == 2.5);
  CHECK(res.grad_norm <= 1e-14);
}

TEST_CASE("square case optimizes over the unitary group") {
  // With square V the manifold is U(d); the quadratic's minimum is tr over
  // the full spectrum, invariant under the choice of V, so the objective
  // must stay pinned at tr(A).
  Rng rng(17);
  Mat a = random_hermitian(4, rng);
  Mat v0 = random_unitary(4, rng);
  DescentResult res = stiefel_descent(v0, quadratic(a), DescentOptions{});
  CHECK(res.value == doctest::Approx(a.trace().real()).epsilon(1e-10));
  CHECK((res.v.adjoint() * res.v - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <=
        1e-10);
}

TEST_CASE("random isometries are well formed") {
  Rng rng(19);
  for (int t = 0; t < 5; ++t) {
    Mat v = random_isometry(7, 3, rng);
    CHECK((v.adjoint() * v - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  Mat u = random_unitary(5, rng);
  CHECK((u.adjoint() * u - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(random_isometry(2, 5, rng), invalid_input);
}

TEST_CASE("seeded rng streams are reproducible and derivable") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
  CHECK(derive_seed(7, 0) != derive_seed(7, 1));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  Rng c(derive_seed(7, 3)), d(derive_seed(7, 3));
  CHECK(c.gaussian() == d.gaussian());
}
