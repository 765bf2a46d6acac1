#include <doctest.h>

#include <cmath>

#include "qrs/channel.hpp"
#include "qrs/entropy.hpp"
#include "qrs/rng.hpp"

using namespace qrs;

// Randomized checks of the entropy inequalities the rate analysis relies on.
// Slacks are 1e-8 unless an inequality is numerically exact.

namespace {

SystemLayout two_factor(std::size_t da, std::size_t db) {
  return SystemLayout({Factor{"A", da}, Factor{"B", db}});
}

QuantumChannel random_channel(const SystemLayout& in, const SystemLayout& out,
                              std::size_t env, Rng& rng) {
  return channel_from_stinespring(
      random_isometry(out.dim() * env, in.dim(), rng), in, out, env);
}

}  // namespace

TEST_CASE("subadditivity and triangle inequality on random states") {
  Rng rng(101);
  for (int t = 0; t < 400; ++t) {
    const std::size_t da = 2 + t % 3, db = 2 + (t / 3) % 2;
    DensityOperator rho = random_density(two_factor(da, db), rng);
    const double sab = von_neumann_entropy(rho);
    const double sa = von_neumann_entropy(rho, {"A"});
    const double sb = von_neumann_entropy(rho, {"B"});
    // Subadditivity.
    CHECK(sab <= sa + sb + 1e-8);
    // Araki-Lieb triangle inequality.
    CHECK(sab >= std::abs(sa - sb) - 1e-8);
    // Mutual information is the subadditivity gap, so it is nonnegative.
    CHECK(mutual_information(rho, {"A"}, {"B"}) >= -1e-8);
  }
}

TEST_CASE("strong subadditivity on random tripartite states") {
  Rng rng(103);
  for (int t = 0; t < 150; ++t) {
    SystemLayout lay({Factor{"A", 2}, Factor{"B", 2}, Factor{"C", 2}});
    DensityOperator rho = random_density(lay, rng);
    // S(AB) + S(BC) >= S(ABC) + S(B), i.e. I(A:C|B) >= 0.
    CHECK(conditional_mutual_information(rho, {"A"}, {"C"}, {"B"}) >= -1e-8);
  }
}

TEST_CASE("entropy difference obeys the continuity bounds") {
  Rng rng(107);
  int checked = 0;
  for (int t = 0; t < 700 && checked < 500; ++t) {
    const std::size_t d = 2 + t % 3;
    SystemLayout lay({Factor{"A", d}});
    DensityOperator x = random_density(lay, rng);
    // A nearby state: mix a small random perturbation in.
    DensityOperator y = random_density(lay, rng);
    const double w = 0.02;
    DensityOperator close(lay, (1.0 - w) * x.matrix + w * y.matrix);
    const double eps = trace_distance(x, close);
    if (eps >= 1.0 - 1e-12) continue;
    ++checked;
    const double gap = std::abs(von_neumann_entropy(x) - von_neumann_entropy(close));
    CHECK(gap <= fannes_audenaert_bound(eps, d) + 1e-8);
  }
  CHECK(checked >= 500);
}

TEST_CASE("conditional entropy obeys the dimension-scaled continuity bound") {
  Rng rng(109);
  for (int t = 0; t < 200; ++t) {
    SystemLayout lay({Factor{"A", 2}, Factor{"B", 2}});
    DensityOperator x = random_density(lay, rng);
    DensityOperator y = random_density(lay, rng);
    const double w = 0.01;
    DensityOperator close(lay, (1.0 - w) * x.matrix + w * y.matrix);
    const double eps = trace_distance(x, close);
    const double gap = std::abs(conditional_entropy(x, {"A"}, {"B"}) -
                                conditional_entropy(close, {"A"}, {"B"}));
    CHECK(gap <= afw_bound(eps, 2) + 1e-8);
  }
}

TEST_CASE("channels cannot increase correlation with an untouched reference") {
  Rng rng(113);
  for (int t = 0; t < 100; ++t) {
    const std::size_t da = 2 + t % 2;
    SystemLayout lay({Factor{"A", da}, Factor{"R", 2}});
    DensityOperator rho = random_density(lay, rng);
    const double before = mutual_information(rho, {"A"}, {"R"});
    SystemLayout in({Factor{"A", da}});
    SystemLayout out({Factor{"B", 2}});
    QuantumChannel ch = random_channel(in, out, 2 + t % 3, rng);
    DensityOperator sigma = apply_channel(ch, rho);
    const double after = mutual_information(sigma, {"B"}, {"R"});
    CHECK(after <= before + 1e-8);
  }
}

TEST_CASE("joint channels on product pure inputs only add correlation") {
  // For pure product inputs through a joint channel, the output mutual
  // information dominates the sum of the marginal-channel ones.
  Rng rng(127);
  for (int t = 0; t < 100; ++t) {
    SystemLayout in1({Factor{"A1", 2}}), in2({Factor{"A2", 2}});
    SystemLayout out1({Factor{"B1", 2}}), out2({Factor{"B2", 2}});

    Ket psi1 = random_ket(SystemLayout({Factor{"A1", 2}, Factor{"R1", 2}}), rng);
    Ket psi2 = random_ket(SystemLayout({Factor{"A2", 2}, Factor{"R2", 2}}), rng);
    DensityOperator rho = tensor(to_density(psi1), to_density(psi2));

    // Joint channel: a product channel composed with a correlating unitary
    // on the two inputs.
    Mat u = random_unitary(4, rng);
    QuantumChannel mix(in1.concat(in2), in1.concat(in2), {u});
    QuantumChannel c1 = random_channel(in1, out1, 2, rng);
    QuantumChannel c2 = random_channel(in2, out2, 2, rng);
    DensityOperator mixed = apply_channel(mix, rho);
    DensityOperator out = apply_channel(c2, apply_channel(c1, mixed));

    const double joint = mutual_information(out, {"B1", "B2"}, {"R1", "R2"});
    const double m1 = mutual_information(out, {"B1"}, {"R1"});
    const double m2 = mutual_information(out, {"B2"}, {"R2"});
    // I(B1 B2 : R1 R2) >= I(B1 : R1) + I(B2 : R2) whenever the complement
    // pairs are uncorrelated, which holds here because the R factors never
    // interact after the purifying draw.
    CHECK(joint >= m1 + m2 - 1e-8);
  }
}

TEST_CASE("purification halves: complementary marginals share their entropy") {
  Rng rng(131);
  for (int t = 0; t < 100; ++t) {
    SystemLayout lay({Factor{"A", 2}, Factor{"B", 3}, Factor{"C", 2}});
    Ket psi = random_ket(lay, rng);
    CHECK(von_neumann_entropy(psi, {"A"}) ==
          doctest::Approx(von_neumann_entropy(psi, {"B", "C"})).epsilon(1e-9));
    CHECK(von_neumann_entropy(psi, {"A", "B"}) ==
          doctest::Approx(von_neumann_entropy(psi, {"C"})).epsilon(1e-9));
  }
}

TEST_CASE("fidelity is monotone under partial trace") {
  Rng rng(137);
  for (int t = 0; t < 100; ++t) {
    SystemLayout lay({Factor{"A", 2}, Factor{"B", 2}});
    DensityOperator x = random_density(lay, rng);
    DensityOperator y = random_density(lay, rng);
    const double joint = fidelity(x, y);
    const double marg = fidelity(partial_trace(x, {"A"}), partial_trace(y, {"A"}));
    CHECK(marg >= joint - 1e-9);
  }
}
