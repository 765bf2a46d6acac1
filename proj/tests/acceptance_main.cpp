// In-depth acceptance gate for the toolkit.  Twelve end-to-end checks, each
// printed as exactly one PASS/FAIL line with its wall time and measured
// numbers; the exit code is the number of failures.  All tolerances and
// budgets are pinned as named constants below.  `ctest` runs this binary as
// the `acceptance` test; the fast curated counterpart is `qrs selftest`.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qrs/channel.hpp"
#include "qrs/entropy.hpp"
#include "qrs/ki.hpp"
#include "qrs/protocol.hpp"
#include "qrs/rates.hpp"
#include "qrs/rng.hpp"
#include "qrs/stiefel.hpp"
#include "qrs/tensor.hpp"

using namespace qrs;

namespace {

// ---------------------------------------------------------------------------
// Pinned tolerances and budgets.

// 1/2: solver values for the identity channel against the block-decomposition
// closed forms, and the absolute value windows around them.
constexpr double kIdentityWindow = 0.01;
// 1/3: wall-clock budget per solve group, seconds.
constexpr double kRateBudgetSec = 60.0;
// 3: both rates of the fully depolarizing channel must vanish.
constexpr double kDepolarizingCeiling = 0.01;
// 4: assisted rate vs half the output mutual information for pure sources.
constexpr double kPureCollapseTol = 1e-4;
// 5: entanglement-of-purification anchor and its random-search oracle.
constexpr double kEopAnchorTol = 0.01;
constexpr double kEopOracleTol = 0.02;
// 6: block-decomposition round-trip trace distance and probability match.
constexpr double kKiResidualTol = 1e-9;
constexpr double kKiProbabilityTol = 1e-7;
// 7: minimum protocol fidelity and wall budget.
constexpr double kMinProtocolFidelity = 0.9;
constexpr double kDecouplingBudgetSec = 120.0;
// 8: flagged-mixture interpolation identity and component consistency.
constexpr double kMixtureTol = 1e-8;
constexpr double kComponentTol = 1e-6;
// 9: additivity of the tensor-product point and the soft joint lower bound.
constexpr double kProductPointTol = 1e-8;
constexpr double kSuperadditivitySlack = 0.05;
// 10: gradient checks (relative error against central finite differences).
constexpr double kGradientTol = 1e-5;
constexpr double kQuadraticGradientTol = 1e-7;
// 11: entropy-inequality slacks and wall budget.
constexpr double kEntropySlack = 1e-8;
constexpr double kSsaSlack = 1e-9;
constexpr double kEntropyBudgetSec = 60.0;

// ---------------------------------------------------------------------------
// Shared builders.

DensityOperator corr_bit() {
  Mat m = Mat::Zero(4, 4);
  m(0, 0) = 0.5;
  m(3, 3) = 0.5;
  return DensityOperator(SystemLayout({Factor{"A", 2}, Factor{"R", 2}}), m);
}

DensityOperator bell() {
  Mat m = Mat::Zero(4, 4);
  for (int i : {0, 3})
    for (int j : {0, 3}) m(i, j) = 0.5;
  return DensityOperator(SystemLayout({Factor{"A", 2}, Factor{"R", 2}}), m);
}

QuantumChannel qubit_identity() {
  return QuantumChannel(SystemLayout({Factor{"A", 2}}),
                        SystemLayout({Factor{"B", 2}}), {Mat::Identity(2, 2)});
}

QuantumChannel qubit_depolarizing(double p) {
  const double a = std::sqrt(1.0 - 3.0 * p / 4.0);
  const double b = std::sqrt(p / 4.0);
  Mat i2 = Mat::Identity(2, 2);
  Mat x(2, 2), y(2, 2), z(2, 2);
  x << 0, 1, 1, 0;
  y << 0, cxd(0, -1), cxd(0, 1), 0;
  z << 1, 0, 0, -1;
  return QuantumChannel(SystemLayout({Factor{"A", 2}}),
                        SystemLayout({Factor{"B", 2}}),
                        {a * i2, b * x, b * y, b * z});
}

QuantumChannel random_channel(const SystemLayout& in, const SystemLayout& out,
                              std::size_t env, Rng& rng) {
  return channel_from_stinespring(
      random_isometry(out.dim() * env, in.dim(), rng), in, out, env);
}

RateQuery base_query(const DensityOperator& src, const QuantumChannel& ch,
                     double gamma, int restarts, std::uint64_t seed) {
  RateQuery q;
  q.source = src;
  q.channel = ch;
  q.gamma = gamma;
  q.optimizer.restarts = restarts;
  q.optimizer.seed = seed;
  return q;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double x, int digits = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << x;
  return os.str();
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Assisted rate of the identity channel: the optimizer must reproduce the
//    block-oracle values 0.5 (correlated bit) and 1.0 (maximally entangled
//    pair) at 16 restarts, each solve within the wall budget.

Outcome check_assisted_identity() {
  Outcome out;
  std::ostringstream detail;
  const struct {
    const char* name;
    DensityOperator source;
    double lo, hi;
  } cases[] = {{"corr", corr_bit(), 0.49, 0.51}, {"bell", bell(), 0.99, 1.01}};
  for (const auto& c : cases) {
    const double oracle = identity_channel_assisted_oracle(c.source, {"A"});
    RateQuery q = base_query(c.source, qubit_identity(), 0.0, 16, 11);
    const auto t0 = std::chrono::steady_clock::now();
    RateResult r = assisted_rate(q);
    const double dt = seconds_since(t0);
    const bool ok = r.status == "certified" && r.value >= c.lo &&
                    r.value <= c.hi &&
                    std::abs(r.value - oracle) <= kIdentityWindow &&
                    dt <= kRateBudgetSec;
    out.pass = out.pass && ok;
    detail << c.name << "=" << fmt(r.value) << " (oracle " << fmt(oracle)
           << ", " << fmt(dt, 1) << "s, " << r.status << ") ";
  }
  out.detail = detail.str();
  return out;
}

// ---------------------------------------------------------------------------
// 2. Unassisted rate of the identity channel: both sources must give 1.0,
//    the block oracle S(CQ).

Outcome check_unassisted_identity() {
  Outcome out;
  std::ostringstream detail;
  const struct {
    const char* name;
    DensityOperator source;
  } cases[] = {{"corr", corr_bit()}, {"bell", bell()}};
  for (const auto& c : cases) {
    const double oracle = identity_channel_unassisted_oracle(c.source, {"A"});
    RateQuery q = base_query(c.source, qubit_identity(), 0.0, 16, 13);
    const auto t0 = std::chrono::steady_clock::now();
    RateResult r = unassisted_rate(q);
    const double dt = seconds_since(t0);
    const bool ok = r.status == "certified" && r.value >= 0.99 &&
                    r.value <= 1.01 &&
                    std::abs(r.value - oracle) <= kIdentityWindow;
    out.pass = out.pass && ok;
    detail << c.name << "=" << fmt(r.value) << " (oracle " << fmt(oracle)
           << ", " << fmt(dt, 1) << "s, " << r.status << ") ";
  }
  out.detail = detail.str();
  return out;
}

// ---------------------------------------------------------------------------
// 3. The fully depolarizing channel transmits nothing, so simulating it needs
//    neither communication nor entanglement: both rates vanish.

Outcome check_depolarizing_free() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  RateQuery q = base_query(bell(), qubit_depolarizing(1.0), 0.0, 8, 17);
  RateResult ra = assisted_rate(q);
  RateResult ru = unassisted_rate(q);
  const double dt = seconds_since(t0);
  out.pass = ra.status == "certified" && ru.status == "certified" &&
             ra.value <= kDepolarizingCeiling &&
             ru.value <= kDepolarizingCeiling && dt <= kRateBudgetSec;
  out.detail = "assisted=" + fmt(ra.value) + " unassisted=" + fmt(ru.value) +
               " (" + fmt(dt, 1) + "s)";
  return out;
}

// ---------------------------------------------------------------------------
// 4. Pure sources need no purifier, so the assisted optimum collapses to half
//    the output mutual information I(B:R)/2 of the channel output itself.

Outcome check_pure_source_collapse() {
  Outcome out;
  const SystemLayout src_layout({Factor{"A", 2}, Factor{"R", 2}});
  const SystemLayout in({Factor{"A", 2}}), outl({Factor{"B", 2}});
  Rng rng(404);
  double worst = 0.0;
  int certified = 0;
  const int kInstances = 20;
  for (int t = 0; t < kInstances; ++t) {
    DensityOperator rho = to_density(random_ket(src_layout, rng));
    QuantumChannel ch = random_channel(in, outl, 2, rng);
    DensityOperator sigma = apply_channel(ch, rho);
    const double oracle = 0.5 * mutual_information(sigma, {"B"}, {"R"});
    RateQuery q = base_query(rho, ch, 0.0, 4, derive_seed(404, t));
    RateResult r = assisted_rate(q);
    if (r.status == "certified") ++certified;
    worst = std::max(worst, std::abs(r.value - oracle));
  }
  out.pass = certified == kInstances && worst <= kPureCollapseTol;
  out.detail = "certified " + std::to_string(certified) + "/" +
               std::to_string(kInstances) + ", max |value - oracle| = " +
               sci(worst);
  return out;
}

// ---------------------------------------------------------------------------
// 5. Entanglement of purification of the correlated bit is exactly 1, and the
//    descent result must agree with a Haar random-search upper bound.

Outcome check_eop_anchor() {
  Outcome out;
  EopOptions opt;
  opt.seed = 5;
  EopResult e = entanglement_of_purification(corr_bit(), {"A"}, opt);
  const double brute = eop_random_search(corr_bit(), {"A"}, 10000, 99);
  out.pass = std::abs(e.value - 1.0) <= kEopAnchorTol &&
             std::abs(e.value - brute) <= kEopOracleTol;
  out.detail =
      "value=" + fmt(e.value) + " random-search oracle=" + fmt(brute);
  return out;
}

// ---------------------------------------------------------------------------
// 6. Block decomposition: 100 random block states (|A| <= 6, known block
//    structure, scrambled by a random unitary on A) must round-trip within
//    1e-9 trace distance, with block signatures invariant under scrambling.

struct BlockSpec {
  std::size_t n, q;
};
struct BlockTemplate {
  std::vector<BlockSpec> blocks;
  std::size_t dim_a;  // >= sum n*q; the excess is the kernel of the A marginal
};

DensityOperator build_block_state(const BlockTemplate& tpl, Rng& rng) {
  const std::size_t dr = 2;
  const std::size_t dim = tpl.dim_a * dr;
  Mat m = Mat::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  std::vector<double> p(tpl.blocks.size());
  double tot = 0.0;
  for (auto& x : p) {
    x = 0.2 + rng.uniform();
    tot += x;
  }
  std::size_t off = 0;  // offset in A units; R is the fastest index, so the
                        // kron block occupies a contiguous range of rows
  for (std::size_t c = 0; c < tpl.blocks.size(); ++c) {
    const std::size_t n = tpl.blocks[c].n, q = tpl.blocks[c].q;
    DensityOperator omega = random_density(SystemLayout({Factor{"N", n}}), rng);
    DensityOperator rq =
        random_density(SystemLayout({Factor{"Q", q}, Factor{"R", dr}}), rng);
    const std::size_t side = n * q * dr;
    m.block(static_cast<Eigen::Index>(off * dr), static_cast<Eigen::Index>(off * dr),
            static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side)) =
        (p[c] / tot) * kron(omega.matrix, rq.matrix);
    off += n * q;
  }
  return DensityOperator(SystemLayout({Factor{"A", tpl.dim_a}, Factor{"R", dr}}), m);
}

// Sorted (dim_n, dim_q, p) triples of a decomposition.
std::vector<std::array<double, 3>> signatures(const KIDecomposition& d) {
  std::vector<std::array<double, 3>> sig;
  for (const auto& b : d.blocks)
    sig.push_back({static_cast<double>(b.dim_n), static_cast<double>(b.dim_q), b.p});
  std::sort(sig.begin(), sig.end());
  return sig;
}

bool signatures_match(const std::vector<std::array<double, 3>>& a,
                      const std::vector<std::array<double, 3>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i][0] != b[i][0] || a[i][1] != b[i][1]) return false;
    if (std::abs(a[i][2] - b[i][2]) > kKiProbabilityTol) return false;
  }
  return true;
}

Outcome check_block_decomposition() {
  Outcome out;
  const std::vector<BlockTemplate> templates = {
      {{{1, 1}, {1, 1}}, 2},          {{{1, 2}, {1, 1}}, 3},
      {{{2, 1}, {1, 1}}, 3},          {{{2, 1}, {1, 2}}, 4},
      {{{1, 2}, {1, 2}}, 4},          {{{2, 2}}, 4},
      {{{1, 2}, {2, 1}, {1, 1}}, 5},  {{{3, 1}, {1, 2}}, 5},
      {{{2, 2}, {1, 1}}, 6},          {{{1, 2}, {1, 2}, {1, 2}}, 6}};
  double worst_residual = 0.0;
  int structure_ok = 0, invariant_ok = 0;
  const int kInstances = 100;
  for (int t = 0; t < kInstances; ++t) {
    const BlockTemplate& tpl = templates[static_cast<std::size_t>(t) % templates.size()];
    Rng rng(derive_seed(606, static_cast<std::uint64_t>(t)));
    DensityOperator plain = build_block_state(tpl, rng);
    Mat u = kron(random_unitary(tpl.dim_a, rng), Mat::Identity(2, 2));
    DensityOperator scrambled(plain.layout, u * plain.matrix * u.adjoint());

    KiOptions ko;
    ko.seed = derive_seed(607, static_cast<std::uint64_t>(t));
    KIDecomposition dp = ki_decompose(plain, {"A"}, ko);
    KIDecomposition ds = ki_decompose(scrambled, {"A"}, ko);
    worst_residual = std::max({worst_residual,
                               trace_distance(ki_reconstruct(dp), plain),
                               trace_distance(ki_reconstruct(ds), scrambled)});

    // The builder's structure must be recovered exactly...
    auto sp = signatures(dp);
    std::vector<std::array<double, 3>> expect;
    for (const auto& b : tpl.blocks)
      expect.push_back({static_cast<double>(b.n), static_cast<double>(b.q), 0.0});
    std::sort(expect.begin(), expect.end());
    bool shape_ok = sp.size() == expect.size();
    if (shape_ok)
      for (std::size_t i = 0; i < sp.size(); ++i)
        shape_ok = shape_ok && sp[i][0] == expect[i][0] && sp[i][1] == expect[i][1];
    structure_ok += shape_ok ? 1 : 0;
    // ...and be invariant under the A-side scrambling.
    invariant_ok += signatures_match(sp, signatures(ds)) ? 1 : 0;
  }
  out.pass = worst_residual <= kKiResidualTol && structure_ok == kInstances &&
             invariant_ok == kInstances;
  out.detail = "max round-trip distance = " + sci(worst_residual) +
               ", structure " + std::to_string(structure_ok) + "/" +
               std::to_string(kInstances) + ", scramble-invariant " +
               std::to_string(invariant_ok) + "/" + std::to_string(kInstances);
  return out;
}

// ---------------------------------------------------------------------------
// 7. The decoupling bound holds on 100 seeded single-copy protocol instances
//    with fidelity at least 0.9, within the wall budget.

Outcome check_decoupling_instances() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  int hold = 0;
  double min_fidelity = 1.0, worst_margin = 1e300;
  const int kInstances = 100;
  for (int i = 0; i < kInstances; ++i) {
    DecouplingInstance inst = random_decoupling_instance(
        derive_seed(77, static_cast<std::uint64_t>(i)), kMinProtocolFidelity);
    min_fidelity = std::min(min_fidelity, inst.report.fidelity);
    worst_margin =
        std::min(worst_margin, inst.report.bound - inst.report.leftover_mi);
    if (inst.report.holds && inst.report.fidelity >= kMinProtocolFidelity) ++hold;
  }
  const double dt = seconds_since(t0);
  out.pass = hold == kInstances && dt <= kDecouplingBudgetSec;
  out.detail = std::to_string(hold) + "/" + std::to_string(kInstances) +
               " hold, min fidelity = " + fmt(min_fidelity, 4) +
               ", min bound margin = " + fmt(worst_margin, 4) + " (" +
               fmt(dt, 1) + "s)";
  return out;
}

// ---------------------------------------------------------------------------
// 8. Flagged mixtures of two solved encoders: the conditional objective must
//    equal the convex combination exactly, and the mixture stays feasible at
//    the mixed slack (joint concavity of fidelity).

Outcome check_flag_mixtures() {
  Outcome out;
  const SystemLayout src_layout({Factor{"A", 2}, Factor{"R", 2}});
  const SystemLayout in({Factor{"A", 2}}), outl({Factor{"B", 2}});
  Rng rng(808);
  double worst_interp = 0.0, worst_component = 0.0;
  int certified = 0, feasible = 0;
  const int kInstances = 10;
  const double gamma_a = 0.02, gamma_b = 0.10, lambda = 0.5;
  const double gamma_mix = lambda * gamma_a + (1.0 - lambda) * gamma_b;
  for (int t = 0; t < kInstances; ++t) {
    DensityOperator rho = random_density(src_layout, rng);
    QuantumChannel ch = random_channel(in, outl, 2, rng);
    RateQuery qa = base_query(rho, ch, gamma_a, 4, derive_seed(808, 2 * t));
    RateQuery qb = base_query(rho, ch, gamma_b, 4, derive_seed(808, 2 * t + 1));
    RateResult ra = assisted_rate(qa);
    RateResult rb = assisted_rate(qb);
    if (ra.status == "certified" && rb.status == "certified") ++certified;

    FlagMixtureReport rep =
        assisted_flag_mixture(qa, ra.channels[0], rb.channels[0], lambda);
    worst_interp = std::max(
        worst_interp,
        std::abs(rep.half_conditional_mi - (lambda * rep.component_a +
                                            (1.0 - lambda) * rep.component_b)));
    worst_component =
        std::max({worst_component, std::abs(rep.component_a - ra.value),
                  std::abs(rep.component_b - rb.value)});
    if (rep.mixture_fidelity >= 1.0 - gamma_mix - 1e-6) ++feasible;
  }
  out.pass = certified == kInstances && feasible == kInstances &&
             worst_interp <= kMixtureTol && worst_component <= kComponentTol;
  out.detail = "max interpolation gap = " + sci(worst_interp) +
               ", max component gap = " + sci(worst_component) +
               ", feasible " + std::to_string(feasible) + "/" +
               std::to_string(kInstances);
  return out;
}

// ---------------------------------------------------------------------------
// 9. Tensor products: the product of two solved encoders, evaluated on the
//    joint problem, reproduces the sum of the per-problem values; the joint
//    optimizer never lands meaningfully below that sum.

Outcome check_tensor_products() {
  Outcome out;
  Rng rng(909);
  double worst_add = 0.0, worst_drop = -1e300;
  const int kInstances = 10;
  const double gamma = 0.05;
  for (int t = 0; t < kInstances; ++t) {
    DensityOperator rho1 = random_density(
        SystemLayout({Factor{"A1", 2}, Factor{"R1", 2}}), rng);
    DensityOperator rho2 = random_density(
        SystemLayout({Factor{"A2", 2}, Factor{"R2", 2}}), rng);
    QuantumChannel ch1 = random_channel(SystemLayout({Factor{"A1", 2}}),
                                        SystemLayout({Factor{"B1", 2}}), 2, rng);
    QuantumChannel ch2 = random_channel(SystemLayout({Factor{"A2", 2}}),
                                        SystemLayout({Factor{"B2", 2}}), 2, rng);
    RateQuery q1 = base_query(rho1, ch1, gamma, 4, derive_seed(909, 3 * t));
    RateQuery q2 = base_query(rho2, ch2, gamma, 4, derive_seed(909, 3 * t + 1));
    RateResult r1 = assisted_rate(q1);
    RateResult r2 = assisted_rate(q2);
    if (r1.status != "certified" || r2.status != "certified") {
      out.pass = false;
      continue;
    }

    RateQuery jq = base_query(tensor(rho1, rho2), tensor(ch1, ch2), gamma, 3,
                              derive_seed(909, 3 * t + 2));
    jq.optimizer.max_iterations = 100;
    jq.optimizer.dim_e =
        r1.channels[0].kraus.size() * r2.channels[0].kraus.size();
    QuantumChannel prod = tensor(r1.channels[0], r2.channels[0]);

    ChannelEvaluation ev = evaluate_assisted(jq, prod);
    worst_add = std::max(worst_add, std::abs(ev.value - (r1.value + r2.value)));

    jq.warm_start = {prod};
    RateResult rj = assisted_rate(jq);
    worst_drop = std::max(worst_drop, (r1.value + r2.value) - rj.value);
  }
  out.pass = out.pass && worst_add <= kProductPointTol &&
             worst_drop <= kSuperadditivitySlack;
  out.detail = "max |product point - sum| = " + sci(worst_add) +
               ", max (sum - joint) = " + sci(worst_drop);
  return out;
}

// ---------------------------------------------------------------------------
// 10. Analytic gradients of both penalized stage objectives match central
//     finite differences at random points; a quadratic benchmark pins the
//     harness itself.

Outcome check_gradients() {
  Outcome out;
  Rng rng(1010);
  DensityOperator rho =
      random_density(SystemLayout({Factor{"A", 2}, Factor{"R", 2}}), rng);
  QuantumChannel ch = random_channel(SystemLayout({Factor{"A", 2}}),
                                     SystemLayout({Factor{"B", 2}}), 2, rng);
  EncoderProblem prob(rho, ch, {}, 1);

  // Augmented penalty stage at multiplier state (lambda, mu); the fidelity
  // defect keeps the active branch away from its kink at random points.
  const double lambda = 0.4, mu = 50.0;
  auto penalty = [&](double fid, const Mat* gf, double* dval, Mat* gpen) {
    const double c = 1.0 - fid;
    const double tt = lambda + mu * c;
    *dval = ((tt > 0.0 ? tt * tt : 0.0) - lambda * lambda) / (2.0 * mu);
    if (gpen) *gpen = (tt > 0.0 ? -tt : 0.0) * (*gf);
  };

  StiefelObjective assisted_stage = [&](const Mat& v, Mat* grad) {
    Mat gm, gf;
    const double mi = prob.half_mutual_information(v, grad ? &gm : nullptr);
    const double fid = prob.fidelity(v, grad ? &gf : nullptr);
    double pen;
    Mat gp;
    penalty(fid, grad ? &gf : nullptr, &pen, grad ? &gp : nullptr);
    if (grad) *grad = gm + gp;
    return mi + pen;
  };

  double worst_assisted = 0.0, worst_unassisted = 0.0;
  const int kPoints = 20;
  for (int t = 0; t < kPoints; ++t) {
    Mat v = random_isometry(prob.v_rows(), prob.v_cols(), rng);
    worst_assisted =
        std::max(worst_assisted, gradient_check(v, assisted_stage, rng));
  }
  for (int t = 0; t < kPoints; ++t) {
    Mat v = random_isometry(prob.v_rows(), prob.v_cols(), rng);
    Mat u = random_isometry(prob.u_rows(), prob.u_cols(), rng);
    StiefelObjective stage_v = [&](const Mat& vv, Mat* grad) {
      Mat gv, gf;
      const double s = prob.output_environment_entropy(
          vv, u, grad ? &gv : nullptr, nullptr);
      const double fid = prob.fidelity(vv, grad ? &gf : nullptr);
      double pen;
      Mat gp;
      penalty(fid, grad ? &gf : nullptr, &pen, grad ? &gp : nullptr);
      if (grad) *grad = gv + gp;
      return s + pen;
    };
    StiefelObjective stage_u = [&](const Mat& uu, Mat* grad) {
      Mat gu;
      const double s =
          prob.output_environment_entropy(v, uu, nullptr, grad ? &gu : nullptr);
      if (grad) *grad = gu;
      return s;
    };
    worst_unassisted = std::max(worst_unassisted, gradient_check(v, stage_v, rng));
    worst_unassisted = std::max(worst_unassisted, gradient_check(u, stage_u, rng));
  }

  Mat a = random_hermitian(8, rng);
  StiefelObjective quad = [&](const Mat& v, Mat* grad) {
    if (grad) *grad = 2.0 * (a * v);
    return (v.adjoint() * a * v).trace().real();
  };
  double worst_quad = 0.0;
  for (int t = 0; t < 5; ++t)
    worst_quad = std::max(worst_quad,
                          gradient_check(random_isometry(8, 3, rng), quad, rng));

  out.pass = worst_assisted <= kGradientTol &&
             worst_unassisted <= kGradientTol &&
             worst_quad <= kQuadraticGradientTol;
  out.detail = "max rel err: assisted " + sci(worst_assisted) +
               ", unassisted " + sci(worst_unassisted) + ", quadratic " +
               sci(worst_quad);
  return out;
}

// ---------------------------------------------------------------------------
// 11. Entropy inequality suite on random states, 500-600 instances per
//     family, within the wall budget.

Outcome check_entropy_suite() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream detail;

  {  // Subadditivity, triangle inequality, nonnegative mutual information.
    Rng rng(1101);
    bool ok = true;
    for (int t = 0; t < 600; ++t) {
      const std::size_t da = 2 + t % 3, db = 2 + (t / 3) % 2;
      DensityOperator rho =
          random_density(SystemLayout({Factor{"A", da}, Factor{"B", db}}), rng);
      const double sab = von_neumann_entropy(rho);
      const double sa = von_neumann_entropy(rho, {"A"});
      const double sb = von_neumann_entropy(rho, {"B"});
      ok = ok && sab <= sa + sb + kEntropySlack;
      ok = ok && sab >= std::abs(sa - sb) - kEntropySlack;
      ok = ok && mutual_information(rho, {"A"}, {"B"}) >= -kEntropySlack;
    }
    out.pass = out.pass && ok;
    detail << "subadd/triangle/mi 600 " << (ok ? "ok" : "FAIL") << "; ";
  }

  {  // Strong subadditivity: conditional mutual information is nonnegative.
    Rng rng(1102);
    double worst = 1e300;
    const SystemLayout lay({Factor{"A", 2}, Factor{"B", 2}, Factor{"C", 2}});
    for (int t = 0; t < 500; ++t) {
      DensityOperator rho = random_density(lay, rng);
      worst = std::min(worst,
                       conditional_mutual_information(rho, {"A"}, {"C"}, {"B"}));
    }
    const bool ok = worst >= -kSsaSlack;
    out.pass = out.pass && ok;
    detail << "ssa 500 min=" << sci(worst) << (ok ? " ok" : " FAIL") << "; ";
  }

  {  // Fidelity/trace-distance sandwich and both entropy continuity bounds.
    Rng rng(1103);
    bool ok = true;
    const SystemLayout lay({Factor{"A", 2}, Factor{"B", 2}});
    for (int t = 0; t < 500; ++t) {
      DensityOperator x = random_density(lay, rng);
      DensityOperator z = random_density(lay, rng);
      const double w = 0.02;
      DensityOperator y(lay, (1.0 - w) * x.matrix + w * z.matrix);
      const double td = trace_distance(x, y);
      const double f = fidelity(x, y);
      ok = ok && (1.0 - f <= td + 1e-9) && (td <= std::sqrt(1.0 - f * f) + 1e-9);
      ok = ok && std::abs(von_neumann_entropy(x) - von_neumann_entropy(y)) <=
                     fannes_audenaert_bound(td, 4) + kEntropySlack;
      ok = ok && std::abs(conditional_entropy(x, {"A"}, {"B"}) -
                          conditional_entropy(y, {"A"}, {"B"})) <=
                     afw_bound(td, 2) + kEntropySlack;
    }
    out.pass = out.pass && ok;
    detail << "continuity 500 " << (ok ? "ok" : "FAIL") << "; ";
  }

  {  // Output mutual information of joint channels on product pure inputs
     // dominates the sum of the marginal ones.
    Rng rng(1104);
    bool ok = true;
    const SystemLayout in1({Factor{"A1", 2}}), in2({Factor{"A2", 2}});
    const SystemLayout out1({Factor{"B1", 2}}), out2({Factor{"B2", 2}});
    for (int t = 0; t < 500; ++t) {
      Ket psi1 = random_ket(SystemLayout({Factor{"A1", 2}, Factor{"R1", 2}}), rng);
      Ket psi2 = random_ket(SystemLayout({Factor{"A2", 2}, Factor{"R2", 2}}), rng);
      DensityOperator rho = tensor(to_density(psi1), to_density(psi2));
      Mat u = random_unitary(4, rng);
      QuantumChannel mix(in1.concat(in2), in1.concat(in2), {u});
      DensityOperator mixed = apply_channel(mix, rho);
      DensityOperator o = apply_channel(random_channel(in2, out2, 2, rng),
                                        apply_channel(random_channel(in1, out1, 2, rng), mixed));
      const double joint = mutual_information(o, {"B1", "B2"}, {"R1", "R2"});
      const double m1 = mutual_information(o, {"B1"}, {"R1"});
      const double m2 = mutual_information(o, {"B2"}, {"R2"});
      ok = ok && joint >= m1 + m2 - kEntropySlack;
    }
    out.pass = out.pass && ok;
    detail << "mi-superadd 500 " << (ok ? "ok" : "FAIL");
  }

  const double dt = seconds_since(t0);
  out.pass = out.pass && dt <= kEntropyBudgetSec;
  out.detail = detail.str() + " (" + fmt(dt, 1) + "s)";
  return out;
}

// ---------------------------------------------------------------------------
// 12. The command-line tool is byte-deterministic: two runs with the same
//     seed produce identical report files.

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome check_cli_determinism(const std::filesystem::path& self) {
  Outcome out;
  namespace fs = std::filesystem;
  const fs::path cli = self.parent_path() / "qrs";
  if (!fs::exists(cli)) {
    out.pass = false;
    out.detail = "CLI binary not found next to this one: " + cli.string();
    return out;
  }
  const fs::path dir = fs::temp_directory_path() / "qrs_acceptance";
  fs::create_directories(dir);
  const fs::path state = dir / "state.json";
  const fs::path channel = dir / "channel.json";
  {
    std::ofstream s(state);
    s << "{\n  \"layout\": [[\"A\", 2], [\"R\", 2]],\n  \"matrix\": [\n"
         "    [0.5, 0.0, 0.0, 0.0],\n    [0.0, 0.0, 0.0, 0.0],\n"
         "    [0.0, 0.0, 0.0, 0.0],\n    [0.0, 0.0, 0.0, 0.5]\n  ]\n}\n";
    std::ofstream c(channel);
    c << "{\n  \"in\": [[\"A\", 2]],\n  \"out\": [[\"B\", 2]],\n"
         "  \"kraus\": [[[1.0, 0.0], [0.0, 1.0]]]\n}\n";
  }
  const fs::path out1 = dir / "run1.json", out2 = dir / "run2.json";
  int rc = 0;
  for (const fs::path& o : {out1, out2}) {
    const std::string cmd = "\"" + cli.string() + "\" rate assisted --state \"" +
                            state.string() + "\" --channel \"" +
                            channel.string() + "\" --restarts 3 --seed 5 --out \"" +
                            o.string() + "\" > /dev/null 2>&1";
    rc |= std::system(cmd.c_str());
  }
  const std::string b1 = read_bytes(out1), b2 = read_bytes(out2);
  out.pass = rc == 0 && !b1.empty() && b1 == b2;
  out.detail = "exit=" + std::to_string(rc) + ", " +
               std::to_string(b1.size()) + " vs " + std::to_string(b2.size()) +
               " bytes, " + (b1 == b2 ? "identical" : "DIFFER");
  return out;
}

}  // namespace

int main(int, char** argv) {
  const std::filesystem::path self(argv[0]);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"assisted rate matches the block oracle on the identity channel",
       check_assisted_identity},
      {"unassisted rate matches the block oracle on the identity channel",
       check_unassisted_identity},
      {"fully depolarizing channel simulates for free", check_depolarizing_free},
      {"pure-source assisted rate collapses to half the output mutual information",
       check_pure_source_collapse},
      {"entanglement of purification anchor agrees with random search",
       check_eop_anchor},
      {"block decomposition round-trips and is scramble-invariant",
       check_block_decomposition},
      {"decoupling bound holds on seeded protocol instances",
       check_decoupling_instances},
      {"flagged mixtures interpolate solved encoders exactly",
       check_flag_mixtures},
      {"tensor-product encoders reproduce rate sums", check_tensor_products},
      {"analytic gradients match finite differences", check_gradients},
      {"entropy inequality suite", check_entropy_suite},
      {"command-line reports are byte-deterministic",
       [&self]() { return check_cli_determinism(self); }}};

  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double dt = seconds_since(t0);
    std::printf("%s %2zu  %s (%.1fs)%s%s\n", o.pass ? "PASS" : "FAIL", i + 1,
                checks[i].first.c_str(), dt, o.detail.empty() ? "" : " -- ",
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("acceptance: %zu/%zu passed\n", checks.size() - failures,
              checks.size());
  return failures;
}
