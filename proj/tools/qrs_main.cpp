// Command-line front end: every subcommand reads JSON, runs one library
// entry point, and writes a JSON report (stdout or --out).  Identical
// seeded invocations produce byte-identical reports; wall-clock timing is
// only added under --timing.
//
// Exit codes: 0 success (certified result where that applies), 1 malformed
// input, 2 rate result fell back to the always-feasible construction,
// 3 failed selftest or failed verification suite.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrs/json_io.hpp"
#include "qrs/rng.hpp"

namespace {

using namespace qrs;

struct CommonOpts {
  std::string state_path;
  std::string state2_path;
  std::string channel_path;
  std::string out_path;
  std::string labels_csv;
  std::string feedback_csv = "@auto";
  double gamma = 0.0;
  int copies = 1;
  int restarts = 16;
  int max_iterations = 150;
  std::uint64_t seed = 7;
  std::size_t dim_e = 0;
  std::size_t dim_eprime = 0;
  double tol = 1e-8;
  int instances = 100;
  bool timing = false;
};

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(csv);
  while (std::getline(in, cur, ',')) {
    const auto a = cur.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    const auto b = cur.find_last_not_of(" \t");
    out.push_back(cur.substr(a, b - a + 1));
  }
  return out;
}

void emit(const ojson& report, const std::string& out_path) {
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw invalid_input("cannot write file '" + out_path + "'");
    out << text;
  }
}

// Feedback registers: explicit --feedback wins; the default keeps every
// channel output factor whose label starts with 'K' on the encoding side.
std::vector<std::string> feedback_labels(const CommonOpts& o, const QuantumChannel& ch) {
  if (o.feedback_csv != "@auto") return split_csv(o.feedback_csv);
  std::vector<std::string> k;
  for (const auto& l : ch.out.labels())
    if (!l.empty() && l[0] == 'K') k.push_back(l);
  return k;
}

RateQuery build_rate_query(const CommonOpts& o) {
  RateQuery q;
  q.source = load_state(o.state_path);
  q.channel = load_channel(o.channel_path);
  q.feedback_labels = feedback_labels(o, q.channel);
  q.gamma = o.gamma;
  q.copies = o.copies;
  q.optimizer.restarts = o.restarts;
  q.optimizer.max_iterations = o.max_iterations;
  q.optimizer.seed = o.seed;
  q.optimizer.gradient_tolerance = o.tol;
  q.optimizer.dim_e = o.dim_e;
  q.optimizer.dim_eprime = o.dim_eprime;
  return q;
}

int run_rate(const CommonOpts& o, bool assisted) {
  const RateQuery q = build_rate_query(o);
  const RateResult r = assisted ? assisted_rate(q) : unassisted_rate(q);
  ojson rep = report_envelope(assisted ? "rate assisted" : "rate unassisted",
                              {{"state", o.state_path}, {"channel", o.channel_path}},
                              o.seed, o.tol);
  rep["feedback_labels"] = q.feedback_labels;
  rep["result"] = rate_result_to_json(r, o.timing);
  emit(rep, o.out_path);
  return r.status == "certified" ? 0 : 2;
}

int run_eop(const CommonOpts& o) {
  const DensityOperator rho = load_state(o.state_path);
  std::vector<std::string> labels = split_csv(o.labels_csv);
  if (labels.empty() && rho.layout.size() > 0) labels = {rho.layout.factor(0).label};
  EopOptions opt;
  opt.restarts = o.restarts;
  opt.max_iterations = o.max_iterations;
  opt.seed = o.seed;
  opt.dim_keep = o.dim_e;
  opt.dim_ancilla = o.dim_eprime;
  opt.gradient_tolerance = o.tol;
  const EopResult r = entanglement_of_purification(rho, labels, opt);
  ojson rep = report_envelope("eop", {{"state", o.state_path}}, o.seed, o.tol);
  rep["kept_side"] = labels;
  rep["result"] = eop_result_to_json(r);
  emit(rep, o.out_path);
  return 0;
}

int run_ki(const CommonOpts& o) {
  const DensityOperator rho = load_state(o.state_path);
  std::vector<std::string> labels = split_csv(o.labels_csv);
  if (labels.empty()) {
    // Default split: every factor except the last (the last factor plays the
    // reference).  Single-factor states decompose in full.
    const auto all = rho.layout.labels();
    if (all.size() <= 1)
      labels = all;
    else
      labels.assign(all.begin(), all.end() - 1);
  }
  KiOptions opt;
  opt.seed = o.seed;
  const KIDecomposition d = ki_decompose(rho, labels, opt);
  ojson rep = report_envelope("ki", {{"state", o.state_path}}, o.seed, o.tol);
  rep["split_side"] = labels;
  rep["result"] = ki_to_json(d);
  emit(rep, o.out_path);
  return 0;
}

int run_entropy(const CommonOpts& o) {
  const DensityOperator rho = load_state(o.state_path);
  const std::vector<std::string> labels = split_csv(o.labels_csv);
  const EntropyReport r = entropy_report(rho, labels);
  ojson rep = report_envelope("entropy", {{"state", o.state_path}}, o.seed, o.tol);
  rep["result"] = entropy_report_to_json(r, labels);
  emit(rep, o.out_path);
  return 0;
}

int run_fidelity(const CommonOpts& o) {
  const DensityOperator a = load_state(o.state_path);
  const DensityOperator b = load_state(o.state2_path);
  const double f = fidelity(a, b);
  ojson rep = report_envelope(
      "fidelity", {{"state", o.state_path}, {"state2", o.state2_path}}, o.seed, o.tol);
  rep["result"] = ojson{{"fidelity", f}, {"trace_distance", trace_distance(a, b)}};
  emit(rep, o.out_path);
  return 0;
}

int run_verify_decoupling(const CommonOpts& o) {
  if (o.instances < 1) throw invalid_input("--instances must be >= 1");
  ojson items = ojson::array();
  bool all_hold = true;
  for (int i = 0; i < o.instances; ++i) {
    const DecouplingInstance inst =
        random_decoupling_instance(derive_seed(o.seed, static_cast<std::uint64_t>(i)));
    all_hold = all_hold && inst.report.holds;
    items.push_back(ojson{{"lhs", inst.report.leftover_mi},
                          {"rhs", inst.report.bound},
                          {"holds", inst.report.holds}});
  }
  ojson rep = report_envelope("verify decoupling", {}, o.seed, o.tol);
  rep["instances"] = std::move(items);
  rep["all_hold"] = all_hold;
  emit(rep, o.out_path);
  if (!all_hold) {
    std::cerr << "verify decoupling: bound violated on at least one instance\n";
    return 3;
  }
  return 0;
}

// ---- selftest ---------------------------------------------------------------

struct CheckRow {
  std::string name;
  bool pass = false;
  std::string note;
};

void run_check(std::vector<CheckRow>& rows, const std::string& name,
               const std::function<bool(std::string&)>& body) {
  CheckRow row;
  row.name = name;
  try {
    row.pass = body(row.note);
  } catch (const std::exception& e) {
    row.pass = false;
    row.note = e.what();
  }
  rows.push_back(std::move(row));
}

DensityOperator corr_bit_state() {
  Mat m = Mat::Zero(4, 4);
  m(0, 0) = 0.5;
  m(3, 3) = 0.5;
  return DensityOperator(SystemLayout({Factor{"A", 2}, Factor{"R", 2}}), m);
}

DensityOperator bell_state() {
  Mat m = Mat::Zero(4, 4);
  for (int i : {0, 3})
    for (int j : {0, 3}) m(i, j) = 0.5;
  return DensityOperator(SystemLayout({Factor{"A", 2}, Factor{"R", 2}}), m);
}

int run_selftest(const CommonOpts& o) {
  std::vector<CheckRow> rows;

  run_check(rows, "entropy oracles", [](std::string& note) {
    Mat d = Mat::Zero(3, 3);
    d(0, 0) = 0.5;
    d(1, 1) = 0.3;
    d(2, 2) = 0.2;
    const double s = von_neumann_entropy(DensityOperator(SystemLayout({Factor{"A", 3}}), d));
    const bool ok1 = std::abs(s - 1.4854752972273344) <= 1e-12;
    const bool ok2 = std::abs(binary_entropy(0.25) - 0.8112781244591328) <= 1e-12;
    const bool ok3 = std::abs(decoupling_delta(1, 0.01, 2, 2) - 2.5861435759500857) <= 1e-12;
    if (!(ok1 && ok2 && ok3)) note = "closed-form entropy values drifted";
    return ok1 && ok2 && ok3;
  });

  run_check(rows, "fidelity pins", [](std::string& note) {
    Mat half = 0.5 * Mat::Identity(2, 2);
    Mat zero = Mat::Zero(2, 2);
    zero(0, 0) = 1.0;
    const SystemLayout a({Factor{"A", 2}});
    const double f = fidelity(DensityOperator(a, half), DensityOperator(a, zero));
    if (std::abs(f - 1.0 / std::sqrt(2.0)) > 1e-12) {
      note = "F(I/2,|0><0|) off";
      return false;
    }
    Rng rng(21);
    const DensityOperator r = random_density(a, rng);
    return std::abs(fidelity(r, r) - 1.0) <= 1e-9;
  });

  run_check(rows, "channel round trips", [](std::string& note) {
    Rng rng(5);
    for (int i = 0; i < 5; ++i) {
      const SystemLayout in({Factor{"A", 3}}), out({Factor{"B", 2}});
      const QuantumChannel ch =
          channel_from_stinespring(random_isometry(6, 3, rng), in, out, 3);
      const QuantumChannel back = canonical_kraus(from_choi(to_choi(ch), in, out));
      if (channel_distance(ch, back) > 1e-9) {
        note = "choi round trip drifted";
        return false;
      }
    }
    return true;
  });

  run_check(rows, "block decomposition round trip", [](std::string& note) {
    Rng rng(9);
    for (int i = 0; i < 5; ++i) {
      const SystemLayout ar({Factor{"A", 4}, Factor{"R", 2}});
      DensityOperator rho = random_density(ar, rng);
      const KIDecomposition d = ki_decompose(rho, {"A"});
      if (d.diagnostics.reconstruction_residual > 1e-9) {
        note = "reconstruction residual too large";
        return false;
      }
    }
    return true;
  });

  run_check(rows, "manifold gradients", [](std::string& note) {
    Rng rng(13);
    const Mat a = random_hermitian(6, rng);
    const StiefelObjective quad = [&a](const Mat& v, Mat* g) {
      if (g) *g = 2.0 * (a * v);
      return (v.adjoint() * a * v).trace().real();
    };
    const Mat v0 = random_isometry(6, 2, rng);
    if (gradient_check(v0, quad, rng) > 1e-7) {
      note = "quadratic gradient off";
      return false;
    }
    EncoderProblem prob(bell_state(), identity_channel(SystemLayout({Factor{"A", 2}})), {}, 1);
    const StiefelObjective mi = [&prob](const Mat& v, Mat* g) {
      return prob.half_mutual_information(v, g);
    };
    const Mat v1 = random_isometry(prob.v_rows(), prob.v_cols(), rng);
    return gradient_check(v1, mi, rng) <= 1e-5;
  });

  run_check(rows, "rate oracles", [&o](std::string& note) {
    RateQuery q;
    q.channel = identity_channel(SystemLayout({Factor{"A", 2}}));
    q.gamma = 0.0;
    q.copies = 1;
    q.optimizer.restarts = 4;
    q.optimizer.seed = o.seed;
    q.source = corr_bit_state();
    const RateResult corr = assisted_rate(q);
    if (std::abs(corr.value - 0.5) > 1e-2 || corr.status != "certified") {
      note = "correlated-bit assisted rate off";
      return false;
    }
    q.source = bell_state();
    const RateResult bell = assisted_rate(q);
    if (std::abs(bell.value - 1.0) > 1e-2 || bell.status != "certified") {
      note = "entangled-pair assisted rate off";
      return false;
    }
    q.source = corr_bit_state();
    const RateResult un = unassisted_rate(q);
    if (std::abs(un.value - 1.0) > 1e-2 || un.status != "certified") {
      note = "correlated-bit unassisted rate off";
      return false;
    }
    return true;
  });

  run_check(rows, "purification splitting oracle", [&o](std::string& note) {
    EopOptions opt;
    opt.restarts = 4;
    opt.seed = o.seed;
    const EopResult r = entanglement_of_purification(corr_bit_state(), {"A"}, opt);
    if (std::abs(r.value - 1.0) > 1e-2) {
      note = "correlated-bit splitting value off";
      return false;
    }
    return true;
  });

  run_check(rows, "decoupling bound", [&o](std::string&) {
    for (int i = 0; i < 5; ++i) {
      const DecouplingInstance inst =
          random_decoupling_instance(derive_seed(o.seed, static_cast<std::uint64_t>(i)));
      if (!inst.report.holds) return false;
    }
    return true;
  });

  run_check(rows, "report determinism", [](std::string&) {
    const DensityOperator rho = bell_state();
    const ojson a = state_to_json(rho);
    const DensityOperator back = state_from_json(a, "roundtrip");
    const ojson b = state_to_json(back);
    return a.dump() == b.dump() && trace_distance(rho, back) <= 1e-12;
  });

  bool all = true;
  ojson checks = ojson::array();
  for (const CheckRow& r : rows) {
    all = all && r.pass;
    ojson row;
    row["name"] = r.name;
    row["pass"] = r.pass;
    if (!r.note.empty()) row["note"] = r.note;
    checks.push_back(std::move(row));
  }
  ojson rep = report_envelope("selftest", {}, o.seed, o.tol);
  rep["checks"] = std::move(checks);
  rep["all_pass"] = all;
  emit(rep, o.out_path);
  return all ? 0 : 3;
}

void add_io_flags(CLI::App* cmd, CommonOpts& o, bool with_channel) {
  cmd->add_option("--state", o.state_path, "state JSON file")->required();
  if (with_channel)
    cmd->add_option("--channel", o.channel_path, "channel JSON file")->required();
  cmd->add_option("--out", o.out_path, "write the JSON report here (default: stdout)");
}

void add_rate_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--gamma", o.gamma, "fidelity slack in [0,1)");
  cmd->add_option("--copies", o.copies, "joint copies (1..3), values reported per copy");
  cmd->add_option("--restarts", o.restarts, "optimizer restarts");
  cmd->add_option("--max-iterations", o.max_iterations, "descent iterations per stage");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--dim-e", o.dim_e, "encoder environment dim (0: auto)");
  cmd->add_option("--dim-eprime", o.dim_eprime, "retained environment dim (0: dim-e)");
  cmd->add_option("--tol", o.tol, "gradient norm tolerance");
  cmd->add_option("--feedback", o.feedback_csv,
                  "comma-separated feedback output labels (default: outputs starting with K)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical toolkit for channel-simulation rate functionals"};
  app.require_subcommand(1);
  CommonOpts o;
  app.add_flag("--timing", o.timing, "include wall-clock fields in reports");

  CLI::App* rate = app.add_subcommand("rate", "rate functionals");
  rate->require_subcommand(1);
  CLI::App* assisted = rate->add_subcommand("assisted", "entanglement-assisted rate");
  add_io_flags(assisted, o, true);
  add_rate_flags(assisted, o);
  CLI::App* unassisted = rate->add_subcommand("unassisted", "unassisted rate");
  add_io_flags(unassisted, o, true);
  add_rate_flags(unassisted, o);

  CLI::App* eop = app.add_subcommand("eop", "entanglement of purification");
  add_io_flags(eop, o, false);
  eop->add_option("--labels", o.labels_csv, "kept-side factors (default: first factor)");
  eop->add_option("--restarts", o.restarts, "optimizer restarts");
  eop->add_option("--max-iterations", o.max_iterations, "descent iterations");
  eop->add_option("--seed", o.seed, "master seed");
  eop->add_option("--dim-e", o.dim_e, "kept split dim (0: purifier dim)");
  eop->add_option("--dim-eprime", o.dim_eprime, "ancilla split dim (0: purifier dim)");
  eop->add_option("--tol", o.tol, "gradient norm tolerance");

  CLI::App* ki = app.add_subcommand("ki", "block decomposition of a state");
  add_io_flags(ki, o, false);
  ki->add_option("--labels", o.labels_csv,
                 "decomposed-side factors (default: all but the last)");
  ki->add_option("--seed", o.seed, "master seed");

  CLI::App* entropy = app.add_subcommand("entropy", "marginal entropy report");
  add_io_flags(entropy, o, false);
  entropy->add_option("--labels", o.labels_csv, "subsystem (default: the whole state)");

  CLI::App* fid = app.add_subcommand("fidelity", "fidelity between two states");
  fid->add_option("--state", o.state_path, "first state JSON file")->required();
  fid->add_option("--state2", o.state2_path, "second state JSON file")->required();
  fid->add_option("--out", o.out_path, "write the JSON report here (default: stdout)");

  CLI::App* verify = app.add_subcommand("verify", "verification suites");
  verify->require_subcommand(1);
  CLI::App* dec = verify->add_subcommand("decoupling", "leftover-correlation bound suite");
  dec->add_option("--seed", o.seed, "master seed");
  dec->add_option("--instances", o.instances, "number of seeded instances");
  dec->add_option("--out", o.out_path, "write the JSON report here (default: stdout)");

  CLI::App* self = app.add_subcommand("selftest", "fast end-to-end checks");
  self->add_option("--seed", o.seed, "master seed");
  self->add_option("--out", o.out_path, "write the JSON report here (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (assisted->parsed()) return run_rate(o, true);
    if (unassisted->parsed()) return run_rate(o, false);
    if (eop->parsed()) return run_eop(o);
    if (ki->parsed()) return run_ki(o);
    if (entropy->parsed()) return run_entropy(o);
    if (fid->parsed()) return run_fidelity(o);
    if (dec->parsed()) return run_verify_decoupling(o);
    if (self->parsed()) return run_selftest(o);
  } catch (const invalid_input& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
