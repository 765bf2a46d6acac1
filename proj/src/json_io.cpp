#include "qrs/json_io.hpp"

#include <fstream>
#include <sstream>

#include "qrs/sha256.hpp"

namespace qrs {
namespace {

const ojson& require_field(const ojson& j, const char* key, const std::string& ctx) {
  if (!j.is_object()) throw invalid_input(ctx + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw invalid_input(ctx + ": missing field '" + key + "'");
  return *it;
}

cxd complex_from_json(const ojson& j, const std::string& ctx) {
  if (j.is_number()) return cxd(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return cxd(j[0].get<double>(), j[1].get<double>());
  throw invalid_input(ctx + ": expected a [re, im] pair or a number");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot read file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ojson layout_to_json(const SystemLayout& lay) {
  ojson out = ojson::array();
  for (const Factor& f : lay.factors()) out.push_back(ojson::array({f.label, f.dim}));
  return out;
}

SystemLayout layout_from_json(const ojson& j, const std::string& ctx) {
  if (!j.is_array()) throw invalid_input(ctx + ": expected an array of [label, dim] pairs");
  std::vector<Factor> factors;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const ojson& e = j[i];
    const std::string ectx = ctx + " entry " + std::to_string(i);
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() ||
        !e[1].is_number_unsigned())
      throw invalid_input(ectx + ": expected [label, dim] with a positive integer dim");
    factors.push_back(Factor{e[0].get<std::string>(), e[1].get<std::size_t>()});
  }
  try {
    return SystemLayout(std::move(factors));
  } catch (const invalid_input& e) {
    throw invalid_input(ctx + ": " + e.what());
  }
}

ojson matrix_to_json(const Mat& m) {
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(ojson::array({m(r, c).real(), m(r, c).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const ojson& j, const std::string& ctx) {
  if (!j.is_array() || j.empty())
    throw invalid_input(ctx + ": expected a non-empty array of rows");
  const std::size_t nrows = j.size();
  if (!j[0].is_array() || j[0].empty())
    throw invalid_input(ctx + " row 0: expected a non-empty array");
  const std::size_t ncols = j[0].size();
  Mat m(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
  for (std::size_t r = 0; r < nrows; ++r) {
    const std::string rctx = ctx + " row " + std::to_string(r);
    if (!j[r].is_array() || j[r].size() != ncols)
      throw invalid_input(rctx + ": expected " + std::to_string(ncols) + " entries");
    for (std::size_t c = 0; c < ncols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          complex_from_json(j[r][c], rctx + " col " + std::to_string(c));
  }
  return m;
}

ojson state_to_json(const DensityOperator& rho) {
  ojson j;
  j["layout"] = layout_to_json(rho.layout);
  j["matrix"] = matrix_to_json(rho.matrix);
  return j;
}

DensityOperator state_from_json(const ojson& j, const std::string& ctx) {
  const SystemLayout lay = layout_from_json(require_field(j, "layout", ctx), ctx + ": 'layout'");
  const Mat m = matrix_from_json(require_field(j, "matrix", ctx), ctx + ": 'matrix'");
  if (static_cast<std::size_t>(m.rows()) != lay.dim() ||
      static_cast<std::size_t>(m.cols()) != lay.dim())
    throw invalid_input(ctx + ": 'matrix' is " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + " but the layout dim is " +
                        std::to_string(lay.dim()));
  DensityOperator rho(lay, m);
  try {
    validate_density(rho);
  } catch (const invalid_input& e) {
    throw invalid_input(ctx + ": " + e.what());
  }
  return rho;
}

ojson channel_to_json(const QuantumChannel& ch) {
  ojson j;
  j["in"] = layout_to_json(ch.in);
  j["out"] = layout_to_json(ch.out);
  ojson kraus = ojson::array();
  for (const Mat& k : ch.kraus) kraus.push_back(matrix_to_json(k));
  j["kraus"] = std::move(kraus);
  return j;
}

QuantumChannel channel_from_json(const ojson& j, const std::string& ctx) {
  QuantumChannel ch;
  ch.in = layout_from_json(require_field(j, "in", ctx), ctx + ": 'in'");
  ch.out = layout_from_json(require_field(j, "out", ctx), ctx + ": 'out'");
  const ojson& kraus = require_field(j, "kraus", ctx);
  if (!kraus.is_array() || kraus.empty())
    throw invalid_input(ctx + ": 'kraus' must be a non-empty array of matrices");
  for (std::size_t i = 0; i < kraus.size(); ++i) {
    const std::string kctx = ctx + ": 'kraus' " + std::to_string(i);
    Mat k = matrix_from_json(kraus[i], kctx);
    if (static_cast<std::size_t>(k.rows()) != ch.out.dim() ||
        static_cast<std::size_t>(k.cols()) != ch.in.dim())
      throw invalid_input(kctx + ": expected " + std::to_string(ch.out.dim()) + "x" +
                          std::to_string(ch.in.dim()) + ", got " +
                          std::to_string(k.rows()) + "x" + std::to_string(k.cols()));
    ch.kraus.push_back(std::move(k));
  }
  const CptpReport rep = validate_cptp(ch);
  if (!rep.pass) {
    std::ostringstream msg;
    msg << ctx << ": 'kraus' is not trace preserving and completely positive"
        << " (tp residual " << rep.tp_residual << ", min choi eigenvalue "
        << rep.cp_min_eigenvalue << ")";
    throw invalid_input(msg.str());
  }
  return ch;
}

ojson load_json_file(const std::string& path) {
  const std::string bytes = read_file(path);
  try {
    return ojson::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t upto = std::min(e.byte, bytes.size());
    for (std::size_t i = 0; i < upto; ++i)
      if (bytes[i] == '\n') ++line;
    throw invalid_input(path + ": parse error at line " + std::to_string(line) + ": " +
                        e.what());
  }
}

DensityOperator load_state(const std::string& path) {
  return state_from_json(load_json_file(path), path);
}

QuantumChannel load_channel(const std::string& path) {
  return channel_from_json(load_json_file(path), path);
}

std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

ojson report_envelope(const std::string& subcommand,
                      const std::vector<std::pair<std::string, std::string>>& input_files,
                      std::uint64_t seed, double gradient_tolerance) {
  ojson env;
  env["tool"] = ojson{{"name", kToolName}, {"version", kToolVersion}};
  env["subcommand"] = subcommand;
  env["seed"] = seed;
  ojson inputs = ojson::object();
  for (const auto& [role, path] : input_files)
    inputs[role] = ojson{{"path", path}, {"sha256", file_sha256(path)}};
  env["inputs"] = std::move(inputs);
  env["tolerances"] = ojson{{"eig_clamp_negative", Tolerances::eig_clamp_negative},
                            {"rank_cutoff", Tolerances::rank_cutoff},
                            {"cptp", Tolerances::cptp},
                            {"block_merge", Tolerances::block_merge},
                            {"gradient", gradient_tolerance}};
  return env;
}

ojson rate_result_to_json(const RateResult& r, bool timing) {
  ojson j;
  j["kind"] = std::to_string(r.copies) + "-copy upper bound";
  j["value_bits_per_copy"] = r.value;
  j["status"] = r.status;
  j["achieved_fidelity"] = r.achieved_fidelity;
  j["constraint_residual"] = r.constraint_residual;
  j["recompute_gap"] = r.recompute_gap;
  j["gamma"] = r.gamma;
  j["gamma_effective"] = r.gamma_effective;
  if (r.gamma_effective != r.gamma)
    j["gamma_note"] =
        "slack below 1e-6 is optimized at an effective 1e-6; certification still "
        "requires fidelity >= 1 - gamma - 1e-6";
  j["copies"] = r.copies;
  ojson restarts = ojson::array();
  for (const RestartRecord& rec : r.restarts) {
    restarts.push_back(ojson{{"index", rec.index},
                             {"value", rec.value},
                             {"fidelity", rec.fidelity},
                             {"feasible", rec.feasible},
                             {"certified", rec.certified},
                             {"iterations", rec.iterations}});
  }
  j["restarts"] = std::move(restarts);
  ojson channels = ojson::array();
  for (const QuantumChannel& ch : r.channels) channels.push_back(channel_to_json(ch));
  j["channels"] = std::move(channels);
  if (timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

ojson channel_evaluation_to_json(const ChannelEvaluation& ev) {
  return ojson{{"value_bits_per_copy", ev.value}, {"fidelity", ev.fidelity}};
}

ojson eop_result_to_json(const EopResult& r) {
  ojson j;
  j["value_bits"] = r.value;
  j["best_restart"] = r.best_restart;
  j["restart_values"] = r.restart_values;
  return j;
}

ojson entropy_report_to_json(const EntropyReport& rep,
                             const std::vector<std::string>& subsystem) {
  ojson j;
  j["value_bits"] = rep.value;
  j["subsystem"] = subsystem;  // empty: the whole state
  ojson spec = ojson::array();
  for (Eigen::Index i = 0; i < rep.spectrum.size(); ++i) spec.push_back(rep.spectrum(i));
  j["spectrum"] = std::move(spec);
  j["clamped_mass"] = rep.clamped_mass;
  return j;
}

ojson ki_to_json(const KIDecomposition& d) {
  ojson j;
  ojson blocks = ojson::array();
  for (const KiBlock& b : d.blocks)
    blocks.push_back(ojson{{"p", b.p}, {"dim_n", b.dim_n}, {"dim_q", b.dim_q}});
  j["blocks"] = std::move(blocks);
  j["kernel_dim"] = d.kernel_dim;
  const KiEntropies e = ki_entropies(d);
  j["entropies"] = ojson{{"s_c", e.s_c}, {"s_cq", e.s_cq}, {"s_cnq", e.s_cnq}};
  j["reconstruction_residual"] = d.diagnostics.reconstruction_residual;
  j["diagnostics"] = ojson{{"attempts", d.diagnostics.attempts},
                           {"near_degenerate_merge", d.diagnostics.near_degenerate_merge},
                           {"max_block_product_residual",
                            d.diagnostics.max_block_product_residual},
                           {"off_block_residual", d.diagnostics.off_block_residual}};
  return j;
}

ojson protocol_report_to_json(const ProtocolReport& rep) {
  ojson j;
  j["n"] = rep.n;
  j["fidelity"] = rep.fidelity;
  j["classical_bits"] = rep.classical_bits;
  j["entanglement_rate"] = rep.entanglement_rate;
  j["leftover_mi"] = rep.leftover_mi;
  j["leftover_entropy_doubled"] = rep.leftover_entropy_doubled;
  j["bound"] = rep.bound;
  j["holds"] = rep.holds;
  j["norm_defect"] = rep.norm_defect;
  return j;
}

}  // namespace qrs
