#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qrs/channel.hpp"
#include "qrs/entropy.hpp"
#include "qrs/ki.hpp"
#include "qrs/protocol.hpp"
#include "qrs/rates.hpp"
#include "qrs/tensor.hpp"

namespace qrs {

// Reports preserve insertion order so identical runs serialize to identical
// bytes.
using ojson = nlohmann::ordered_json;

// ---- value <-> json --------------------------------------------------------
// Complex entries are two-element arrays [re, im]; parsers also accept a bare
// number as a real entry.  A layout is a list of [label, dim] pairs; a state
// is {"layout": [...], "matrix": [[...]]}; a channel is
// {"in": [...], "out": [...], "kraus": [matrix, ...]}.
//
// All *_from_json parsers throw invalid_input with `context` naming the
// offending field.

ojson layout_to_json(const SystemLayout& lay);
SystemLayout layout_from_json(const ojson& j, const std::string& context);

ojson matrix_to_json(const Mat& m);
Mat matrix_from_json(const ojson& j, const std::string& context);

ojson state_to_json(const DensityOperator& rho);
DensityOperator state_from_json(const ojson& j, const std::string& context);

ojson channel_to_json(const QuantumChannel& ch);
QuantumChannel channel_from_json(const ojson& j, const std::string& context);

// ---- files -----------------------------------------------------------------
// Parse errors carry the file path and the 1-based line of the offending
// byte; both throw invalid_input.
ojson load_json_file(const std::string& path);
DensityOperator load_state(const std::string& path);
QuantumChannel load_channel(const std::string& path);

// Hex SHA-256 digest of a file's raw bytes (invalid_input if unreadable).
std::string file_sha256(const std::string& path);

// ---- reports ---------------------------------------------------------------
// Common envelope: tool name/version, subcommand, seed, input-file digests,
// and the numeric tolerances in force.  Deterministic field order; no
// timestamps (wall-clock timing is added only on request).
ojson report_envelope(const std::string& subcommand,
                      const std::vector<std::pair<std::string, std::string>>& input_files,
                      std::uint64_t seed, double gradient_tolerance);

ojson rate_result_to_json(const RateResult& r, bool timing);
ojson channel_evaluation_to_json(const ChannelEvaluation& ev);
ojson eop_result_to_json(const EopResult& r);
ojson entropy_report_to_json(const EntropyReport& rep,
                             const std::vector<std::string>& subsystem);
ojson ki_to_json(const KIDecomposition& d);
ojson protocol_report_to_json(const ProtocolReport& rep);

}  // namespace qrs
