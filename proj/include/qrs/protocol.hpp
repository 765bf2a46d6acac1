#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrs/channel.hpp"
#include "qrs/tensor.hpp"

namespace qrs {

// An explicit one-shot simulation protocol for n copies of a channel
// N : A -> B K on a source sigma^{A R}:
//
//   * Alice and Bob share the pure entangled state |Phi> on
//     alice_shared ++ bob_shared (bob_shared = the remaining factors).
//   * The encoder consumes the n channel inputs and Alice's share and
//     produces the classical/quantum message factors, the n feedback
//     outputs K, and Alice's leftover target share.
//   * The decoder consumes the message factors and Bob's share and produces
//     the n transmitted outputs B and Bob's leftover target share.
//   * |Phihat> on the target factors is the entangled state the protocol is
//     supposed to leave behind (carried explicitly so resource accounting
//     never guesses it).
//
// Both maps are arbitrary channels; run_protocol dilates them with fresh
// environment factors so the global final state stays pure.
struct SimProtocol {
  int n = 1;  // 1..3
  DensityOperator source;   // per-copy input ++ reference factors
  QuantumChannel channel;   // per-copy channel A -> B K
  std::vector<std::string> feedback_labels;  // K factors of channel.out
  Ket shared_state;                          // |Phi>
  std::vector<std::string> alice_shared;     // Alice's factors of |Phi>
  Ket target_state;                          // |Phihat>
  std::vector<std::string> alice_target;     // Alice's factors of |Phihat>
  QuantumChannel encoder;  // in: A^n ++ alice_shared, out: message ++ K^n ++ alice_target
  QuantumChannel decoder;  // in: message ++ bob_shared, out: B^n ++ bob_target
  std::vector<std::string> message_labels;   // message factors of encoder.out
};

struct ProtocolReport {
  int n = 1;
  double fidelity = 0.0;  // F(simulated n-copy output (x) |Phihat>, protocol output)
  double classical_bits = 0.0;      // (1/n) log2(message dim)
  double entanglement_rate = 0.0;   // (1/n) (S(alice_shared)_Phi - S(alice_target)_Phihat)
  // Correlation left between the target factors and everything else
  // (references, purifier, both environments) in the final global state:
  // I(target : rest) and 2 S(target), equal because the global state is pure.
  double leftover_mi = 0.0;
  double leftover_entropy_doubled = 0.0;
  double bound = 0.0;   // decoupling_delta(n, 1 - fidelity, |alice_target|, |bob_target|)
  bool holds = false;   // leftover_mi <= bound + 1e-9
  double norm_defect = 0.0;  // | ||final global ket|| - 1 | (purity sanity)
};

// Runs the protocol on the purified n-copy source (purifier excluded from the
// fidelity marginal) and evaluates the decoupling bound on the leftover
// entangled state.
ProtocolReport run_protocol(const SimProtocol& protocol);

// The decoupling inequality on an explicit global pure state: lhs is the
// mutual information between the target factors and every other factor of
// xi_n (references, purifier, and dilation environments included), rhs the
// continuity bound at error eps.
struct DecouplingCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};
DecouplingCheck decoupling_check(const Ket& xi_n,
                                 const std::vector<std::string>& target_labels,
                                 std::size_t n, double eps);

// A seeded single-copy qubit instance: a random source and channel, the exact
// relay protocol (send the channel output as the message, pass the shared
// pair through) perturbed by unitary rotations e^{i delta H} on the encoder
// and decoder outputs, with delta halved until the fidelity reaches
// min_fidelity.  The report of such an instance must always satisfy `holds`.
struct DecouplingInstance {
  SimProtocol protocol;
  ProtocolReport report;
  double delta = 0.0;
  std::uint64_t seed = 0;
};
DecouplingInstance random_decoupling_instance(std::uint64_t seed,
                                              double min_fidelity = 0.9);

}  // namespace qrs
