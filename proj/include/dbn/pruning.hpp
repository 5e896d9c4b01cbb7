#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbn/circuit.hpp"

namespace dbn {

inline constexpr std::size_t kDefaultConeSupportLimit = 24;

/// Boolean function of a gate over primary inputs, reduced to the variables
/// it genuinely depends on. Bit m of `table` is the output when support[k]
/// takes bit k of m. An empty support is a constant.
struct ConeFunction {
  std::vector<std::uint32_t> support;  // sorted primary-input indices
  std::vector<Word> table;             // 2^|support| bits, padding zero

  bool bit(std::size_t m) const { return (table[m / kWordBits] >> (m % kWordBits)) & 1U; }
  bool is_constant() const { return support.empty(); }
  // Evaluate on a full primary-input assignment.
  bool eval(std::span<const bool> inputs) const;

  friend bool operator==(const ConeFunction&, const ConeFunction&) = default;
};

/// Cones of every gate in layers [0, up_to_layer]; OversizedConeError when a
/// support union exceeds `support_limit`.
std::vector<std::vector<ConeFunction>> layer_cones(const HardCircuit& circuit, std::size_t up_to_layer,
                                                   std::size_t support_limit = kDefaultConeSupportLimit);

ConeFunction cone_of(const HardCircuit& circuit, std::size_t layer, std::size_t gate,
                     std::size_t support_limit = kDefaultConeSupportLimit);

struct RerouteTarget {
  enum class Kind : std::uint8_t { kGate, kConst0, kConst1, kUnused };
  Kind kind = Kind::kUnused;
  std::uint32_t gate = 0;  // surviving gate index (pre-pass numbering) for kGate
};

struct RerouteEntry {
  std::size_t layer = 0;
  std::uint32_t gate = 0;  // removed gate, pre-pass numbering
  RerouteTarget target;
};

struct PruneReport {
  std::string pass;
  std::vector<std::size_t> gates_before;  // per layer
  std::vector<std::size_t> gates_after;
  std::vector<RerouteEntry> reroutes;
  std::string split;
  std::optional<double> accuracy_before;
  std::optional<double> accuracy_after;

  std::size_t total_before() const;
  std::size_t total_after() const;
};

struct PruneResult {
  HardCircuit circuit;
  PruneReport report;
};

/// Remove non-output gates no downstream gate reads (through an input its
/// table depends on), repeated to a fixpoint.
PruneResult trivial_prune(const HardCircuit& circuit);

/// Merge logically equivalent gates within each non-output layer: bucket by
/// the sum of reduced support indices, compare exact cones inside a bucket,
/// keep the lowest index of each class and reroute readers of the rest.
/// Constant cones collapse onto one constant gate per value and layer.
/// Finishes with trivial_prune. Throws OversizedConeError before rewriting.
PruneResult logic_equivalence_prune(const HardCircuit& circuit,
                                    std::size_t support_limit = kDefaultConeSupportLimit);

struct ActivationProfile {
  std::size_t sample_count = 0;
  std::vector<BitMatrix> activations;         // per layer, samples x gates
  std::vector<std::vector<std::size_t>> ones;  // per layer, per gate

  std::size_t ones_count(std::size_t layer, std::size_t gate) const { return ones[layer][gate]; }
};

ActivationProfile profile_activations(const HardCircuit& circuit, const BitMatrix& data);

/// Replace every gate whose majority value occurs in at least `threshold` of
/// the profiled samples (0.5 < threshold <= 1) by that constant. Downstream
/// tables are left as they are. Ends with trivial_prune.
PruneResult greedy_prune(const HardCircuit& circuit, const ActivationProfile& profile, double threshold);

/// Within each non-output layer, merge gate pairs whose activation
/// correlation is at least `c` (0 < c <= 1), in descending order of
/// correlation. The higher-indexed gate is removed and its readers use the
/// lower-indexed one; a removed gate never absorbs others and a survivor is
/// never removed. Constant gates are skipped. Ends with trivial_prune.
PruneResult similarity_prune(const HardCircuit& circuit, const ActivationProfile& profile, double c);

/// Phi coefficient from counts: n samples, n_i and n_j ones, n_ij joint ones.
/// NaN when either vector has zero variance.
double phi_from_counts(std::size_t n, std::size_t n_i, std::size_t n_j, std::size_t n_ij);

/// Popcount correlation of two activation columns.
double activation_correlation(const BitMatrix& acts, std::size_t i, std::size_t j);

/// Spearman rank correlation with average ranks for ties.
double spearman_rank(std::span<const double> x, std::span<const double> y);

/// CSV rows "pass,layer,before,after,accuracy", one per layer plus a "total" row.
void write_prune_report_csv(std::ostream& out, std::span<const PruneReport> reports, bool header = true);

}  // namespace dbn
