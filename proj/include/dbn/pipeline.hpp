#pragma once

#include "dbn/checkpoint.hpp"
#include "dbn/config.hpp"
#include "dbn/pruning.hpp"

namespace dbn {

struct PreparedData {
  Dataset dataset;
  ThermometerEncoder encoder;
  EncodedData encoded;
};

PreparedData prepare_data(const RunConfig& config);

// Encoded splits of an already-loaded dataset under a given encoder.
PreparedData prepare_data(Dataset dataset, ThermometerEncoder encoder);

/// Fresh model sized by the config, seeded with config.train.seed.
NetworkModel initial_model(const RunConfig& config, std::size_t input_width, std::size_t num_classes);

const BitMatrix& split_inputs(const EncodedData& data, Split s);
const std::vector<int>& split_labels(const EncodedData& data, Split s);

struct PruneOptions {
  double greedy_threshold = 0.95;
  double similarity_threshold = 0.95;
  std::size_t cone_limit = kDefaultConeSupportLimit;
};

// Comma-separated pass names: trivial, logic-equiv, greedy, similarity.
std::vector<std::string> parse_pass_list(const std::string& text);

/// Run one named pass; data-driven passes profile `profile_inputs`.
PruneResult run_prune_pass(const std::string& pass, const HardCircuit& circuit, const PruneOptions& options,
                           const BitMatrix& profile_inputs);

}  // namespace dbn
