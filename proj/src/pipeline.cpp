#include "dbn/pipeline.hpp"

#include <sstream>

#include "dbn/errors.hpp"

namespace dbn {

PreparedData prepare_data(const RunConfig& config) {
  Dataset d = load_dataset(config);
  ThermometerEncoder enc = make_encoder(d, config.train.thresholds);
  return prepare_data(std::move(d), std::move(enc));
}

PreparedData prepare_data(Dataset dataset, ThermometerEncoder encoder) {
  PreparedData p{std::move(dataset), std::move(encoder), {}};
  p.encoded = encode_dataset(p.encoder, p.dataset);
  return p;
}

NetworkModel initial_model(const RunConfig& config, std::size_t input_width, std::size_t num_classes) {
  const TrainConfig& t = config.train;
  ModelShape shape{input_width, t.layer_sizes, num_classes, t.tau, t.candidates, t.gate_init_std};
  std::mt19937_64 rng(t.seed);
  return init_model(shape, rng);
}

const BitMatrix& split_inputs(const EncodedData& data, Split s) {
  return s == Split::kTrain ? data.train_x : s == Split::kVal ? data.val_x : data.test_x;
}

const std::vector<int>& split_labels(const EncodedData& data, Split s) {
  return s == Split::kTrain ? data.train_y : s == Split::kVal ? data.val_y : data.test_y;
}

std::vector<std::string> parse_pass_list(const std::string& text) {
  std::vector<std::string> passes;
  std::stringstream ss(text);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name != "trivial" && name != "logic-equiv" && name != "greedy" && name != "similarity")
      throw ConfigError("unknown prune pass '" + name + "' (expected trivial, logic-equiv, greedy, similarity)");
    passes.push_back(name);
  }
  if (passes.empty()) throw ConfigError("no prune passes given");
  return passes;
}

PruneResult run_prune_pass(const std::string& pass, const HardCircuit& circuit, const PruneOptions& options,
                           const BitMatrix& profile_inputs) {
  if (pass == "trivial") return trivial_prune(circuit);
  if (pass == "logic-equiv") return logic_equivalence_prune(circuit, options.cone_limit);
  if (pass == "greedy")
    return greedy_prune(circuit, profile_activations(circuit, profile_inputs), options.greedy_threshold);
  if (pass == "similarity")
    return similarity_prune(circuit, profile_activations(circuit, profile_inputs), options.similarity_threshold);
  throw ConfigError("unknown prune pass '" + pass + "'");
}

}  // namespace dbn
