#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbn/circuit.hpp"
#include "dbn/encoding.hpp"

namespace dbn {

enum class Split : std::uint8_t { kTrain, kVal, kTest };

const char* split_name(Split s);
// ConfigError for anything but train / val / test.
Split parse_split(const std::string& name);

struct Dataset {
  FeatureMatrix features;  // samples x features, raw values
  std::vector<int> labels;
  std::vector<Split> splits;
  std::size_t num_classes = 0;
  std::string provenance;
  bool binary_features = false;  // features are exactly 0/1
  std::optional<HardCircuit> teacher;
  std::vector<std::size_t> relevant_features;

  std::size_t samples() const { return labels.size(); }
  std::vector<std::size_t> indices(Split s) const;
  FeatureMatrix features_of(Split s) const;
  std::vector<int> labels_of(Split s) const;
};

// Throws StructuralError when labels, splits, or features disagree.
void validate(const Dataset& data);

/// Move `val_size` seeded-random train samples into the validation split.
void carve_validation(Dataset& data, std::size_t val_size, std::uint64_t seed);

/// Directory holding data_batch_1..5.bin and test_batch.bin (CIFAR-10 binary version).
Dataset load_cifar10(const std::string& dir, std::size_t val_size = 5000, std::uint64_t seed = 0);

/// Directory holding {train,t10k}-{images-idx3,labels-idx1}-ubyte.
Dataset load_mnist_idx(const std::string& dir, std::size_t val_size = 5000, std::uint64_t seed = 0);

// Relative paths that do not exist are retried under $DBN_DATA_DIR.
std::string resolve_data_path(const std::string& path);

enum class SynthKind { kParityOfSubset, kThresholdVote, kRandomCircuitTeacher };
SynthKind parse_synth_kind(const std::string& name);

/// Binary-feature task whose labels come from a known Boolean function.
/// Parity uses 2 chosen features, the vote uses 5; the teacher circuit is
/// kept in `teacher`. Split: 70% train, 10% val, 20% test.
Dataset synth_boolean_task(SynthKind kind, std::size_t n_features, std::size_t n_samples, std::uint64_t seed);

}  // namespace dbn
