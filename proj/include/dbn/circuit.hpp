#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dbn/bit_matrix.hpp"
#include "dbn/errors.hpp"
#include "dbn/gate.hpp"

namespace dbn {

struct HardGate {
  GateTruthTable table;
  std::uint32_t in0 = 0;
  std::uint32_t in1 = 0;

  friend bool operator==(const HardGate&, const HardGate&) = default;
};

/// Hardened netlist. Gates in layer l read signals of layer l-1 (primary
/// inputs for l = 0). An input slot the table does not depend on is never
/// read, so its index is not required to be in range.
struct HardCircuit {
  std::size_t input_width = 0;
  std::size_t num_classes = 1;
  double group_tau = 1.0;
  std::vector<std::vector<HardGate>> layers;

  std::size_t layer_width(std::size_t layer) const { return layers[layer].size(); }
  // Number of signals feeding `layer`.
  std::size_t fan_in_width(std::size_t layer) const {
    return layer == 0 ? input_width : layers[layer - 1].size();
  }
  std::size_t output_width() const { return layers.empty() ? input_width : layers.back().size(); }

  friend bool operator==(const HardCircuit&, const HardCircuit&) = default;
};

// Throws StructuralError when an essential input index is out of range or
// the output layer does not split evenly into classes.
void validate(const HardCircuit& circuit);

std::size_t gate_count(const HardCircuit& circuit);
// Gate count excluding pass-through gates (hardened skip connections).
std::size_t gate_count_without_projections(const HardCircuit& circuit);

/// Activations of every layer, front to back.
std::vector<BitMatrix> eval_circuit_layers(const HardCircuit& circuit, const BitMatrix& inputs);
/// Final-layer activations, samples x output_width.
BitMatrix eval_circuit(const HardCircuit& circuit, const BitMatrix& inputs);

// Evaluate one layer given its fan-in activations.
BitMatrix eval_layer(std::span<const HardGate> gates, const BitMatrix& fan_in);

/// GroupSum head: logit(b, c) = popcount of class c's contiguous output group / tau.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> group_logits(const BitMatrix& activations,
                                                                   std::size_t num_classes, Scalar tau) {
  if (num_classes == 0 || activations.signals() % num_classes != 0)
    throw StructuralError("group_logits: output width " + std::to_string(activations.signals()) +
                          " is not divisible by " + std::to_string(num_classes) + " classes");
  const std::size_t group = activations.signals() / num_classes;
  const std::size_t n = activations.samples();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> counts =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(Eigen::Index(n), Eigen::Index(num_classes));
  for (std::size_t s = 0; s < activations.signals(); ++s) {
    const auto c = Eigen::Index(s / group);
    auto col = activations.column(s);
    for (std::size_t w = 0; w < col.size(); ++w) {
      Word bits = col[w];
      while (bits) {
        const auto b = Eigen::Index(w * kWordBits + std::countr_zero(bits));
        counts(b, c) += Scalar(1);
        bits &= bits - 1;
      }
    }
  }
  return counts / tau;
}

// Class index with the highest group count per sample (lowest index on ties).
std::vector<int> predict_classes(const BitMatrix& outputs, std::size_t num_classes);
double accuracy(std::span<const int> predictions, std::span<const int> labels);
double circuit_accuracy(const HardCircuit& circuit, const BitMatrix& inputs, std::span<const int> labels);

/// Versioned text netlist:
///
///   dbn-netlist 1
///   input_width <n>
///   num_classes <n>
///   tau <shortest round-trip decimal>
///   layers <count> <size_0> ... <size_last>
///   <layer> <gate> <table_code> <in0> <in1>     (one line per gate)
void write_netlist(std::ostream& out, const HardCircuit& circuit);
HardCircuit read_netlist(std::istream& in);
void save_netlist(const std::string& path, const HardCircuit& circuit);
HardCircuit load_netlist(const std::string& path);

}  // namespace dbn
