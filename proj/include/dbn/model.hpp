#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dbn/circuit.hpp"

namespace dbn {

inline constexpr int kArity = 2;

using GateLogits = Eigen::Matrix<double, Eigen::Dynamic, GateTruthTable::kCount, Eigen::RowMajor>;
using SlotMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CandidateMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable parameters of one layer.
///
/// Interconnect tensors are stored with one row per (gate, slot) pair,
/// row index g * kArity + j, and one column per candidate.
struct LayerParams {
  GateLogits gate_logits;         // G x 16
  CandidateMatrix candidates;     // (G*k) x C, global indices into the fan-in signals
  SlotMatrix conn_weights;        // (G*k) x C
  std::size_t fan_in_width = 0;   // I
  bool frozen_interconnect = false;
  bool frozen_gates = false;

  std::size_t gates() const { return std::size_t(gate_logits.rows()); }
  std::size_t candidates_per_slot() const { return std::size_t(candidates.cols()); }
  static Eigen::Index slot_row(std::size_t gate, int slot) { return Eigen::Index(gate * kArity + std::size_t(slot)); }
};

struct NetworkModel {
  std::vector<LayerParams> layers;
  std::size_t input_width = 0;
  std::size_t num_classes = 1;
  double group_tau = 1.0;

  std::size_t output_width() const { return layers.empty() ? input_width : layers.back().gates(); }
};

// Throws StructuralError on shape mismatch, out-of-range or duplicate candidates.
void validate(const NetworkModel& model);

/// Position of the largest entry; lowest index on ties.
template <typename Derived>
Eigen::Index argmax_lowest(const Eigen::DenseBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

// Global fan-in index a slot currently routes (argmax over its weights).
std::uint32_t selected_input(const LayerParams& layer, std::size_t gate, int slot);

/// Hardened circuit: each gate takes its argmax table and argmax candidates.
HardCircuit harden(const NetworkModel& model);

struct ModelShape {
  std::size_t input_width = 0;
  std::vector<std::size_t> layer_sizes;
  std::size_t num_classes = 1;
  double group_tau = 30.0;
  std::size_t candidates_per_slot = 8;
  double gate_init_std = 1.0;
};

/// Random initial model: N(0, gate_init_std) gate logits, zero connection
/// weights, candidates drawn uniformly without replacement per slot.
NetworkModel init_model(const ModelShape& shape, std::mt19937_64& rng);

/// Draw `count` distinct values from [0, n) uniformly, in uniformly random order.
std::vector<std::uint32_t> sample_distinct(std::size_t count, std::size_t n, std::mt19937_64& rng);

struct InterconnectMemory {
  std::uint64_t bytes_full = 0;    // dense G x k x I float weights
  std::uint64_t bytes_sparse = 0;  // G x k x C float weights plus int32 candidate indices
};

InterconnectMemory estimate_interconnect_memory(std::uint64_t gates, std::uint64_t fan_in, std::uint64_t arity,
                                                std::uint64_t candidates);

}  // namespace dbn
