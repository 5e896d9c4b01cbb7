#include "dbn/model.hpp"

#include <algorithm>
#include <unordered_set>

#include "dbn/errors.hpp"

namespace dbn {

void validate(const NetworkModel& model) {
  if (model.layers.empty()) throw StructuralError("model has no layers");
  std::size_t width = model.input_width;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerParams& layer = model.layers[l];
    const auto where = "layer " + std::to_string(l) + ": ";
    if (layer.fan_in_width != width) throw StructuralError(where + "fan-in width does not match previous layer");
    const auto slots = Eigen::Index(layer.gates() * kArity);
    if (layer.candidates.rows() != slots || layer.conn_weights.rows() != slots ||
        layer.candidates.cols() != layer.conn_weights.cols() || layer.candidates.cols() == 0)
      throw StructuralError(where + "interconnect tensors must both be (G*k) x C");
    for (Eigen::Index r = 0; r < slots; ++r) {
      auto row = layer.candidates.row(r);
      for (Eigen::Index c = 0; c < row.size(); ++c) {
        if (row(c) < 0 || std::size_t(row(c)) >= width) throw StructuralError(where + "candidate index out of range");
        for (Eigen::Index d = 0; d < c; ++d)
          if (row(d) == row(c)) throw StructuralError(where + "duplicate candidate within a slot");
      }
    }
    width = layer.gates();
  }
  if (model.num_classes == 0 || width % model.num_classes != 0)
    throw StructuralError("last layer width is not divisible by num_classes");
  if (!(model.group_tau > 0.0)) throw StructuralError("group_tau must be positive");
}

std::uint32_t selected_input(const LayerParams& layer, std::size_t gate, int slot) {
  const Eigen::Index r = LayerParams::slot_row(gate, slot);
  return std::uint32_t(layer.candidates(r, argmax_lowest(layer.conn_weights.row(r))));
}

HardCircuit harden(const NetworkModel& model) {
  validate(model);
  HardCircuit c;
  c.input_width = model.input_width;
  c.num_classes = model.num_classes;
  c.group_tau = model.group_tau;
  c.layers.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerParams& layer = model.layers[l];
    auto& gates = c.layers[l];
    gates.resize(layer.gates());
    for (std::size_t g = 0; g < layer.gates(); ++g) {
      const auto code = std::uint8_t(argmax_lowest(layer.gate_logits.row(Eigen::Index(g))));
      gates[g] = HardGate{GateTruthTable(code), selected_input(layer, g, 0), selected_input(layer, g, 1)};
    }
  }
  return c;
}

std::vector<std::uint32_t> sample_distinct(std::size_t count, std::size_t n, std::mt19937_64& rng) {
  if (count > n) throw StructuralError("cannot draw " + std::to_string(count) + " distinct values from " +
                                       std::to_string(n));
  std::vector<std::uint32_t> out;
  out.reserve(count);
  std::unordered_set<std::uint32_t> seen;
  for (std::size_t j = n - count; j < n; ++j) {
    const auto t = std::uint32_t(std::uniform_int_distribution<std::size_t>(0, j)(rng));
    const auto pick = seen.count(t) ? std::uint32_t(j) : t;
    seen.insert(pick);
    out.push_back(pick);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

NetworkModel init_model(const ModelShape& shape, std::mt19937_64& rng) {
  if (shape.layer_sizes.empty()) throw StructuralError("init_model: no layers");
  NetworkModel m;
  m.input_width = shape.input_width;
  m.num_classes = shape.num_classes;
  m.group_tau = shape.group_tau;
  std::normal_distribution<double> normal(0.0, shape.gate_init_std);
  std::size_t width = shape.input_width;
  const auto C = Eigen::Index(shape.candidates_per_slot);
  for (std::size_t gates : shape.layer_sizes) {
    if (std::size_t(C) > width)
      throw StructuralError("init_model: " + std::to_string(C) + " candidates exceed fan-in width " +
                            std::to_string(width));
    LayerParams layer;
    layer.fan_in_width = width;
    layer.gate_logits.resize(Eigen::Index(gates), GateTruthTable::kCount);
    for (Eigen::Index i = 0; i < layer.gate_logits.size(); ++i) layer.gate_logits.data()[i] = normal(rng);
    const auto slots = Eigen::Index(gates * kArity);
    layer.candidates.resize(slots, C);
    layer.conn_weights = SlotMatrix::Zero(slots, C);
    for (Eigen::Index r = 0; r < slots; ++r) {
      const auto picks = sample_distinct(std::size_t(C), width, rng);
      for (Eigen::Index c = 0; c < C; ++c) layer.candidates(r, c) = std::int32_t(picks[std::size_t(c)]);
    }
    m.layers.push_back(std::move(layer));
    width = gates;
  }
  validate(m);
  return m;
}

InterconnectMemory estimate_interconnect_memory(std::uint64_t gates, std::uint64_t fan_in, std::uint64_t arity,
                                                std::uint64_t candidates) {
  if (gates == 0 || fan_in == 0 || arity == 0 || candidates == 0)
    throw ConfigError("estimate_interconnect_memory: all arguments must be positive");
  return {arity * gates * fan_in * 4, arity * gates * candidates * 4 * 2};
}

}  // namespace dbn
