#include "dbn/circuit.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dbn/parallel.hpp"

namespace dbn {

void validate(const HardCircuit& circuit) {
  for (std::size_t l = 0; l < circuit.layers.size(); ++l) {
    const std::size_t width = circuit.fan_in_width(l);
    for (std::size_t g = 0; g < circuit.layers[l].size(); ++g) {
      const HardGate& gate = circuit.layers[l][g];
      if ((gate.table.depends_on_a() && gate.in0 >= width) || (gate.table.depends_on_b() && gate.in1 >= width))
        throw StructuralError("layer " + std::to_string(l) + " gate " + std::to_string(g) +
                              " reads a signal outside [0, " + std::to_string(width) + ")");
    }
  }
  if (circuit.num_classes == 0 || circuit.output_width() % circuit.num_classes != 0)
    throw StructuralError("output width is not divisible by num_classes");
  if (!(circuit.group_tau > 0.0)) throw StructuralError("group_tau must be positive");
}

std::size_t gate_count(const HardCircuit& circuit) {
  std::size_t n = 0;
  for (const auto& layer : circuit.layers) n += layer.size();
  return n;
}

std::size_t gate_count_without_projections(const HardCircuit& circuit) {
  std::size_t n = 0;
  for (const auto& layer : circuit.layers)
    for (const auto& gate : layer) n += gate.table.is_projection() ? 0 : 1;
  return n;
}

BitMatrix eval_layer(std::span<const HardGate> gates, const BitMatrix& fan_in) {
  for (const HardGate& gate : gates)
    if ((gate.table.depends_on_a() && gate.in0 >= fan_in.signals()) ||
        (gate.table.depends_on_b() && gate.in1 >= fan_in.signals()))
      throw StructuralError("gate input index out of range");
  BitMatrix out(fan_in.samples(), gates.size());
  const std::size_t wps = fan_in.words_per_signal();
  parallel_for(gates.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      const HardGate& gate = gates[g];
      auto dst = out.column(g);
      const bool use_a = gate.table.depends_on_a();
      const bool use_b = gate.table.depends_on_b();
      const Word* a = use_a ? fan_in.column(gate.in0).data() : nullptr;
      const Word* b = use_b ? fan_in.column(gate.in1).data() : nullptr;
      for (std::size_t w = 0; w < wps; ++w)
        dst[w] = gate.table.eval_words(a ? a[w] : 0, b ? b[w] : 0);
    }
  });
  out.clear_padding();
  return out;
}

std::vector<BitMatrix> eval_circuit_layers(const HardCircuit& circuit, const BitMatrix& inputs) {
  if (inputs.signals() != circuit.input_width)
    throw StructuralError("eval_circuit: input has " + std::to_string(inputs.signals()) + " signals, circuit expects " +
                          std::to_string(circuit.input_width));
  std::vector<BitMatrix> acts;
  acts.reserve(circuit.layers.size());
  for (std::size_t l = 0; l < circuit.layers.size(); ++l)
    acts.push_back(eval_layer(circuit.layers[l], l == 0 ? inputs : acts.back()));
  return acts;
}

BitMatrix eval_circuit(const HardCircuit& circuit, const BitMatrix& inputs) {
  if (circuit.layers.empty()) {
    if (inputs.signals() != circuit.input_width) throw StructuralError("eval_circuit: input width mismatch");
    return inputs;
  }
  auto acts = eval_circuit_layers(circuit, inputs);
  return std::move(acts.back());
}

std::vector<int> predict_classes(const BitMatrix& outputs, std::size_t num_classes) {
  const Eigen::MatrixXd counts = group_logits<double>(outputs, num_classes, 1.0);
  std::vector<int> pred(outputs.samples());
  for (Eigen::Index b = 0; b < counts.rows(); ++b) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < counts.cols(); ++c)
      if (counts(b, c) > counts(b, best)) best = c;
    pred[std::size_t(b)] = int(best);
  }
  return pred;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw StructuralError("accuracy: size mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return double(hit) / double(labels.size());
}

double circuit_accuracy(const HardCircuit& circuit, const BitMatrix& inputs, std::span<const int> labels) {
  return accuracy(predict_classes(eval_circuit(circuit, inputs), circuit.num_classes), labels);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw IngestionError("netlist: bad number '" + s + "'");
  return v;
}

void expect_key(std::istream& in, const char* key) {
  std::string k;
  if (!(in >> k) || k != key) throw IngestionError(std::string("netlist: expected '") + key + "'");
}

}  // namespace

void write_netlist(std::ostream& out, const HardCircuit& circuit) {
  out << "dbn-netlist 1\n";
  out << "input_width " << circuit.input_width << '\n';
  out << "num_classes " << circuit.num_classes << '\n';
  out << "tau " << format_double(circuit.group_tau) << '\n';
  out << "layers " << circuit.layers.size();
  for (const auto& layer : circuit.layers) out << ' ' << layer.size();
  out << '\n';
  for (std::size_t l = 0; l < circuit.layers.size(); ++l)
    for (std::size_t g = 0; g < circuit.layers[l].size(); ++g) {
      const HardGate& gate = circuit.layers[l][g];
      out << l << ' ' << g << ' ' << int(gate.table.code()) << ' ' << gate.in0 << ' ' << gate.in1 << '\n';
    }
}

HardCircuit read_netlist(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "dbn-netlist") throw IngestionError("netlist: missing header");
  if (version != 1) throw IngestionError("netlist: unsupported version " + std::to_string(version));
  HardCircuit c;
  std::string tau;
  std::size_t nlayers = 0;
  expect_key(in, "input_width");
  in >> c.input_width;
  expect_key(in, "num_classes");
  in >> c.num_classes;
  expect_key(in, "tau");
  in >> tau;
  c.group_tau = parse_double(tau);
  expect_key(in, "layers");
  if (!(in >> nlayers)) throw IngestionError("netlist: bad layer count");
  c.layers.resize(nlayers);
  for (auto& layer : c.layers) {
    std::size_t n = 0;
    if (!(in >> n)) throw IngestionError("netlist: bad layer size");
    layer.resize(n);
  }
  for (std::size_t l = 0; l < nlayers; ++l)
    for (std::size_t g = 0; g < c.layers[l].size(); ++g) {
      std::size_t rl = 0, rg = 0;
      unsigned code = 0;
      std::uint32_t in0 = 0, in1 = 0;
      if (!(in >> rl >> rg >> code >> in0 >> in1)) throw IngestionError("netlist: truncated gate records");
      if (rl != l || rg != g || code > 15) throw IngestionError("netlist: malformed record for layer " +
                                                                std::to_string(l) + " gate " + std::to_string(g));
      c.layers[l][g] = HardGate{GateTruthTable(std::uint8_t(code)), in0, in1};
    }
  try {
    validate(c);
  } catch (const StructuralError& e) {
    throw IngestionError(std::string("netlist: ") + e.what());
  }
  return c;
}

void save_netlist(const std::string& path, const HardCircuit& circuit) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  write_netlist(out, circuit);
}

HardCircuit load_netlist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open netlist " + path);
  return read_netlist(in);
}

}  // namespace dbn
