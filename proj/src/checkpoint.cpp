#include "dbn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

constexpr std::array<char, 8> kMagic{'D', 'B', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <class T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), std::streamsize(s.size()));
  }
  template <class M>
  void matrix(const M& m) {
    pod<std::uint64_t>(std::uint64_t(m.rows()));
    pod<std::uint64_t>(std::uint64_t(m.cols()));
    out_.write(reinterpret_cast<const char*>(m.data()), std::streamsize(sizeof(typename M::Scalar) * m.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > kMaxElements) throw IngestionError("checkpoint: string length out of range");
    std::string s(n, '\0');
    in_.read(s.data(), std::streamsize(n));
    check();
    return s;
  }
  template <class M>
  M matrix() {
    const auto rows = pod<std::uint64_t>(), cols = pod<std::uint64_t>();
    if (rows > kMaxElements || cols > kMaxElements || (cols && rows > kMaxElements / cols))
      throw IngestionError("checkpoint: tensor shape out of range");
    if (M::ColsAtCompileTime != Eigen::Dynamic && cols != std::uint64_t(M::ColsAtCompileTime))
      throw IngestionError("checkpoint: unexpected tensor width");
    M m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in_.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(typename M::Scalar) * m.size()));
    check();
    return m;
  }

 private:
  void check() {
    if (!in_) throw IngestionError("checkpoint: truncated");
  }
  std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.pod(kCheckpointVersion);
  w.str(config_to_string(ckpt.config));
  w.matrix(ckpt.encoder.thresholds());

  const NetworkModel& m = ckpt.model;
  w.pod<std::uint64_t>(m.input_width);
  w.pod<std::uint64_t>(m.num_classes);
  w.pod(m.group_tau);
  w.pod<std::uint64_t>(m.layers.size());
  for (const auto& layer : m.layers) {
    w.pod<std::uint64_t>(layer.fan_in_width);
    w.pod<std::uint8_t>(layer.frozen_interconnect);
    w.pod<std::uint8_t>(layer.frozen_gates);
    w.matrix(layer.gate_logits);
    w.matrix(layer.candidates);
    w.matrix(layer.conn_weights);
  }

  const AdamState& a = ckpt.optimizer;
  w.pod(a.step);
  w.pod<std::uint64_t>(a.m_logits.size());
  for (std::size_t l = 0; l < a.m_logits.size(); ++l) {
    w.matrix(a.m_logits[l]);
    w.matrix(a.v_logits[l]);
    w.matrix(a.m_conn[l]);
    w.matrix(a.v_conn[l]);
  }
  if (!out) throw IngestionError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IngestionError("checkpoint: bad magic");
  Reader r(in);
  if (const auto v = r.pod<std::uint32_t>(); v != kCheckpointVersion)
    throw IngestionError("checkpoint: unsupported version " + std::to_string(v));

  Checkpoint ckpt;
  std::istringstream cfg(r.str());
  ckpt.config = parse_config(cfg);
  try {
    ckpt.encoder = ThermometerEncoder(r.matrix<ThermometerEncoder::Thresholds>());
  } catch (const StructuralError& e) {
    throw IngestionError(std::string("checkpoint: ") + e.what());
  }

  NetworkModel& m = ckpt.model;
  m.input_width = r.pod<std::uint64_t>();
  m.num_classes = r.pod<std::uint64_t>();
  m.group_tau = r.pod<double>();
  const auto layers = r.pod<std::uint64_t>();
  if (layers > 1024) throw IngestionError("checkpoint: layer count out of range");
  m.layers.resize(layers);
  for (auto& layer : m.layers) {
    layer.fan_in_width = r.pod<std::uint64_t>();
    layer.frozen_interconnect = r.pod<std::uint8_t>() != 0;
    layer.frozen_gates = r.pod<std::uint8_t>() != 0;
    layer.gate_logits = r.matrix<GateLogits>();
    layer.candidates = r.matrix<CandidateMatrix>();
    layer.conn_weights = r.matrix<SlotMatrix>();
  }
  try {
    validate(m);
  } catch (const StructuralError& e) {
    throw IngestionError(std::string("checkpoint: ") + e.what());
  }

  AdamState& a = ckpt.optimizer;
  a.step = r.pod<std::uint64_t>();
  const auto n = r.pod<std::uint64_t>();
  if (n != 0 && n != layers) throw IngestionError("checkpoint: optimizer layer count mismatch");
  for (std::uint64_t l = 0; l < n; ++l) {
    a.m_logits.push_back(r.matrix<GateLogits>());
    a.v_logits.push_back(r.matrix<GateLogits>());
    a.m_conn.push_back(r.matrix<SlotMatrix>());
    a.v_conn.push_back(r.matrix<SlotMatrix>());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path);
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace dbn
