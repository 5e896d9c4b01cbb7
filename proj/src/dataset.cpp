#include "dbn/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "dbn/errors.hpp"
#include "dbn/model.hpp"

namespace dbn {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val" || name == "validation") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) out.push_back(i);
  return out;
}

FeatureMatrix Dataset::features_of(Split s) const {
  const auto idx = indices(s);
  FeatureMatrix out(static_cast<Eigen::Index>(idx.size()), features.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(Eigen::Index(r)) = features.row(Eigen::Index(idx[r]));
  return out;
}

std::vector<int> Dataset::labels_of(Split s) const {
  std::vector<int> out;
  for (std::size_t i : indices(s)) out.push_back(labels[i]);
  return out;
}

void validate(const Dataset& data) {
  if (std::size_t(data.features.rows()) != data.labels.size() || data.splits.size() != data.labels.size())
    throw StructuralError("dataset: features, labels and splits disagree in length");
  for (int l : data.labels)
    if (l < 0 || std::size_t(l) >= data.num_classes) throw StructuralError("dataset: label out of range");
}

void carve_validation(Dataset& data, std::size_t val_size, std::uint64_t seed) {
  auto train = data.indices(Split::kTrain);
  if (val_size >= train.size() && val_size > 0)
    throw ConfigError("validation size " + std::to_string(val_size) + " leaves no training samples");
  std::mt19937_64 rng(seed);
  std::shuffle(train.begin(), train.end(), rng);
  for (std::size_t i = 0; i < val_size; ++i) data.splits[train[i]] = Split::kVal;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("missing file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t at) {
  return (std::uint32_t(buf[at]) << 24) | (std::uint32_t(buf[at + 1]) << 16) | (std::uint32_t(buf[at + 2]) << 8) |
         std::uint32_t(buf[at + 3]);
}

struct RawSplit {
  std::vector<unsigned char> pixels;
  std::vector<unsigned char> labels;
  std::size_t features = 0;
};

void append(Dataset& d, const RawSplit& raw, Split split) {
  const std::size_t n = raw.labels.size();
  const Eigen::Index base = d.features.rows();
  d.features.conservativeResize(base + Eigen::Index(n), Eigen::Index(raw.features));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t f = 0; f < raw.features; ++f)
      d.features(base + Eigen::Index(r), Eigen::Index(f)) = float(raw.pixels[r * raw.features + f]);
  for (unsigned char l : raw.labels) d.labels.push_back(int(l));
  d.splits.insert(d.splits.end(), n, split);
}

RawSplit read_cifar_batch(const std::filesystem::path& path) {
  constexpr std::size_t kRecord = 1 + 3072;
  const auto buf = read_file(path);
  if (buf.empty() || buf.size() % kRecord != 0)
    throw IngestionError("truncated or corrupt CIFAR-10 batch: " + path.string());
  RawSplit raw;
  raw.features = 3072;
  const std::size_t n = buf.size() / kRecord;
  raw.pixels.reserve(n * 3072);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char label = buf[r * kRecord];
    if (label > 9) throw IngestionError("CIFAR-10 label out of range in " + path.string());
    raw.labels.push_back(label);
    raw.pixels.insert(raw.pixels.end(), buf.begin() + std::ptrdiff_t(r * kRecord + 1),
                      buf.begin() + std::ptrdiff_t((r + 1) * kRecord));
  }
  return raw;
}

RawSplit read_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  if (ib.size() < 16 || read_be32(ib, 0) != 0x00000803)
    throw IngestionError("bad IDX image magic number in " + images.string());
  if (lb.size() < 8 || read_be32(lb, 0) != 0x00000801)
    throw IngestionError("bad IDX label magic number in " + labels.string());
  const std::size_t n = read_be32(ib, 4), rows = read_be32(ib, 8), cols = read_be32(ib, 12);
  if (read_be32(lb, 4) != n) throw IngestionError("IDX image/label counts differ: " + images.string());
  if (ib.size() != 16 + n * rows * cols) throw IngestionError("truncated IDX image file " + images.string());
  if (lb.size() != 8 + n) throw IngestionError("truncated IDX label file " + labels.string());
  RawSplit raw;
  raw.features = rows * cols;
  raw.pixels.assign(ib.begin() + 16, ib.end());
  raw.labels.assign(lb.begin() + 8, lb.end());
  for (unsigned char l : raw.labels)
    if (l > 9) throw IngestionError("IDX label out of range in " + labels.string());
  return raw;
}

}  // namespace

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path) || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("DBN_DATA_DIR")) {
    const fs::path candidate = fs::path(root) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

Dataset load_cifar10(const std::string& dir, std::size_t val_size, std::uint64_t seed) {
  const std::filesystem::path root = resolve_data_path(dir);
  Dataset d;
  d.num_classes = 10;
  d.provenance = "cifar10:" + root.string();
  for (int i = 1; i <= 5; ++i)
    append(d, read_cifar_batch(root / ("data_batch_" + std::to_string(i) + ".bin")), Split::kTrain);
  append(d, read_cifar_batch(root / "test_batch.bin"), Split::kTest);
  carve_validation(d, val_size, seed);
  validate(d);
  return d;
}

Dataset load_mnist_idx(const std::string& dir, std::size_t val_size, std::uint64_t seed) {
  const std::filesystem::path root = resolve_data_path(dir);
  Dataset d;
  d.num_classes = 10;
  d.provenance = "mnist:" + root.string();
  append(d, read_idx_pair(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte"), Split::kTrain);
  append(d, read_idx_pair(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte"), Split::kTest);
  carve_validation(d, val_size, seed);
  validate(d);
  return d;
}

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "parity-of-subset" || name == "parity") return SynthKind::kParityOfSubset;
  if (name == "threshold-vote" || name == "vote") return SynthKind::kThresholdVote;
  if (name == "random-circuit-teacher" || name == "teacher") return SynthKind::kRandomCircuitTeacher;
  throw ConfigError("unknown synthetic task '" + name + "'");
}

namespace {

// Two-class readout: output 0 is NOT t, output 1 is t, so the predicted class equals t.
std::vector<HardGate> binary_readout(std::uint32_t signal) {
  return {HardGate{GateTruthTable(GateTruthTable::kNotA), signal, signal},
          HardGate{GateTruthTable(GateTruthTable::kA), signal, signal}};
}

HardCircuit make_teacher(SynthKind kind, std::span<const std::uint32_t> vars, std::size_t n_features,
                         std::mt19937_64& rng) {
  HardCircuit c;
  c.input_width = n_features;
  c.num_classes = 2;
  c.group_tau = 1.0;
  switch (kind) {
    case SynthKind::kParityOfSubset:
      c.layers.push_back({HardGate{GateTruthTable(GateTruthTable::kXor), vars[0], vars[1]}});
      c.layers.push_back(binary_readout(0));
      break;
    case SynthKind::kThresholdVote: {
      // Group 0 counts zeros, group 1 counts ones: argmax is the majority.
      std::vector<HardGate> out;
      for (auto v : vars) out.push_back({GateTruthTable(GateTruthTable::kNotA), v, v});
      for (auto v : vars) out.push_back({GateTruthTable(GateTruthTable::kA), v, v});
      c.layers.push_back(std::move(out));
      break;
    }
    case SynthKind::kRandomCircuitTeacher: {
      static constexpr std::array<std::uint8_t, 6> kMixing = {GateTruthTable::kAnd, GateTruthTable::kOr,
                                                              GateTruthTable::kXor, GateTruthTable::kXnor, 2, 4};
      std::uniform_int_distribution<std::size_t> pick(0, kMixing.size() - 1);
      std::vector<HardGate> hidden;
      for (std::size_t g = 0; g < 4; ++g)
        hidden.push_back({GateTruthTable(kMixing[pick(rng)]), vars[(2 * g) % vars.size()],
                          vars[(2 * g + 1) % vars.size()]});
      c.layers.push_back(std::move(hidden));
      c.layers.push_back({HardGate{GateTruthTable(kMixing[pick(rng)]), 0, 1},
                          HardGate{GateTruthTable(kMixing[pick(rng)]), 2, 3}});
      c.layers.push_back({HardGate{GateTruthTable(kMixing[pick(rng)]), 0, 1}});
      c.layers.push_back(binary_readout(0));
      break;
    }
  }
  validate(c);
  return c;
}

}  // namespace

Dataset synth_boolean_task(SynthKind kind, std::size_t n_features, std::size_t n_samples, std::uint64_t seed) {
  const std::size_t needed = kind == SynthKind::kParityOfSubset ? 2 : kind == SynthKind::kThresholdVote ? 5 : 8;
  if (n_features < needed) throw ConfigError("synthetic task needs at least " + std::to_string(needed) + " features");
  if (n_samples < 10) throw ConfigError("synthetic task needs at least 10 samples");
  std::mt19937_64 rng(seed);
  Dataset d;
  d.num_classes = 2;
  d.binary_features = true;
  auto vars = sample_distinct(needed, n_features, rng);
  d.relevant_features.assign(vars.begin(), vars.end());
  d.teacher = make_teacher(kind, vars, n_features, rng);
  static constexpr std::array<const char*, 3> kNames = {"parity-of-subset", "threshold-vote", "random-circuit-teacher"};
  d.provenance = std::string("synth:") + kNames[std::size_t(kind)] + ":seed=" + std::to_string(seed);

  d.features.resize(Eigen::Index(n_samples), Eigen::Index(n_features));
  std::bernoulli_distribution coin(0.5);
  BitMatrix bits(n_samples, n_features);
  for (std::size_t r = 0; r < n_samples; ++r)
    for (std::size_t f = 0; f < n_features; ++f) {
      const bool v = coin(rng);
      d.features(Eigen::Index(r), Eigen::Index(f)) = v ? 1.0F : 0.0F;
      bits.set(r, f, v);
    }
  d.labels = predict_classes(eval_circuit(*d.teacher, bits), 2);

  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  d.splits.assign(n_samples, Split::kTrain);
  const std::size_t n_test = n_samples / 5, n_val = n_samples / 10;
  for (std::size_t i = 0; i < n_test; ++i) d.splits[order[i]] = Split::kTest;
  for (std::size_t i = n_test; i < n_test + n_val; ++i) d.splits[order[i]] = Split::kVal;
  validate(d);
  return d;
}

}  // namespace dbn
