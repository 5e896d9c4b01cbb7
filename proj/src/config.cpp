#include "dbn/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

namespace pt = boost::property_tree;

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": cannot parse '" + text + "'");
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(key + ": empty entry");
    out.push_back(parse_number<std::size_t>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field number(T TrainConfig::*member, const std::string& key) {
  return {[member, key](RunConfig& c, const std::string& v) { c.train.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.train.*member);
            else return std::to_string(c.train.*member);
          }};
}

template <class T>
Field data_number(T DataSource::*member, const std::string& key) {
  return {[member, key](RunConfig& c, const std::string& v) { c.data.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) { return std::to_string(c.data.*member); }};
}

Field data_text(std::string DataSource::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.data.*member = v; },
          [member](const RunConfig& c) { return c.data.*member; }};
}

// Ordered so write_config emits a stable layout.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"network.layer_sizes",
       {[](RunConfig& c, const std::string& v) { c.train.layer_sizes = parse_sizes("network.layer_sizes", v); },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.train.layer_sizes.size(); ++i)
            s += (i ? "," : "") + std::to_string(c.train.layer_sizes[i]);
          return s;
        }}},
      {"network.tau", number(&TrainConfig::tau, "network.tau")},
      {"network.gate_init_std", number(&TrainConfig::gate_init_std, "network.gate_init_std")},
      {"interconnect.candidates", number(&TrainConfig::candidates, "interconnect.candidates")},
      {"interconnect.replace", number(&TrainConfig::replace, "interconnect.replace")},
      {"interconnect.beta", number(&TrainConfig::beta, "interconnect.beta")},
      {"interconnect.mode",
       {[](RunConfig& c, const std::string& v) { c.train.interconnect_mode = parse_interconnect_mode(v); },
        [](const RunConfig& c) { return std::string(interconnect_mode_name(c.train.interconnect_mode)); }}},
      {"interconnect.sampling",
       {[](RunConfig& c, const std::string& v) { c.train.sampling = parse_sampling_mode(v); },
        [](const RunConfig& c) { return std::string(sampling_mode_name(c.train.sampling)); }}},
      {"interconnect.layers_to_learn", number(&TrainConfig::layers_to_learn, "interconnect.layers_to_learn")},
      {"training.batch_size", number(&TrainConfig::batch_size, "training.batch_size")},
      {"training.lr_init", number(&TrainConfig::lr_init, "training.lr_init")},
      {"training.lr_final", number(&TrainConfig::lr_final, "training.lr_final")},
      {"training.interconnect_epochs", number(&TrainConfig::interconnect_epochs, "training.interconnect_epochs")},
      {"training.finetune_epochs", number(&TrainConfig::finetune_epochs, "training.finetune_epochs")},
      {"training.adam_beta1", number(&TrainConfig::adam_beta1, "training.adam_beta1")},
      {"training.adam_beta2", number(&TrainConfig::adam_beta2, "training.adam_beta2")},
      {"training.adam_eps", number(&TrainConfig::adam_eps, "training.adam_eps")},
      {"data.kind", data_text(&DataSource::kind)},
      {"data.path", data_text(&DataSource::path)},
      {"data.synth_task", data_text(&DataSource::synth_task)},
      {"data.synth_features", data_number(&DataSource::synth_features, "data.synth_features")},
      {"data.synth_samples", data_number(&DataSource::synth_samples, "data.synth_samples")},
      {"data.thresholds", number(&TrainConfig::thresholds, "data.thresholds")},
      {"data.val_size", number(&TrainConfig::val_size, "data.val_size")},
      {"run.seed", number(&TrainConfig::seed, "run.seed")},
      {"run.threads", number(&TrainConfig::threads, "run.threads")},
      {"run.budget_seconds", number(&TrainConfig::budget_seconds, "run.budget_seconds")},
      {"run.refresh_log",
       {[](RunConfig& c, const std::string& v) { c.train.refresh_log = v; },
        [](const RunConfig& c) { return c.train.refresh_log; }}},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return &f;
  return nullptr;
}

void check_data(const RunConfig& c) {
  if (c.data.kind != "mnist" && c.data.kind != "cifar10" && c.data.kind != "synth")
    throw ConfigError("data.kind must be mnist, cifar10 or synth, got '" + c.data.kind + "'");
  if (c.data.kind == "synth") parse_synth_kind(c.data.synth_task);
}

void apply_entries(RunConfig& config, const std::vector<std::pair<std::string, std::string>>& entries) {
  std::vector<std::string> unknown;
  bool saw_candidates = false, saw_replace = false;
  for (const auto& [key, value] : entries) {
    const Field* f = find_field(key);
    if (!f) {
      unknown.push_back(key);
      continue;
    }
    f->set(config, value);
    saw_candidates |= key == "interconnect.candidates";
    saw_replace |= key == "interconnect.replace";
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  if (saw_candidates && !saw_replace) config.train.replace = std::max<std::size_t>(1, config.train.candidates / 2);
  validate(config.train);
  check_data(config);
}

bool known_section(const std::string& name) {
  for (const auto& [key, f] : fields())
    if (key.compare(0, name.size() + 1, name + ".") == 0) return true;
  return false;
}

// Inline comments start at a ';' or '#' that begins the value or follows whitespace.
std::string strip_comment(const std::string& value) {
  for (std::size_t i = 0; i < value.size(); ++i)
    if ((value[i] == ';' || value[i] == '#') && (i == 0 || value[i - 1] == ' ' || value[i - 1] == '\t')) {
      if (i == 0) return {};
      const auto end = value.find_last_not_of(" \t", i - 1);
      return end == std::string::npos ? std::string() : value.substr(0, end + 1);
    }
  return value;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      // Either an empty section or a key outside any section.
      if (!body.data().empty() || !known_section(section)) entries.emplace_back(section, body.data());
      continue;
    }
    for (const auto& [key, value] : body) entries.emplace_back(section + "." + key, strip_comment(value.data()));
  }
  RunConfig config;
  apply_entries(config, entries);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in);
}

void apply_overrides(RunConfig& config, const std::map<std::string, std::string>& overrides) {
  apply_entries(config, {overrides.begin(), overrides.end()});
}

void write_config(std::ostream& out, const RunConfig& config) {
  std::string section;
  for (const auto& [name, f] : fields()) {
    const auto dot = name.find('.');
    const std::string s = name.substr(0, dot);
    if (s != section) {
      out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    out << name.substr(dot + 1) << " = " << f.get(config) << '\n';
  }
}

std::string config_to_string(const RunConfig& config) {
  std::ostringstream out;
  write_config(out, config);
  return out.str();
}

Dataset load_dataset(const RunConfig& config) {
  const DataSource& src = config.data;
  const TrainConfig& t = config.train;
  if (src.kind == "synth")
    return synth_boolean_task(parse_synth_kind(src.synth_task), src.synth_features, src.synth_samples, t.seed);
  if (src.path.empty()) throw IngestionError("data.path is empty for a " + src.kind + " dataset");
  const std::string dir = resolve_data_path(src.path);
  if (src.kind == "cifar10") return load_cifar10(dir, t.val_size, t.seed);
  return load_mnist_idx(dir, t.val_size, t.seed);
}

ThermometerEncoder make_encoder(const Dataset& data, std::size_t thresholds) {
  if (data.binary_features) return ThermometerEncoder::binary(std::size_t(data.features.cols()));
  return fit_thresholds(data.features_of(Split::kTrain), thresholds);
}

}  // namespace dbn
