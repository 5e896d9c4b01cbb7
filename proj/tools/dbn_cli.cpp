// dbn: train, prune, evaluate and size Deep Boolean Networks.

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dbn/checkpoint.hpp"
#include "dbn/parallel.hpp"
#include "dbn/pipeline.hpp"

#ifndef DBN_VERSION
#define DBN_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dbn;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kIngestion = 3 };

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(p, mode);
  if (!out) throw IngestionError("cannot write " + p.string());
  return out;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config, manifest, out, dataset, data_kind;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<double> budget;
};

RunConfig resolve_train_config(const TrainArgs& a) {
  RunConfig cfg;
  if (!a.manifest.empty()) {
    std::ifstream in(a.manifest);
    if (!in) throw IngestionError("cannot open manifest " + a.manifest);
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception& e) {
      throw IngestionError("manifest " + a.manifest + ": " + e.what());
    }
    std::istringstream ini(m.at("config_ini").get<std::string>());
    cfg = parse_config(ini);
  } else if (!a.config.empty()) {
    cfg = load_config(a.config);
  }
  auto overrides = parse_sets(a.sets);
  if (!a.dataset.empty()) overrides["data.path"] = a.dataset;
  if (!a.data_kind.empty()) overrides["data.kind"] = a.data_kind;
  if (a.seed) overrides["run.seed"] = std::to_string(*a.seed);
  if (a.threads) overrides["run.threads"] = std::to_string(*a.threads);
  if (a.budget) {
    std::ostringstream b;
    b << std::setprecision(17) << *a.budget;
    overrides["run.budget_seconds"] = b.str();
  }
  apply_overrides(cfg, overrides);
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  const std::string started = timestamp();
  const RunConfig cfg = resolve_train_config(a);
  set_num_threads(cfg.train.threads);
  const fs::path out(a.out);
  fs::create_directories(out);

  PreparedData data = prepare_data(cfg);
  Checkpoint ckpt{cfg, data.encoder, initial_model(cfg, data.encoder.output_width(), data.dataset.num_classes), {}};
  ckpt.optimizer = AdamState::zeros_like(ckpt.model);

  std::ofstream refresh_log;
  TrainHooks hooks;
  if (!cfg.train.refresh_log.empty()) {
    refresh_log = open_out(out / cfg.train.refresh_log);
    hooks.refresh_log = &refresh_log;
  }
  hooks.on_metric = [](const MetricRow& r) {
    if (r.split == Split::kVal || r.split == Split::kTest)
      std::cerr << "epoch " << r.epoch << ' ' << split_name(r.split) << " acc " << r.accuracy << " (" << r.phase
                << ", " << r.wall_clock_s << "s)\n";
  };
  const TrainResult res = train(ckpt.model, ckpt.optimizer, data.encoded, cfg.train, hooks);

  save_checkpoint((out / "checkpoint.bin").string(), ckpt);
  const HardCircuit circuit = harden(ckpt.model);
  save_netlist((out / "netlist.txt").string(), circuit);
  save_encoder((out / "encoder.txt").string(), ckpt.encoder);
  open_out(out / "config.ini") << config_to_string(cfg);
  {
    auto m = open_out(out / "metrics.csv");
    write_metrics_csv(m, res.metrics);
    auto c = open_out(out / "curves.csv");
    write_curves_csv(c, res.metrics);
  }

  json acc;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto& x = split_inputs(data.encoded, s);
    if (x.samples() > 0) acc[split_name(s)] = circuit_accuracy(circuit, x, split_labels(data.encoded, s));
  }
  json manifest = {
      {"command", "train"},
      {"code_version", DBN_VERSION},
      {"config_ini", config_to_string(cfg)},
      {"seed", cfg.train.seed},
      {"threads", cfg.train.threads},
      {"optimizer", {{"name", "adam"}, {"beta1", cfg.train.adam_beta1}, {"beta2", cfg.train.adam_beta2},
                     {"eps", cfg.train.adam_eps}}},
      {"dataset", {{"provenance", data.dataset.provenance}, {"input_bits", data.encoder.output_width()},
                   {"train", data.encoded.train_y.size()}, {"val", data.encoded.val_y.size()},
                   {"test", data.encoded.test_y.size()}}},
      {"started", started},
      {"finished", timestamp()},
      {"epochs_run", res.epochs_run},
      {"steps", res.steps},
      {"refreshes", res.refreshes},
      {"budget_exhausted", res.budget_exhausted},
      {"gates", gate_count(circuit)},
      {"accuracy", acc},
      {"outputs", {{"checkpoint", "checkpoint.bin"}, {"netlist", "netlist.txt"}, {"encoder", "encoder.txt"},
                   {"config", "config.ini"}, {"metrics", "metrics.csv"}, {"curves", "curves.csv"}}},
  };
  if (!cfg.train.refresh_log.empty()) manifest["outputs"]["refresh_log"] = cfg.train.refresh_log;
  write_json(out / "manifest.json", manifest);
  std::cout << "trained " << res.epochs_run << " epochs, " << gate_count(circuit) << " gates";
  if (acc.contains("test")) std::cout << ", test accuracy " << acc["test"].get<double>();
  std::cout << '\n';
  return kOk;
}

// ---- data for prune/eval ---------------------------------------------------

struct DataArgs {
  std::string dataset, data_kind, config;
  std::vector<std::string> sets;
};

RunConfig data_config(RunConfig base, const DataArgs& a) {
  if (!a.config.empty()) base = load_config(a.config);
  auto overrides = parse_sets(a.sets);
  if (!a.dataset.empty()) overrides["data.path"] = a.dataset;
  if (!a.data_kind.empty()) overrides["data.kind"] = a.data_kind;
  apply_overrides(base, overrides);
  return base;
}

PreparedData load_split_data(const RunConfig& cfg, ThermometerEncoder encoder, Split split) {
  Dataset d = load_dataset(cfg);
  if (d.indices(split).empty()) throw IngestionError(std::string("split '") + split_name(split) + "' is empty");
  if (std::size_t(d.features.cols()) != encoder.num_features())
    throw IngestionError("dataset has " + std::to_string(d.features.cols()) + " features, encoder expects " +
                         std::to_string(encoder.num_features()));
  return prepare_data(std::move(d), std::move(encoder));
}

// ---- prune -----------------------------------------------------------------

struct PruneArgs {
  std::string checkpoint, passes = "trivial,logic-equiv", split = "val", out;
  PruneOptions options;
  DataArgs data;
};

int cmd_prune(const PruneArgs& a) {
  const std::string started = timestamp();
  const auto passes = parse_pass_list(a.passes);
  const Split split = parse_split(a.split);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const RunConfig cfg = data_config(ckpt.config, a.data);
  set_num_threads(cfg.train.threads);
  const PreparedData data = load_split_data(cfg, ckpt.encoder, split);
  const BitMatrix& x = split_inputs(data.encoded, split);
  const auto& y = split_labels(data.encoded, split);

  HardCircuit circuit = harden(ckpt.model);
  double acc = circuit_accuracy(circuit, x, y);
  std::vector<PruneReport> reports;
  for (const auto& pass : passes) {
    PruneResult r = run_prune_pass(pass, circuit, a.options, x);
    r.report.split = split_name(split);
    r.report.accuracy_before = acc;
    acc = circuit_accuracy(r.circuit, x, y);
    r.report.accuracy_after = acc;
    std::cout << pass << ": " << r.report.total_before() << " -> " << r.report.total_after() << " gates, "
              << split_name(split) << " accuracy " << *r.report.accuracy_before << " -> " << acc << '\n';
    reports.push_back(std::move(r.report));
    circuit = std::move(r.circuit);
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  save_netlist((out / "pruned_netlist.txt").string(), circuit);
  {
    auto csv = open_out(out / "prune_report.csv");
    write_prune_report_csv(csv, reports);
  }
  write_json(out / "prune_manifest.json",
             {{"command", "prune"},
              {"code_version", DBN_VERSION},
              {"checkpoint", fs::absolute(a.checkpoint).string()},
              {"passes", passes},
              {"greedy_threshold", a.options.greedy_threshold},
              {"similarity_threshold", a.options.similarity_threshold},
              {"split", split_name(split)},
              {"dataset", data.dataset.provenance},
              {"started", started},
              {"finished", timestamp()},
              {"outputs", {{"netlist", "pruned_netlist.txt"}, {"report", "prune_report.csv"}}}});
  return kOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, netlist, encoder, split = "test", confusion;
  DataArgs data;
};

int cmd_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.netlist.empty()) throw ConfigError("eval needs exactly one of --checkpoint or --netlist");
  const Split split = parse_split(a.split);
  HardCircuit circuit;
  ThermometerEncoder encoder;
  RunConfig base;
  if (!a.checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(a.checkpoint);
    circuit = harden(ckpt.model);
    encoder = std::move(ckpt.encoder);
    base = std::move(ckpt.config);
  } else {
    if (a.encoder.empty()) throw ConfigError("--netlist requires --encoder");
    circuit = load_netlist(a.netlist);
    encoder = load_encoder(a.encoder);
  }
  const RunConfig cfg = data_config(base, a.data);
  set_num_threads(cfg.train.threads);
  const PreparedData data = load_split_data(cfg, std::move(encoder), split);
  const BitMatrix& x = split_inputs(data.encoded, split);
  const auto& y = split_labels(data.encoded, split);
  if (x.signals() != circuit.input_width) throw IngestionError("encoder width does not match the circuit");

  const auto pred = predict_classes(eval_circuit(circuit, x), circuit.num_classes);
  const double acc = accuracy(pred, y);
  std::cout << split_name(split) << " accuracy " << std::setprecision(6) << acc << " on " << y.size() << " samples\n";
  if (!a.confusion.empty()) {
    const std::size_t K = circuit.num_classes;
    std::vector<std::size_t> m(K * K, 0);
    for (std::size_t i = 0; i < y.size(); ++i) ++m[std::size_t(y[i]) * K + std::size_t(pred[i])];
    auto out = open_out(a.confusion);
    out << "true";
    for (std::size_t k = 0; k < K; ++k) out << ",pred_" << k;
    out << '\n';
    for (std::size_t t = 0; t < K; ++t) {
      out << t;
      for (std::size_t k = 0; k < K; ++k) out << ',' << m[t * K + k];
      out << '\n';
    }
  }
  return kOk;
}

// ---- estimate-mem ----------------------------------------------------------

struct MemArgs {
  std::uint64_t gates = 12000, inputs = 30720, arity = 2, candidates = 8;
  bool csv = false;
};

std::string human_bytes(double b) {
  static constexpr const char* kUnits[] = {"B", "KB", "MB", "GB", "TB"};
  std::size_t u = 0;
  while (b >= 1000.0 && u + 1 < std::size(kUnits)) {
    b /= 1000.0;
    ++u;
  }
  std::ostringstream out;
  out << std::setprecision(4) << b << ' ' << kUnits[u];
  return out.str();
}

int cmd_estimate_mem(const MemArgs& a) {
  const auto m = estimate_interconnect_memory(a.gates, a.inputs, a.arity, a.candidates);
  if (a.csv) {
    std::cout << "G,I,k,C,bytes_full,bytes_sparse\n"
              << a.gates << ',' << a.inputs << ',' << a.arity << ',' << a.candidates << ',' << m.bytes_full << ','
              << m.bytes_sparse << '\n';
  } else {
    std::cout << "full interconnect:   " << human_bytes(double(m.bytes_full)) << " (" << m.bytes_full << " bytes)\n"
              << "sparse interconnect: " << human_bytes(double(m.bytes_sparse)) << " (" << m.bytes_sparse
              << " bytes)\n";
  }
  return kOk;
}

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--dataset", d.dataset, "Dataset directory (overrides the stored config)");
  cmd->add_option("--data-kind", d.data_kind, "mnist, cifar10 or synth");
  cmd->add_option("--config", d.config, "Config file describing the dataset");
  cmd->add_option("--set", d.sets, "Override section.key=value");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Boolean Network toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DBN_VERSION);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a network and write checkpoint, netlist and metrics");
  train_cmd->add_option("--config", ta.config, "INI config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--from-manifest", ta.manifest, "Re-run the configuration recorded in a manifest")
      ->check(CLI::ExistingFile)
      ->excludes("--config");
  train_cmd->add_option("--out", ta.out, "Output directory")->required();
  train_cmd->add_option("--dataset", ta.dataset, "Dataset directory");
  train_cmd->add_option("--data-kind", ta.data_kind, "mnist, cifar10 or synth");
  train_cmd->add_option("--seed", ta.seed, "Random seed");
  train_cmd->add_option("--threads", ta.threads, "Worker threads");
  train_cmd->add_option("--budget-seconds", ta.budget, "Stop after the epoch that crosses this wall-clock budget");
  train_cmd->add_option("--set", ta.sets, "Override section.key=value");

  PruneArgs pa;
  auto* prune_cmd = app.add_subcommand("prune", "Apply pruning passes to a trained checkpoint");
  prune_cmd->add_option("--checkpoint", pa.checkpoint, "Checkpoint file")->required();
  prune_cmd->add_option("--passes", pa.passes, "Comma-separated passes: trivial,logic-equiv,greedy,similarity")
      ->capture_default_str();
  prune_cmd->add_option("--greedy-threshold", pa.options.greedy_threshold, "Constant-frequency threshold")
      ->capture_default_str();
  prune_cmd->add_option("--similarity-threshold", pa.options.similarity_threshold, "Correlation threshold c")
      ->capture_default_str();
  prune_cmd->add_option("--cone-limit", pa.options.cone_limit, "Support limit for equivalence cones")
      ->capture_default_str();
  prune_cmd->add_option("--split", pa.split, "Profiling and reporting split")->capture_default_str();
  prune_cmd->add_option("--out", pa.out, "Output directory")->required();
  add_data_options(prune_cmd, pa.data);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and confusion matrix of a checkpoint or netlist");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--netlist", ea.netlist, "Netlist file");
  eval_cmd->add_option("--encoder", ea.encoder, "Encoder file (with --netlist)");
  eval_cmd->add_option("--split", ea.split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--confusion", ea.confusion, "Write the confusion matrix CSV here");
  add_data_options(eval_cmd, ea.data);

  MemArgs ma;
  auto* mem_cmd = app.add_subcommand("estimate-mem", "Interconnect memory, dense versus candidate sets");
  mem_cmd->add_option("-G,--gates", ma.gates)->capture_default_str();
  mem_cmd->add_option("-I,--inputs", ma.inputs)->capture_default_str();
  mem_cmd->add_option("-k,--arity", ma.arity)->capture_default_str();
  mem_cmd->add_option("-C,--candidates", ma.candidates)->capture_default_str();
  mem_cmd->add_flag("--csv", ma.csv, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*prune_cmd) return cmd_prune(pa);
    if (*eval_cmd) return cmd_eval(ea);
    if (*mem_cmd) return cmd_estimate_mem(ma);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << '\n';
    return kIngestion;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
