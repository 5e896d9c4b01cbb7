#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "dbn/dataset.hpp"
#include "dbn/encoding.hpp"
#include "dbn/training.hpp"

namespace dbn {

// Where training data comes from.
struct DataSource {
  std::string kind = "mnist";  // mnist | cifar10 | synth
  std::string path;            // directory; resolved against $DBN_DATA_DIR
  std::string synth_task = "parity-of-subset";
  std::size_t synth_features = 16;
  std::size_t synth_samples = 2000;
};

struct RunConfig {
  TrainConfig train;
  DataSource data;
};

/// INI text with sections [network] [interconnect] [training] [data] [run].
/// Unknown sections or keys raise one ConfigError naming all of them.
/// When `candidates` is given without `replace`, R defaults to C/2.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

// Apply "section.key=value" overrides with the same checks as the file.
void apply_overrides(RunConfig& config, const std::map<std::string, std::string>& overrides);

void write_config(std::ostream& out, const RunConfig& config);
std::string config_to_string(const RunConfig& config);

/// Dataset named by the config, validation carved with the run seed.
Dataset load_dataset(const RunConfig& config);

/// Thermometer encoder fitted on the train split, or one 0.5 threshold per
/// feature for binary data.
ThermometerEncoder make_encoder(const Dataset& data, std::size_t thresholds);

}  // namespace dbn
