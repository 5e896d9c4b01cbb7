#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dbn/bit_matrix.hpp"
#include "dbn/dataset.hpp"
#include "dbn/interconnect.hpp"
#include "dbn/model.hpp"

namespace dbn {

enum class InterconnectMode : std::uint8_t { kFixed, kLearnable };

const char* interconnect_mode_name(InterconnectMode m);
InterconnectMode parse_interconnect_mode(const std::string& name);

struct TrainConfig {
  // network
  std::vector<std::size_t> layer_sizes{12000, 12000, 12000};
  double tau = 30.0;
  double gate_init_std = 1.0;
  // interconnect
  std::size_t candidates = 8;  // C
  std::size_t replace = 4;     // R
  std::size_t beta = 20;       // refresh interval in steps
  InterconnectMode interconnect_mode = InterconnectMode::kLearnable;
  SamplingMode sampling = SamplingMode::kRandom;
  std::size_t layers_to_learn = 1;  // L
  // optimisation
  std::size_t batch_size = 100;
  double lr_init = 1e-2;
  double lr_final = 1e-5;
  std::size_t interconnect_epochs = 2000;  // split evenly over the L layers
  std::size_t finetune_epochs = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // data
  std::size_t thresholds = 10;
  std::size_t val_size = 5000;
  // run
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double budget_seconds = 0.0;  // 0 = unlimited
  std::string refresh_log;      // optional NDJSON audit file

  std::size_t total_epochs() const;
};

// ConfigError on out-of-range values.
void validate(const TrainConfig& config);

struct Phase {
  std::string name;
  int active_layer = -1;  // layer whose interconnect phase this is; -1 = fine-tune
  std::size_t epochs = 0;
};

/// L interconnect phases of floor(interconnect_epochs / L) epochs each, then
/// one fine-tune phase. Phases with zero epochs are dropped.
std::vector<Phase> schedule_phases(const TrainConfig& config);

/// Cosine decay from lr_init at step 0 to lr_final at step `phase_steps`.
double cosine_lr(double lr_init, double lr_final, std::size_t step, std::size_t phase_steps);

/// Activations of every layer from the hard forward pass.
struct ForwardCache {
  BitMatrix inputs;
  HardCircuit circuit;
  std::vector<BitMatrix> activations;
  Eigen::MatrixXd logits;  // samples x classes

  bool empty() const { return activations.empty(); }
};

ForwardCache forward_hard(const NetworkModel& model, const BitMatrix& inputs);

struct BatchGradients {
  std::vector<GateLogits> d_logits;  // per layer, G x 16
  std::vector<SlotMatrix> d_conn;    // per layer, (G*k) x C
  std::vector<SlotMatrix> dy;        // per layer, (G*k) x B, upstream gradient at each input slot
  double loss = 0.0;                 // mean softmax cross-entropy
};

/// Surrogate gradients for one batch.
///
/// Each gate is treated as the mixture y = sum_f softmax(logits)_f f(a, b)
/// evaluated at its realised binary inputs. Connection weights receive
/// sum_b (2 x[b, candidate] - 1) dy[b, g, j]. Gradients flow to the previous
/// layer through the selected input, or through softmax(conn_weights) over
/// the candidates while the layer's interconnect is learnable.
BatchGradients backward(const NetworkModel& model, const ForwardCache& cache, std::span<const int> labels);

/// Adam moments for every trainable tensor.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<GateLogits> m_logits, v_logits;
  std::vector<SlotMatrix> m_conn, v_conn;

  static AdamState zeros_like(const NetworkModel& model);
};

struct AdamParams {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Updates only tensors whose layer is not frozen for them.
void adam_step(NetworkModel& model, AdamState& state, const BatchGradients& grads, const AdamParams& params);

struct EncodedData {
  BitMatrix train_x, val_x, test_x;
  std::vector<int> train_y, val_y, test_y;
};

EncodedData encode_dataset(const ThermometerEncoder& encoder, const Dataset& data);

struct MetricRow {
  std::size_t epoch = 0;
  Split split = Split::kTrain;
  double accuracy = 0.0;
  double loss = 0.0;
  double wall_clock_s = 0.0;
  std::string phase;
};

struct TrainResult {
  std::vector<MetricRow> metrics;
  std::size_t epochs_run = 0;
  std::uint64_t steps = 0;
  std::size_t refreshes = 0;
  bool budget_exhausted = false;
};

struct TrainHooks {
  std::function<void(const MetricRow&)> on_metric;
  std::ostream* refresh_log = nullptr;
};

/// Layer-wise schedule. During the phase of layer l only that layer's
/// interconnect is unfrozen (in learnable mode) and every gate that has not
/// finished its phase trains; afterwards the layer's gates and interconnect
/// freeze. The fine-tune phase trains all gates with every interconnect
/// fixed. The learning rate restarts its cosine decay at each phase, and
/// every beta steps of an interconnect phase the active layer is refreshed.
TrainResult train(NetworkModel& model, AdamState& optimizer, const EncodedData& data, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Mean loss and accuracy of the hard forward pass on one split.
std::pair<double, double> evaluate_model(const NetworkModel& model, const BitMatrix& x, std::span<const int> y);

void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows);
/// Wide per-epoch table: epoch,time,train_mean,val_mean,test_mean.
void write_curves_csv(std::ostream& out, std::span<const MetricRow> rows);

}  // namespace dbn
