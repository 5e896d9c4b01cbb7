#include "dbn/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "dbn/errors.hpp"
#include "dbn/parallel.hpp"

namespace dbn {

const char* interconnect_mode_name(InterconnectMode m) { return m == InterconnectMode::kFixed ? "fixed" : "learnable"; }

InterconnectMode parse_interconnect_mode(const std::string& name) {
  if (name == "fixed") return InterconnectMode::kFixed;
  if (name == "learnable") return InterconnectMode::kLearnable;
  throw ConfigError("unknown interconnect mode '" + name + "'");
}

std::size_t TrainConfig::total_epochs() const {
  std::size_t n = 0;
  for (const auto& p : schedule_phases(*this)) n += p.epochs;
  return n;
}

void validate(const TrainConfig& c) {
  std::vector<std::string> bad;
  if (c.layer_sizes.empty()) bad.emplace_back("network.layer_sizes must list at least one layer");
  for (auto g : c.layer_sizes)
    if (g == 0) bad.emplace_back("network.layer_sizes entries must be positive");
  if (!(c.tau > 0.0)) bad.emplace_back("network.tau must be positive");
  if (!(c.gate_init_std >= 0.0)) bad.emplace_back("network.gate_init_std must be non-negative");
  if (c.candidates == 0) bad.emplace_back("interconnect.C must be positive");
  if (c.replace == 0 || c.replace > c.candidates) bad.emplace_back("interconnect.R must satisfy 0 < R <= C");
  if (c.beta == 0) bad.emplace_back("interconnect.beta must be >= 1");
  if (c.layers_to_learn > c.layer_sizes.size())
    bad.emplace_back("interconnect.layers_to_learn exceeds the number of layers");
  if (c.batch_size == 0) bad.emplace_back("training.batch_size must be positive");
  if (!(c.lr_final > 0.0 && c.lr_final <= c.lr_init)) bad.emplace_back("training learning rates need 0 < lr_final <= lr_init");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0 && c.adam_eps > 0.0))
    bad.emplace_back("training.adam_* out of range");
  if (c.thresholds == 0) bad.emplace_back("data.thresholds must be positive");
  if (c.threads == 0) bad.emplace_back("run.threads must be positive");
  if (c.budget_seconds < 0.0) bad.emplace_back("run.budget_seconds must be non-negative");
  if (!bad.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
}

std::vector<Phase> schedule_phases(const TrainConfig& config) {
  std::vector<Phase> phases;
  const std::size_t L = config.layers_to_learn;
  if (L > 0) {
    const std::size_t per_layer = config.interconnect_epochs / L;
    for (std::size_t l = 0; l < L && per_layer > 0; ++l)
      phases.push_back({"interconnect-" + std::to_string(l), int(l), per_layer});
  }
  if (config.finetune_epochs > 0) phases.push_back({"finetune", -1, config.finetune_epochs});
  return phases;
}

double cosine_lr(double lr_init, double lr_final, std::size_t step, std::size_t phase_steps) {
  if (phase_steps == 0) return lr_init;
  const double t = std::min(1.0, double(step) / double(phase_steps));
  return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(M_PI * t));
}

ForwardCache forward_hard(const NetworkModel& model, const BitMatrix& inputs) {
  if (inputs.signals() != model.input_width)
    throw StructuralError("forward_hard: input has " + std::to_string(inputs.signals()) + " signals, model expects " +
                          std::to_string(model.input_width));
  ForwardCache cache;
  cache.circuit = harden(model);
  cache.activations = eval_circuit_layers(cache.circuit, inputs);
  cache.logits = group_logits<double>(cache.activations.back(), model.num_classes, model.group_tau);
  cache.inputs = inputs;
  return cache;
}

namespace {

using Probs = std::array<double, GateTruthTable::kCount>;

Probs softmax16(const GateLogits& logits, Eigen::Index g) {
  Probs p{};
  const double mx = logits.row(g).maxCoeff();
  double sum = 0.0;
  for (int f = 0; f < GateTruthTable::kCount; ++f) sum += (p[std::size_t(f)] = std::exp(logits(g, f) - mx));
  for (auto& v : p) v /= sum;
  return p;
}

// Probability of output 1 for each input combination 2a+b under the mixture.
std::array<double, 4> soft_table(const Probs& p) {
  std::array<double, 4> s{};
  for (int f = 0; f < GateTruthTable::kCount; ++f)
    for (int combo = 0; combo < 4; ++combo)
      if ((f >> combo) & 1) s[std::size_t(combo)] += p[std::size_t(f)];
  return s;
}

bool layer_trainable(const LayerParams& l) { return !l.frozen_gates || !l.frozen_interconnect; }

}  // namespace

BatchGradients backward(const NetworkModel& model, const ForwardCache& cache, std::span<const int> labels) {
  if (cache.empty()) throw UsageError("backward called without a forward cache");
  const std::size_t L = model.layers.size();
  if (cache.activations.size() != L || cache.circuit.layers.size() != L)
    throw UsageError("forward cache does not belong to this model");
  const std::size_t B = cache.inputs.samples();
  if (labels.size() != B) throw StructuralError("backward: label count does not match batch size");
  const auto K = Eigen::Index(model.num_classes);

  BatchGradients grads;
  grads.d_logits.resize(L);
  grads.d_conn.resize(L);
  grads.dy.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = model.layers[l];
    grads.d_logits[l] = GateLogits::Zero(Eigen::Index(layer.gates()), GateTruthTable::kCount);
    grads.d_conn[l] = SlotMatrix::Zero(layer.conn_weights.rows(), layer.conn_weights.cols());
    grads.dy[l] = SlotMatrix::Zero(layer.conn_weights.rows(), Eigen::Index(B));
  }

  // Softmax cross-entropy on the group logits, mean over the batch.
  Eigen::MatrixXd dlogit(static_cast<Eigen::Index>(B), K);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < Eigen::Index(B); ++b) {
    const double mx = cache.logits.row(b).maxCoeff();
    Eigen::RowVectorXd e = (cache.logits.row(b).array() - mx).exp();
    const double z = e.sum();
    const int y = labels[std::size_t(b)];
    if (y < 0 || y >= K) throw StructuralError("backward: label out of range");
    loss += -(cache.logits(b, y) - mx - std::log(z));
    dlogit.row(b) = e / z;
    dlogit(b, y) -= 1.0;
  }
  dlogit /= double(B);
  grads.loss = loss / double(B);

  // Upstream gradient at every output of the current layer, gates x samples.
  const std::size_t group = model.output_width() / model.num_classes;
  SlotMatrix d_out(static_cast<Eigen::Index>(model.output_width()), static_cast<Eigen::Index>(B));
  for (std::size_t g = 0; g < model.output_width(); ++g)
    d_out.row(Eigen::Index(g)) = dlogit.col(Eigen::Index(g / group)).transpose() / model.group_tau;

  for (std::size_t li = L; li-- > 0;) {
    const LayerParams& layer = model.layers[li];
    const BitMatrix& x = li == 0 ? cache.inputs : cache.activations[li - 1];
    const auto& gates = cache.circuit.layers[li];
    SlotMatrix& dy = grads.dy[li];
    GateLogits& dlog = grads.d_logits[li];
    SlotMatrix& dconn = grads.d_conn[li];

    parallel_for(layer.gates(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t g = begin; g < end; ++g) {
        const auto gi = Eigen::Index(g);
        const Probs p = softmax16(layer.gate_logits, gi);
        const auto s = soft_table(p);
        const auto a_col = x.column(gates[g].in0);
        const auto b_col = x.column(gates[g].in1);
        std::array<double, 4> mass{};
        auto dy_a = dy.row(LayerParams::slot_row(g, 0));
        auto dy_b = dy.row(LayerParams::slot_row(g, 1));
        for (std::size_t b = 0; b < B; ++b) {
          const int a = int((a_col[b / kWordBits] >> (b % kWordBits)) & 1U);
          const int c = int((b_col[b / kWordBits] >> (b % kWordBits)) & 1U);
          const double d = d_out(gi, Eigen::Index(b));
          mass[std::size_t(2 * a + c)] += d;
          dy_a(Eigen::Index(b)) = d * (s[std::size_t(2 + c)] - s[std::size_t(c)]);
          dy_b(Eigen::Index(b)) = d * (s[std::size_t(2 * a + 1)] - s[std::size_t(2 * a)]);
        }
        if (!layer.frozen_gates) {
          for (int f = 0; f < GateTruthTable::kCount; ++f) {
            double acc = 0.0;
            for (int combo = 0; combo < 4; ++combo)
              acc += mass[std::size_t(combo)] * (double((f >> combo) & 1) - s[std::size_t(combo)]);
            dlog(gi, f) = p[std::size_t(f)] * acc;
          }
        }
        if (!layer.frozen_interconnect) {
          for (int j = 0; j < kArity; ++j) {
            const auto row = LayerParams::slot_row(g, j);
            const std::span<const double> dyr(dy.row(row).data(), B);
            for (Eigen::Index c = 0; c < dconn.cols(); ++c)
              dconn(row, c) = connection_gradient(x, std::size_t(layer.candidates(row, c)), dyr);
          }
        }
      }
    });

    if (li == 0) break;
    bool below_trainable = false;
    for (std::size_t k = 0; k < li; ++k) below_trainable |= layer_trainable(model.layers[k]);
    if (!below_trainable) break;

    SlotMatrix d_prev = SlotMatrix::Zero(Eigen::Index(layer.fan_in_width), Eigen::Index(B));
    for (std::size_t g = 0; g < layer.gates(); ++g)
      for (int j = 0; j < kArity; ++j) {
        const auto row = LayerParams::slot_row(g, j);
        if (layer.frozen_interconnect) {
          d_prev.row(Eigen::Index(j == 0 ? gates[g].in0 : gates[g].in1)) += dy.row(row);
        } else {
          const Eigen::RowVectorXd w = layer.conn_weights.row(row);
          const Eigen::RowVectorXd e = (w.array() - w.maxCoeff()).exp();
          const Eigen::RowVectorXd sm = e / e.sum();
          for (Eigen::Index c = 0; c < sm.size(); ++c) d_prev.row(layer.candidates(row, c)) += sm(c) * dy.row(row);
        }
      }
    d_out = std::move(d_prev);
  }
  return grads;
}

AdamState AdamState::zeros_like(const NetworkModel& model) {
  AdamState s;
  for (const auto& l : model.layers) {
    s.m_logits.push_back(GateLogits::Zero(l.gate_logits.rows(), GateTruthTable::kCount));
    s.v_logits.push_back(GateLogits::Zero(l.gate_logits.rows(), GateTruthTable::kCount));
    s.m_conn.push_back(SlotMatrix::Zero(l.conn_weights.rows(), l.conn_weights.cols()));
    s.v_conn.push_back(SlotMatrix::Zero(l.conn_weights.rows(), l.conn_weights.cols()));
  }
  return s;
}

namespace {

template <typename Param, typename Grad>
void adam_update(Param& p, Param& m, Param& v, const Grad& g, const AdamParams& a, double bc1, double bc2) {
  m = a.beta1 * m + (1.0 - a.beta1) * g;
  v = a.beta2 * v + (1.0 - a.beta2) * g.cwiseAbs2();
  p.array() -= a.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + a.eps);
}

}  // namespace

void adam_step(NetworkModel& model, AdamState& state, const BatchGradients& grads, const AdamParams& params) {
  if (state.m_logits.size() != model.layers.size() || grads.d_logits.size() != model.layers.size())
    throw UsageError("adam_step: optimizer state or gradients do not match the model");
  ++state.step;
  const double bc1 = 1.0 - std::pow(params.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(params.beta2, double(state.step));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    if (!layer.frozen_gates)
      adam_update(layer.gate_logits, state.m_logits[l], state.v_logits[l], grads.d_logits[l], params, bc1, bc2);
    if (!layer.frozen_interconnect)
      adam_update(layer.conn_weights, state.m_conn[l], state.v_conn[l], grads.d_conn[l], params, bc1, bc2);
  }
}

EncodedData encode_dataset(const ThermometerEncoder& encoder, const Dataset& data) {
  EncodedData e;
  e.train_x = encode(encoder, data.features_of(Split::kTrain));
  e.val_x = encode(encoder, data.features_of(Split::kVal));
  e.test_x = encode(encoder, data.features_of(Split::kTest));
  e.train_y = data.labels_of(Split::kTrain);
  e.val_y = data.labels_of(Split::kVal);
  e.test_y = data.labels_of(Split::kTest);
  return e;
}

std::pair<double, double> evaluate_model(const NetworkModel& model, const BitMatrix& x, std::span<const int> y) {
  if (x.samples() == 0) return {0.0, 0.0};
  const auto cache = forward_hard(model, x);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < cache.logits.rows(); ++b) {
    const double mx = cache.logits.row(b).maxCoeff();
    loss += mx + std::log((cache.logits.row(b).array() - mx).exp().sum()) - cache.logits(b, y[std::size_t(b)]);
  }
  const auto pred = predict_classes(cache.activations.back(), model.num_classes);
  return {loss / double(x.samples()), accuracy(pred, y)};
}

namespace {

void set_phase_flags(NetworkModel& model, const Phase& phase, InterconnectMode mode) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    layer.frozen_interconnect = !(mode == InterconnectMode::kLearnable && int(l) == phase.active_layer);
    layer.frozen_gates = phase.active_layer >= 0 && int(l) < phase.active_layer;
  }
}

void reset_moments(AdamState& state, const RefreshEvent& ev) {
  for (const auto& s : ev.slots) {
    const auto row = LayerParams::slot_row(s.gate, s.slot);
    for (const auto& r : s.replaced) {
      state.m_conn[ev.layer](row, r.position) = 0.0;
      state.v_conn[ev.layer](row, r.position) = 0.0;
    }
  }
}

}  // namespace

TrainResult train(NetworkModel& model, AdamState& optimizer, const EncodedData& data, const TrainConfig& config,
                  const TrainHooks& hooks) {
  validate(config);
  validate(model);
  if (config.layers_to_learn > model.layers.size())
    throw ConfigError("layers_to_learn exceeds the model's layer count");
  if (data.train_x.signals() != model.input_width) throw StructuralError("train: encoded width does not match model");
  if (optimizer.m_logits.size() != model.layers.size()) optimizer = AdamState::zeros_like(model);

  TrainResult result;
  const auto phases = schedule_phases(config);
  const std::size_t n = data.train_x.samples();
  if (n == 0) throw StructuralError("train: empty training split");
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  const auto emit = [&](MetricRow row) {
    if (hooks.on_metric) hooks.on_metric(row);
    result.metrics.push_back(std::move(row));
  };

  AdamParams adam{config.lr_init, config.adam_beta1, config.adam_beta2, config.adam_eps};
  for (const Phase& phase : phases) {
    set_phase_flags(model, phase, config.interconnect_mode);
    const bool refreshing = phase.active_layer >= 0 && config.interconnect_mode == InterconnectMode::kLearnable &&
                            config.sampling != SamplingMode::kNone;
    const std::size_t phase_steps = phase.epochs * steps_per_epoch;
    std::size_t phase_step = 0;
    for (std::size_t e = 0; e < phase.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t correct = 0;
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t stop = std::min(n, start + config.batch_size);
        const std::span<const std::size_t> rows(order.data() + start, stop - start);
        BitMatrix bx = data.train_x.gather_samples(rows);
        std::vector<int> by(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) by[r] = data.train_y[rows[r]];

        const ForwardCache cache = forward_hard(model, bx);
        const BatchGradients grads = backward(model, cache, by);
        const auto pred = predict_classes(cache.activations.back(), model.num_classes);
        for (std::size_t r = 0; r < rows.size(); ++r) correct += pred[r] == by[r];
        loss_sum += grads.loss * double(rows.size());

        adam.lr = cosine_lr(config.lr_init, config.lr_final, phase_step++, phase_steps);
        adam_step(model, optimizer, grads, adam);
        ++result.steps;

        if (refreshing && result.steps % config.beta == 0) {
          const auto a = std::size_t(phase.active_layer);
          const BatchContext ctx{a == 0 ? &cache.inputs : &cache.activations[a - 1], &grads.dy[a]};
          const RefreshEvent ev = refresh_candidates(model.layers[a], config.sampling, config.replace, ctx, rng, a,
                                                     result.steps);
          reset_moments(optimizer, ev);
          ++result.refreshes;
          if (hooks.refresh_log) write_refresh_event(*hooks.refresh_log, ev);
        }
      }
      ++result.epochs_run;
      const double wall = elapsed();
      emit({result.epochs_run, Split::kTrain, double(correct) / double(n), loss_sum / double(n), wall, phase.name});
      if (data.val_x.samples() > 0) {
        const auto [l, acc] = evaluate_model(model, data.val_x, data.val_y);
        emit({result.epochs_run, Split::kVal, acc, l, wall, phase.name});
      }
      if (data.test_x.samples() > 0) {
        const auto [l, acc] = evaluate_model(model, data.test_x, data.test_y);
        emit({result.epochs_run, Split::kTest, acc, l, wall, phase.name});
      }
      if (config.budget_seconds > 0.0 && elapsed() >= config.budget_seconds) {
        result.budget_exhausted = true;
        return result;
      }
    }
  }
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows) {
  out << "epoch,split,accuracy,loss,wall_clock_s,phase\n";
  for (const auto& r : rows)
    out << r.epoch << ',' << split_name(r.split) << ',' << r.accuracy << ',' << r.loss << ',' << r.wall_clock_s << ','
        << r.phase << '\n';
}

void write_curves_csv(std::ostream& out, std::span<const MetricRow> rows) {
  struct Line {
    double time = 0, train = 0, val = 0, test = 0;
  };
  std::map<std::size_t, Line> by_epoch;
  for (const auto& r : rows) {
    auto& line = by_epoch[r.epoch];
    line.time = r.wall_clock_s;
    (r.split == Split::kTrain ? line.train : r.split == Split::kVal ? line.val : line.test) = r.accuracy;
  }
  out << "epoch,time,train_mean,val_mean,test_mean\n";
  for (const auto& [epoch, l] : by_epoch)
    out << epoch << ',' << l.time << ',' << l.train << ',' << l.val << ',' << l.test << '\n';
}

}  // namespace dbn
