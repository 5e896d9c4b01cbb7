// Random models and the soft surrogate loss used for finite differences.
#pragma once

#include <array>
#include <cmath>
#include <random>

#include "dbn/training.hpp"
#include "oracles.hpp"

namespace oracle {

using namespace dbn;

inline NetworkModel random_model(std::mt19937_64& rng, std::size_t inputs, std::vector<std::size_t> sizes,
                                 std::size_t classes, std::size_t C, double tau = 1.0) {
  auto m = init_model({inputs, std::move(sizes), classes, tau, C, 1.0}, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& l : m.layers)
    for (Eigen::Index i = 0; i < l.conn_weights.size(); ++i) l.conn_weights.data()[i] = n(rng);
  return m;
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, std::size_t classes) {
  std::uniform_int_distribution<int> u(0, int(classes) - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = u(rng);
  return y;
}

// Soft surrogate of the whole network. Every gate outputs
//   y = hard + M(z, a, b) - M(z0, a_hard, b_hard)
// where M is the mixture's multilinear extension, z the (perturbed) logits
// and z0 the logits at which the hard pass was taken. At z = z0 the outputs
// equal the hard circuit, and the derivative in z is that of M.
struct Surrogate {
  const NetworkModel& base;
  oracle::Bits inputs;
  std::vector<int> labels;
  HardCircuit hard;
  std::vector<oracle::Bits> hard_acts;

  Surrogate(const NetworkModel& m, const oracle::Bits& x, std::vector<int> y)
      : base(m), inputs(x), labels(std::move(y)), hard(harden(m)), hard_acts(oracle::interpret_layers(hard, x)) {}

  static std::array<double, 16> softmax(const GateLogits& z, Eigen::Index g) {
    std::array<double, 16> p{};
    double mx = -1e300, sum = 0.0;
    for (int f = 0; f < 16; ++f) mx = std::max(mx, z(g, f));
    for (int f = 0; f < 16; ++f) sum += (p[std::size_t(f)] = std::exp(z(g, f) - mx));
    for (auto& v : p) v /= sum;
    return p;
  }

  static double mixture(const std::array<double, 16>& p, double a, double b) {
    double y = 0.0;
    for (int f = 0; f < 16; ++f) {
      const double ext = oracle::gate(f, 0, 0) * (1 - a) * (1 - b) + oracle::gate(f, 0, 1) * (1 - a) * b +
                         oracle::gate(f, 1, 0) * a * (1 - b) + oracle::gate(f, 1, 1) * a * b;
      y += p[std::size_t(f)] * ext;
    }
    return y;
  }

  double loss(const std::vector<GateLogits>& z) const {
    double total = 0.0;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      std::vector<double> prev(inputs[s].begin(), inputs[s].end());
      for (std::size_t l = 0; l < hard.layers.size(); ++l) {
        const auto& gates = hard.layers[l];
        const std::vector<int>& hprev = l == 0 ? inputs[s] : hard_acts[l - 1][s];
        std::vector<double> cur(gates.size());
        for (std::size_t g = 0; g < gates.size(); ++g) {
          const auto gi = Eigen::Index(g);
          const double a = prev[gates[g].in0], b = prev[gates[g].in1];
          const double ah = hprev[gates[g].in0], bh = hprev[gates[g].in1];
          const double y0 = mixture(softmax(base.layers[l].gate_logits, gi), ah, bh);
          cur[g] = hard_acts[l][s][g] + mixture(softmax(z[l], gi), a, b) - y0;
        }
        prev = std::move(cur);
      }
      const std::size_t K = base.num_classes, group = prev.size() / K;
      std::vector<double> logit(K, 0.0);
      for (std::size_t g = 0; g < prev.size(); ++g) logit[g / group] += prev[g] / base.group_tau;
      double mx = -1e300;
      for (double v : logit) mx = std::max(mx, v);
      double z_sum = 0.0;
      for (double v : logit) z_sum += std::exp(v - mx);
      total += -(logit[std::size_t(labels[s])] - mx - std::log(z_sum));
    }
    return total / double(inputs.size());
  }
};

}  // namespace oracle
