#include "dbn/interconnect.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "dbn/errors.hpp"

namespace dbn {

const char* sampling_mode_name(SamplingMode m) {
  switch (m) {
    case SamplingMode::kRandom: return "random";
    case SamplingMode::kGradientGuided: return "gradient_guided";
    case SamplingMode::kNone: return "none";
  }
  return "?";
}

SamplingMode parse_sampling_mode(const std::string& name) {
  if (name == "random") return SamplingMode::kRandom;
  if (name == "gradient_guided" || name == "gradient-guided") return SamplingMode::kGradientGuided;
  if (name == "none") return SamplingMode::kNone;
  throw ConfigError("unknown sampling mode '" + name + "'");
}

double connection_gradient(const BitMatrix& x, std::size_t input, std::span<const double> dy) {
  double ones = 0.0, total = 0.0;
  for (double v : dy) total += v;
  auto col = x.column(input);
  for (std::size_t w = 0; w < col.size(); ++w) {
    Word bits = col[w];
    while (bits) {
      ones += dy[w * kWordBits + std::size_t(std::countr_zero(bits))];
      bits &= bits - 1;
    }
  }
  return 2.0 * ones - total;
}

std::vector<std::uint32_t> sample_random(std::size_t count, std::size_t fan_in, std::span<const std::int32_t> exclude,
                                         std::mt19937_64& rng) {
  std::vector<std::int32_t> banned(exclude.begin(), exclude.end());
  std::sort(banned.begin(), banned.end());
  banned.erase(std::unique(banned.begin(), banned.end()), banned.end());
  for (auto b : banned)
    if (b < 0 || std::size_t(b) >= fan_in) throw StructuralError("sample_random: excluded index out of range");
  const std::size_t pool = fan_in - banned.size();
  if (pool < count)
    throw StructuralError("sample_random: only " + std::to_string(pool) + " eligible inputs for " +
                          std::to_string(count) + " draws");
  auto ranks = sample_distinct(count, pool, rng);
  // Rank r maps to the r-th value of [0, I) not in `banned`.
  for (auto& r : ranks) {
    std::uint32_t v = r;
    for (auto b : banned) {
      if (std::uint32_t(b) <= v) ++v;
      else break;
    }
    r = v;
  }
  return ranks;
}

std::vector<std::uint32_t> sample_gradient_guided(std::size_t count, const BitMatrix& x, std::span<const double> dy,
                                                  std::span<const std::int32_t> exclude) {
  if (dy.size() != x.samples()) throw UsageError("sample_gradient_guided: batch context has mismatched sizes");
  const std::size_t fan_in = x.signals();
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < exclude.size(); ++i)
    if (std::find(exclude.begin(), exclude.begin() + std::ptrdiff_t(i), exclude[i]) == exclude.begin() + std::ptrdiff_t(i))
      excluded += exclude[i] >= 0 && std::size_t(exclude[i]) < fan_in;
  if (fan_in - excluded < count)
    throw StructuralError("sample_gradient_guided: not enough eligible inputs");
  if (count == 0) return {};

  // Running best set, ascending by (gradient, index).
  struct Entry {
    double grad;
    std::uint32_t index;
  };
  std::vector<Entry> best;
  best.reserve(count + 1);
  double total = 0.0;
  for (double v : dy) total += v;
  for (std::size_t i = 0; i < fan_in; ++i) {
    if (std::find(exclude.begin(), exclude.end(), std::int32_t(i)) != exclude.end()) continue;
    double ones = 0.0;
    auto col = x.column(i);
    for (std::size_t w = 0; w < col.size(); ++w) {
      Word bits = col[w];
      while (bits) {
        ones += dy[w * kWordBits + std::size_t(std::countr_zero(bits))];
        bits &= bits - 1;
      }
    }
    const double g = 2.0 * ones - total;
    // Indices arrive in increasing order, so strict < keeps the earlier index on ties.
    if (best.size() == count && !(g < best.back().grad)) continue;
    auto pos = std::upper_bound(best.begin(), best.end(), g, [](double v, const Entry& e) { return v < e.grad; });
    best.insert(pos, Entry{g, std::uint32_t(i)});
    if (best.size() > count) best.pop_back();
  }
  std::vector<std::uint32_t> out;
  out.reserve(count);
  for (const auto& e : best) out.push_back(e.index);
  return out;
}

RefreshEvent refresh_candidates(LayerParams& layer, SamplingMode mode, std::size_t replace, const BatchContext& batch,
                                std::mt19937_64& rng, std::size_t layer_index, std::uint64_t step) {
  RefreshEvent event;
  event.layer = layer_index;
  event.step = step;
  const std::size_t C = layer.candidates_per_slot();
  if (replace == 0 || mode == SamplingMode::kNone) return event;
  if (layer.frozen_interconnect) throw UsageError("refresh_candidates: layer interconnect is frozen");
  if (replace > C) throw ConfigError("refresh_candidates: R exceeds C");
  if (layer.fan_in_width - (C - replace) < replace)
    throw StructuralError("refresh_candidates: fan-in too small to draw " + std::to_string(replace) + " fresh inputs");
  if (mode == SamplingMode::kGradientGuided && (batch.inputs == nullptr || batch.dy == nullptr))
    throw UsageError("gradient-guided sampling needs the last batch context");

  std::vector<std::uint32_t> order(C);
  std::vector<std::int32_t> kept;
  kept.reserve(C);
  event.slots.reserve(layer.gates() * kArity);
  for (std::size_t g = 0; g < layer.gates(); ++g)
    for (int j = 0; j < kArity; ++j) {
      const Eigen::Index row = LayerParams::slot_row(g, j);
      auto weights = layer.conn_weights.row(row);
      std::iota(order.begin(), order.end(), 0U);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return weights(a) < weights(b); });
      kept.clear();
      double w_floor = weights(order[0]);
      for (std::size_t k = replace; k < C; ++k) {
        kept.push_back(layer.candidates(row, order[k]));
        w_floor = k == replace ? weights(order[k]) : std::min(w_floor, weights(order[k]));
      }
      std::vector<std::uint32_t> fresh;
      if (mode == SamplingMode::kRandom) {
        fresh = sample_random(replace, layer.fan_in_width, kept, rng);
      } else {
        const auto& dy = *batch.dy;
        fresh = sample_gradient_guided(replace, *batch.inputs,
                                       std::span<const double>(dy.row(row).data(), std::size_t(dy.cols())), kept);
      }
      SlotRefresh sr;
      sr.gate = std::uint32_t(g);
      sr.slot = std::uint8_t(j);
      sr.w_floor = w_floor;
      for (std::size_t r = 0; r < replace; ++r) {
        const auto pos = order[r];
        sr.replaced.push_back({pos, layer.candidates(row, pos), std::int32_t(fresh[r])});
        layer.candidates(row, pos) = std::int32_t(fresh[r]);
        layer.conn_weights(row, pos) = w_floor;
      }
      event.slots.push_back(std::move(sr));
    }
  return event;
}

void write_refresh_event(std::ostream& out, const RefreshEvent& event) {
  nlohmann::json j;
  j["layer"] = event.layer;
  j["step"] = event.step;
  auto& slots = j["slots"] = nlohmann::json::array();
  for (const auto& s : event.slots) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& r : s.replaced) pairs.push_back({r.old_index, r.new_index});
    slots.push_back({{"gate", s.gate}, {"slot", s.slot}, {"w_floor", s.w_floor}, {"replaced", pairs}});
  }
  out << j.dump() << '\n';
}

}  // namespace dbn
