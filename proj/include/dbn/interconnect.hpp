#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dbn/bit_matrix.hpp"
#include "dbn/model.hpp"

namespace dbn {

enum class SamplingMode : std::uint8_t { kRandom, kGradientGuided, kNone };

const char* sampling_mode_name(SamplingMode m);
SamplingMode parse_sampling_mode(const std::string& name);

struct CandidateReplacement {
  std::uint32_t position = 0;  // column within the slot's candidate row
  std::int32_t old_index = 0;
  std::int32_t new_index = 0;
};

struct SlotRefresh {
  std::uint32_t gate = 0;
  std::uint8_t slot = 0;
  double w_floor = 0.0;
  std::vector<CandidateReplacement> replaced;
};

struct RefreshEvent {
  std::size_t layer = 0;
  std::uint64_t step = 0;
  std::vector<SlotRefresh> slots;
};

/// Most recent mini-batch seen by a layer: its fan-in activations
/// (B x I) and the upstream gradient at every input slot, one row per
/// (gate, slot) pair in LayerParams::slot_row order, one column per sample.
struct BatchContext {
  const BitMatrix* inputs = nullptr;
  const SlotMatrix* dy = nullptr;
};

/// Connection gradient sum_b (2 x[b, input] - 1) dy[b] for one fan-in signal.
double connection_gradient(const BitMatrix& x, std::size_t input, std::span<const double> dy);

/// R distinct indices uniform over [0, I) minus `exclude`.
std::vector<std::uint32_t> sample_random(std::size_t count, std::size_t fan_in, std::span<const std::int32_t> exclude,
                                         std::mt19937_64& rng);

/// The `count` fan-in indices with the most negative connection gradient,
/// skipping `exclude`, ties to the lowest index. Streams over all I inputs
/// while holding only a count-sized best set.
std::vector<std::uint32_t> sample_gradient_guided(std::size_t count, const BitMatrix& x, std::span<const double> dy,
                                                  std::span<const std::int32_t> exclude);

/// Gate-sampling refresh of one layer: for every (gate, slot), the R lowest
/// weights (lowest position on ties) are replaced by sampled indices that
/// inherit the smallest kept weight.
RefreshEvent refresh_candidates(LayerParams& layer, SamplingMode mode, std::size_t replace, const BatchContext& batch,
                                std::mt19937_64& rng, std::size_t layer_index = 0, std::uint64_t step = 0);

// One JSON object per line.
void write_refresh_event(std::ostream& out, const RefreshEvent& event);

}  // namespace dbn
