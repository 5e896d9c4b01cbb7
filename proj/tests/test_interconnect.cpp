#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <new>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dbn/errors.hpp"
#include "dbn/interconnect.hpp"
#include "oracles.hpp"

using namespace dbn;

namespace {
std::atomic<bool> g_counting{false};
std::atomic<std::size_t> g_bytes{0};
std::atomic<std::size_t> g_allocs{0};
}  // namespace

void* operator new(std::size_t n) {
  if (g_counting.load(std::memory_order_relaxed)) {
    g_bytes += n;
    ++g_allocs;
  }
  if (void* p = std::malloc(n ? n : 1)) return p;
  throw std::bad_alloc();
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }

namespace {

LayerParams one_slot_layer(std::vector<int> cand, std::vector<double> w, std::size_t fan_in) {
  LayerParams l;
  l.fan_in_width = fan_in;
  l.gate_logits = GateLogits::Zero(1, 16);
  const auto C = Eigen::Index(cand.size());
  l.candidates.resize(2, C);
  l.conn_weights.resize(2, C);
  for (Eigen::Index c = 0; c < C; ++c) {
    l.candidates(0, c) = cand[std::size_t(c)];
    l.conn_weights(0, c) = w[std::size_t(c)];
    l.candidates(1, c) = std::int32_t(c);
    l.conn_weights(1, c) = 0.0;
  }
  return l;
}

// Full gradient vector, then a sort by (gradient, index).
std::vector<std::uint32_t> topr_oracle(std::size_t R, const oracle::Bits& x, const std::vector<double>& dy,
                                       const std::vector<int>& exclude, std::size_t I) {
  std::vector<std::pair<double, std::uint32_t>> all;
  for (std::size_t i = 0; i < I; ++i) {
    if (std::find(exclude.begin(), exclude.end(), int(i)) != exclude.end()) continue;
    double g = 0.0;
    for (std::size_t b = 0; b < x.size(); ++b) g += (2.0 * x[b][i] - 1.0) * dy[b];
    all.emplace_back(g, std::uint32_t(i));
  }
  std::sort(all.begin(), all.end());
  std::vector<std::uint32_t> out;
  for (std::size_t r = 0; r < R; ++r) out.push_back(all[r].second);
  return out;
}

}  // namespace

TEST_CASE("worked refresh example") {
  auto l = one_slot_layer({1, 3, 4, 6}, {0.1, 0.8, 0.5, 0.2}, 16);
  std::mt19937_64 rng(1);
  const auto ev = refresh_candidates(l, SamplingMode::kRandom, 2, {}, rng);
  const auto& s = ev.slots[0];
  CHECK(s.w_floor == 0.5);
  REQUIRE(s.replaced.size() == 2);
  CHECK(s.replaced[0].position == 0);
  CHECK(s.replaced[0].old_index == 1);
  CHECK(s.replaced[1].position == 3);
  CHECK(s.replaced[1].old_index == 6);
  CHECK(l.conn_weights(0, 0) == 0.5);
  CHECK(l.conn_weights(0, 1) == 0.8);
  CHECK(l.conn_weights(0, 2) == 0.5);
  CHECK(l.conn_weights(0, 3) == 0.5);
  CHECK(l.candidates(0, 1) == 3);
  CHECK(l.candidates(0, 2) == 4);
  for (int c : {0, 3}) {
    CHECK(l.candidates(0, c) != 3);
    CHECK(l.candidates(0, c) != 4);
  }
  CHECK(l.candidates(0, 0) != l.candidates(0, 3));
}

TEST_CASE("refresh with R = 0 or sampling none changes nothing") {
  auto l = one_slot_layer({1, 3, 4, 6}, {0.1, 0.8, 0.5, 0.2}, 16);
  const auto before = l;
  std::mt19937_64 rng(1);
  CHECK(refresh_candidates(l, SamplingMode::kRandom, 0, {}, rng).slots.empty());
  CHECK(refresh_candidates(l, SamplingMode::kNone, 2, {}, rng).slots.empty());
  CHECK(l.candidates == before.candidates);
  CHECK(l.conn_weights == before.conn_weights);
}

TEST_CASE("all-equal weights replace the lowest positions") {
  auto l = one_slot_layer({1, 3, 4, 6}, {0.3, 0.3, 0.3, 0.3}, 16);
  std::mt19937_64 rng(1);
  const auto ev = refresh_candidates(l, SamplingMode::kRandom, 2, {}, rng);
  CHECK(ev.slots[0].replaced[0].position == 0);
  CHECK(ev.slots[0].replaced[1].position == 1);
  CHECK(ev.slots[0].w_floor == 0.3);
}

TEST_CASE("refresh keeps the hardened choice and slot distinctness") {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> n(0, 1);
  std::uniform_int_distribution<std::size_t> Cd(3, 8);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t C = Cd(rng);
    // At least two kept candidates with distinct weights.
    std::uniform_int_distribution<std::size_t> Rd(1, C - 2);
    const std::size_t R = Rd(rng);
    auto m = init_model({40, {6}, 1, 1.0, C, 1.0}, rng);
    auto& l = m.layers[0];
    for (Eigen::Index i = 0; i < l.conn_weights.size(); ++i) l.conn_weights.data()[i] = n(rng);
    const auto before = harden(m);
    refresh_candidates(l, SamplingMode::kRandom, R, {}, rng);
    CHECK(harden(m) == before);
    for (Eigen::Index r = 0; r < l.candidates.rows(); ++r) {
      std::set<int> s(l.candidates.row(r).data(), l.candidates.row(r).data() + C);
      CHECK(s.size() == C);
    }
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("refresh on a frozen layer or without a batch is a usage error") {
  auto l = one_slot_layer({0, 1, 2, 3}, {0.1, 0.8, 0.5, 0.2}, 16);
  std::mt19937_64 rng(1);
  l.frozen_interconnect = true;
  CHECK_THROWS_AS(refresh_candidates(l, SamplingMode::kRandom, 2, {}, rng), UsageError);
  l.frozen_interconnect = false;
  CHECK_THROWS_AS(refresh_candidates(l, SamplingMode::kGradientGuided, 2, {}, rng), UsageError);
}

TEST_CASE("random sampling") {
  std::mt19937_64 rng(3);
  const std::vector<std::int32_t> ex{0, 1};
  auto forced = sample_random(2, 4, ex, rng);
  std::sort(forced.begin(), forced.end());
  CHECK(forced == std::vector<std::uint32_t>{2, 3});

  int zeros = 0;
  for (int t = 0; t < 10000; ++t) zeros += sample_random(1, 2, {}, rng)[0] == 0;
  CHECK(std::abs(zeros / 10000.0 - 0.5) <= 0.02);

  const std::vector<std::int32_t> kept{3, 7, 11, 12};
  std::vector<int> hits(20, 0);
  for (int t = 0; t < 20000; ++t) {
    const auto v = sample_random(3, 20, kept, rng);
    std::set<std::uint32_t> s(v.begin(), v.end());
    CHECK(s.size() == 3);
    for (auto i : v) {
      CHECK(std::find(kept.begin(), kept.end(), std::int32_t(i)) == kept.end());
      ++hits[i];
    }
  }
  for (int i = 0; i < 20; ++i)
    if (std::find(kept.begin(), kept.end(), i) == kept.end()) CHECK(std::abs(hits[std::size_t(i)] / 60000.0 - 1.0 / 16) < 0.01);

  CHECK_THROWS_AS(sample_random(3, 4, ex, rng), StructuralError);
}

TEST_CASE("gradient-guided sampling examples") {
  BitMatrix x(1, 4);
  x.set(0, 0, true);
  x.set(0, 2, true);
  const std::vector<double> dy{1.0};
  CHECK(sample_gradient_guided(1, x, dy, {}) == std::vector<std::uint32_t>{1});
  CHECK(sample_gradient_guided(2, x, dy, {}) == std::vector<std::uint32_t>{1, 3});

  const std::vector<double> zero{0.0};
  const std::vector<std::int32_t> ex{0, 2};
  CHECK(sample_gradient_guided(2, x, zero, ex) == std::vector<std::uint32_t>{1, 3});
  CHECK(sample_gradient_guided(3, x, zero, {}) == std::vector<std::uint32_t>{0, 1, 2});
  CHECK_THROWS_AS(sample_gradient_guided(1, x, std::vector<double>{1.0, 2.0}, {}), UsageError);
}

TEST_CASE("streaming top-R equals the full-vector sort") {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<std::size_t> Bd(1, 16), Id(8, 200), Rd(1, 6);
  std::uniform_int_distribution<int> small(-2, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t B = Bd(rng), I = Id(rng), R = Rd(rng);
    const auto xb = oracle::random_bits(rng, B, I);
    std::vector<double> dy(B);
    // Integer-valued dy produces many exact ties; a third of trials use all zeros.
    for (auto& v : dy) v = trial % 3 == 0 ? 0.0 : double(small(rng));
    std::vector<int> ex;
    for (std::size_t e = 0; e < 4; ++e) ex.push_back(int(rng() % I));
    const std::vector<std::int32_t> ex32(ex.begin(), ex.end());
    CHECK(sample_gradient_guided(R, oracle::from_rows(xb, I), dy, ex32) == topr_oracle(R, xb, dy, ex, I));
  }
}

TEST_CASE("gradient-guided memory does not grow with the fan-in") {
  std::mt19937_64 rng(9);
  std::vector<std::size_t> bytes;
  for (std::size_t I : {1000, 10000, 100000}) {
    BitMatrix x(64, I);
    for (std::size_t s = 0; s < 64; ++s)
      for (std::size_t i = 0; i < I; i += 3) x.set(s, (i + s) % I, true);
    std::vector<double> dy(64);
    for (auto& v : dy) v = double(rng() % 7) - 3.0;
    const std::vector<std::int32_t> ex{1, 2, 3, 4};
    g_bytes = 0;
    g_allocs = 0;
    g_counting = true;
    const auto out = sample_gradient_guided(4, x, dy, ex);
    g_counting = false;
    CHECK(out.size() == 4);
    bytes.push_back(g_bytes.load());
  }
  CHECK(bytes[0] == bytes[1]);
  CHECK(bytes[1] == bytes[2]);
  CHECK(bytes[0] < 1024);
}

TEST_CASE("refresh events serialise as one JSON object per line") {
  auto l = one_slot_layer({1, 3, 4, 6}, {0.1, 0.8, 0.5, 0.2}, 16);
  std::mt19937_64 rng(1);
  const auto ev = refresh_candidates(l, SamplingMode::kRandom, 2, {}, rng, 2, 40);
  std::stringstream ss;
  write_refresh_event(ss, ev);
  std::string line;
  std::getline(ss, line);
  const auto j = nlohmann::json::parse(line);
  CHECK(j["layer"] == 2);
  CHECK(j["step"] == 40);
  CHECK(j["slots"].size() == 2);
  CHECK(j["slots"][0]["w_floor"] == 0.5);
  CHECK(j["slots"][0]["replaced"][0][0] == 1);
}
