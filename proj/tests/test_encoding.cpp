#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "dbn/encoding.hpp"
#include "dbn/errors.hpp"

using namespace dbn;

namespace {

FeatureMatrix column(std::vector<float> v) {
  FeatureMatrix m(Eigen::Index(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(Eigen::Index(i), 0) = v[i];
  return m;
}

// Independent quantile: position p = q (n - 1) in the sorted sample, linear between neighbours.
double reference_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double p = q * double(v.size() - 1);
  const auto lo = std::size_t(std::floor(p));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (p - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_CASE("thresholds on 1..11 sit at levels i/11") {
  const auto enc = fit_thresholds(column({5, 3, 1, 11, 9, 7, 2, 4, 6, 8, 10}), 10);
  REQUIRE(enc.thresholds_per_feature() == 10);
  std::vector<double> values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  for (int i = 1; i <= 10; ++i)
    CHECK(enc.thresholds()(0, i - 1) == doctest::Approx(reference_quantile(values, i / 11.0)).epsilon(1e-12));
  // Level q = i/11 lands at position 10i/11 in the order statistics: 1 + 10i/11.
  CHECK(enc.thresholds()(0, 0) == doctest::Approx(1.0 + 10.0 / 11.0));
  CHECK(enc.thresholds()(0, 9) == doctest::Approx(1.0 + 100.0 / 11.0));
}

TEST_CASE("constant feature gives equal thresholds") {
  const auto enc = fit_thresholds(column({5, 5, 5, 5}), 3);
  for (int i = 0; i < 3; ++i) CHECK(enc.thresholds()(0, i) == 5.0);
}

TEST_CASE("single threshold on symmetric data is the median") {
  const auto enc = fit_thresholds(column({-3, -1, 0, 1, 3}), 1);
  CHECK(enc.thresholds()(0, 0) == 0.0);
  const auto even = fit_thresholds(column({1, 2, 3, 4}), 1);
  CHECK(even.thresholds()(0, 0) == doctest::Approx(2.5));
}

TEST_CASE("fitted quantiles match the reference on random data") {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n(0, 1);
  FeatureMatrix data(257, 3);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = n(rng);
  const auto enc = fit_thresholds(data, 7);
  for (Eigen::Index f = 0; f < 3; ++f) {
    std::vector<double> v;
    for (Eigen::Index r = 0; r < data.rows(); ++r) v.push_back(data(r, f));
    for (int i = 1; i <= 7; ++i)
      CHECK(enc.thresholds()(f, i - 1) == doctest::Approx(reference_quantile(v, i / 8.0)).epsilon(1e-12));
  }
}

TEST_CASE("empty data is rejected") {
  CHECK_THROWS_AS(fit_thresholds(FeatureMatrix(0, 3), 2), StructuralError);
}

TEST_CASE("encoding compares strictly") {
  ThermometerEncoder::Thresholds th(1, 3);
  th << 1, 2, 3;
  const ThermometerEncoder enc(th);
  const auto bits = encode(enc, column({2.5F, 10.0F, 0.0F, 2.0F}));
  auto row = [&](std::size_t s) { return std::vector<bool>{bits.get(s, 0), bits.get(s, 1), bits.get(s, 2)}; };
  CHECK(row(0) == std::vector<bool>{true, true, false});
  CHECK(row(1) == std::vector<bool>{true, true, true});
  CHECK(row(2) == std::vector<bool>{false, false, false});
  CHECK(row(3) == std::vector<bool>{true, false, false});
  CHECK_THROWS_AS(encode(enc, FeatureMatrix(2, 2)), StructuralError);
}

TEST_CASE("thermometer codes are monotone prefixes") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0, 255);
  FeatureMatrix data(500, 6);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = std::round(u(rng));
  const auto enc = fit_thresholds(data, 10);
  CHECK(enc.output_width() == 60);
  const auto bits = encode(enc, data);
  CHECK(bits.signals() == 60);
  for (std::size_t s = 0; s < 500; ++s)
    for (std::size_t f = 0; f < 6; ++f)
      for (std::size_t i = 0; i + 1 < 10; ++i) CHECK(bits.get(s, f * 10 + i) >= bits.get(s, f * 10 + i + 1));
  // x <= y implies encode(x) <= encode(y)
  for (Eigen::Index r = 0; r + 1 < data.rows(); r += 2) {
    FeatureMatrix pair(2, 6);
    pair.row(0) = data.row(r).cwiseMin(data.row(r + 1));
    pair.row(1) = data.row(r).cwiseMax(data.row(r + 1));
    const auto b = encode(enc, pair);
    for (std::size_t j = 0; j < 60; ++j) CHECK(b.get(0, j) <= b.get(1, j));
  }
}

TEST_CASE("CIFAR-sized input width") {
  ThermometerEncoder::Thresholds th = ThermometerEncoder::Thresholds::Zero(3072, 10);
  CHECK(ThermometerEncoder(th).output_width() == 30720);
}

TEST_CASE("decreasing thresholds are rejected") {
  ThermometerEncoder::Thresholds th(1, 2);
  th << 2, 1;
  CHECK_THROWS_AS(ThermometerEncoder{th}, StructuralError);
}

TEST_CASE("encoder text round trip") {
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n(0, 1);
  FeatureMatrix data(50, 4);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = n(rng);
  const auto enc = fit_thresholds(data, 5);
  std::stringstream ss;
  write_encoder(ss, enc);
  CHECK(read_encoder(ss) == enc);
  std::stringstream bad("not-an-encoder");
  CHECK_THROWS_AS(read_encoder(bad), IngestionError);
}

TEST_CASE("binary encoder passes 0/1 features through") {
  const auto enc = ThermometerEncoder::binary(3);
  FeatureMatrix x(2, 3);
  x << 0, 1, 1, 1, 0, 0;
  const auto b = encode(enc, x);
  CHECK(b.get(0, 0) == false);
  CHECK(b.get(0, 1) == true);
  CHECK(b.get(1, 0) == true);
  CHECK(b.get(1, 2) == false);
}
