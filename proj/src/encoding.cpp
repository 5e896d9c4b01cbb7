#include "dbn/encoding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "dbn/errors.hpp"
#include "dbn/parallel.hpp"

namespace dbn {

ThermometerEncoder::ThermometerEncoder(Thresholds thresholds) : thresholds_(std::move(thresholds)) {
  for (Eigen::Index f = 0; f < thresholds_.rows(); ++f)
    for (Eigen::Index i = 1; i < thresholds_.cols(); ++i)
      if (thresholds_(f, i) < thresholds_(f, i - 1))
        throw StructuralError("thermometer thresholds must be non-decreasing per feature");
}

ThermometerEncoder ThermometerEncoder::binary(std::size_t num_features) {
  return ThermometerEncoder(Thresholds::Constant(Eigen::Index(num_features), 1, 0.5));
}

double quantile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw StructuralError("quantile of empty sample");
  const double h = q * double(sorted.size() - 1);
  const auto lo = std::size_t(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - double(lo)) * (sorted[lo + 1] - sorted[lo]);
}

ThermometerEncoder fit_thresholds(const FeatureMatrix& train, std::size_t thresholds_per_feature) {
  if (train.rows() == 0 || train.cols() == 0) throw StructuralError("fit_thresholds: empty training data");
  if (thresholds_per_feature == 0) throw ConfigError("fit_thresholds: need at least one threshold");
  const auto T = Eigen::Index(thresholds_per_feature);
  ThermometerEncoder::Thresholds th(train.cols(), T);
  std::vector<double> column(std::size_t(train.rows()));
  for (Eigen::Index f = 0; f < train.cols(); ++f) {
    for (Eigen::Index r = 0; r < train.rows(); ++r) column[std::size_t(r)] = double(train(r, f));
    std::sort(column.begin(), column.end());
    for (Eigen::Index i = 0; i < T; ++i) th(f, i) = quantile_linear(column, double(i + 1) / double(T + 1));
  }
  return ThermometerEncoder(std::move(th));
}

BitMatrix encode(const ThermometerEncoder& encoder, const FeatureMatrix& data) {
  if (std::size_t(data.cols()) != encoder.num_features())
    throw StructuralError("encode: data has " + std::to_string(data.cols()) + " features, encoder expects " +
                          std::to_string(encoder.num_features()));
  const std::size_t T = encoder.thresholds_per_feature();
  BitMatrix out(std::size_t(data.rows()), encoder.output_width());
  const auto& th = encoder.thresholds();
  parallel_for(encoder.num_features(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f)
      for (std::size_t i = 0; i < T; ++i) {
        auto col = out.column(f * T + i);
        const double t = th(Eigen::Index(f), Eigen::Index(i));
        for (Eigen::Index r = 0; r < data.rows(); ++r)
          if (double(data(r, Eigen::Index(f))) > t) col[std::size_t(r) / kWordBits] |= Word{1} << (std::size_t(r) % kWordBits);
      }
  });
  return out;
}

void write_encoder(std::ostream& out, const ThermometerEncoder& encoder) {
  out << "dbn-thermometer 1\n" << encoder.num_features() << ' ' << encoder.thresholds_per_feature() << '\n';
  char buf[64];
  for (Eigen::Index f = 0; f < encoder.thresholds().rows(); ++f) {
    for (Eigen::Index i = 0; i < encoder.thresholds().cols(); ++i) {
      auto res = std::to_chars(buf, buf + sizeof buf, encoder.thresholds()(f, i));
      out << (i ? " " : "") << std::string_view(buf, std::size_t(res.ptr - buf));
    }
    out << '\n';
  }
}

ThermometerEncoder read_encoder(std::istream& in) {
  std::string magic;
  int version = 0;
  std::size_t nf = 0, T = 0;
  if (!(in >> magic >> version >> nf >> T) || magic != "dbn-thermometer" || version != 1)
    throw IngestionError("encoder: bad header");
  ThermometerEncoder::Thresholds th(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(T));
  std::string tok;
  for (Eigen::Index i = 0; i < th.size(); ++i) {
    if (!(in >> tok)) throw IngestionError("encoder: truncated thresholds");
    double v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{}) throw IngestionError("encoder: bad threshold '" + tok + "'");
    th.data()[i] = v;
  }
  return ThermometerEncoder(std::move(th));
}

void save_encoder(const std::string& path, const ThermometerEncoder& encoder) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  write_encoder(out, encoder);
}

ThermometerEncoder load_encoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open encoder " + path);
  return read_encoder(in);
}

}  // namespace dbn
