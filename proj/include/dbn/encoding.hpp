#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include <Eigen/Core>

#include "dbn/bit_matrix.hpp"

namespace dbn {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-feature thermometer thresholds. Encoded column f*T + i is 1 iff
/// feature f is strictly greater than threshold i.
class ThermometerEncoder {
 public:
  using Thresholds = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  ThermometerEncoder() = default;
  explicit ThermometerEncoder(Thresholds thresholds);

  std::size_t num_features() const { return std::size_t(thresholds_.rows()); }
  std::size_t thresholds_per_feature() const { return std::size_t(thresholds_.cols()); }
  std::size_t output_width() const { return num_features() * thresholds_per_feature(); }
  const Thresholds& thresholds() const { return thresholds_; }

  // One threshold at 0.5 per feature, for data that is already 0/1.
  static ThermometerEncoder binary(std::size_t num_features);

  friend bool operator==(const ThermometerEncoder& a, const ThermometerEncoder& b) {
    return a.thresholds_.rows() == b.thresholds_.rows() && a.thresholds_.cols() == b.thresholds_.cols() &&
           a.thresholds_ == b.thresholds_;
  }

 private:
  Thresholds thresholds_;
};

/// Empirical quantiles at levels i/(T+1), i = 1..T, per feature, with linear
/// interpolation between order statistics at position q*(n-1).
ThermometerEncoder fit_thresholds(const FeatureMatrix& train, std::size_t thresholds_per_feature);

// Same rule for a single sorted sample.
double quantile_linear(std::span<const double> sorted, double q);

BitMatrix encode(const ThermometerEncoder& encoder, const FeatureMatrix& data);

void write_encoder(std::ostream& out, const ThermometerEncoder& encoder);
ThermometerEncoder read_encoder(std::istream& in);
void save_encoder(const std::string& path, const ThermometerEncoder& encoder);
ThermometerEncoder load_encoder(const std::string& path);

}  // namespace dbn
