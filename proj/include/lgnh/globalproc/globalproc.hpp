#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lgnh/core/image_ops.hpp"
#include "lgnh/core/raster.hpp"

namespace lgnh::globalproc {

struct GlobalConfig {
  double confident_mean_prob = 0.95;
  double log_blob_threshold = 0.05;
  double sigma_min = 2.0;
  double sigma_max = 10.0;
  int sigma_steps = 8;
  double t_p = 0.35;
  /// Pieces of watershed basins smaller than this are dropped when merging.
  int min_area = 30;
  /// Watershed elevation: 1 - P' by default, gradient magnitude of P' if set.
  bool gradient_elevation = false;
  /// RBF width on standardized features; 0 selects 1 / feature count.
  double svm_gamma = 0.0;
  double svm_c = 1.0;
  double removal_prob_cutoff = 0.5;
  int min_instances = 10;

  void validate() const;
  bool operator==(const GlobalConfig&) const = default;
};

struct Seed {
  int row = 0;
  int col = 0;
  double sigma = 0.0;
  double response = 0.0;
};
using SeedSet = std::vector<Seed>;

/// Instances of {p > level}, 8-connected.
InstanceMask probability_instances(const Heatmap& heatmap, double level = 0.5);

struct ConfidentSplit {
  InstanceMask confident;
  Heatmap p_prime;
};

/// Moves instances whose mean probability is strictly above `cutoff` out of
/// the heatmap.
ConfidentSplit filter_confident(const Heatmap& heatmap, const InstanceMask& mask, double cutoff);

/// Geometric ladder from sigma_min to sigma_max inclusive.
std::vector<double> sigma_ladder(const GlobalConfig& cfg);

/// Scale-normalized, sign-flipped LoG maxima in (row, col, sigma).
SeedSet detect_log_maxima(const Heatmap& p_prime, const GlobalConfig& cfg);

/// Marker-controlled flooding restricted to {P' >= flood_floor}. Basins are
/// separated by one-pixel lines and never touch, even diagonally.
InstanceMask watershed_refine(const Heatmap& p_prime, const SeedSet& seeds, double flood_floor,
                              bool gradient_elevation = false);

/// Watershed pieces inside {P' >= t_p} (each 8-connected piece of at least
/// `min_area` pixels kept) plus the confident instances, which win overlaps.
InstanceMask binarize_merge(const Heatmap& p_prime, const InstanceMask& watershed, const InstanceMask& confident,
                            double t_p, int min_area);

constexpr int kInstanceFeatureCount = 34;
constexpr int kGlszmLevels = 16;

/// 18 first-order statistics (mean, std, skewness, min, max, entropy per HSI
/// channel) followed by 16 gray-level size-zone features of the intensity
/// channel.
std::array<double, kInstanceFeatureCount> instance_features(const std::vector<Pixel>& pixels, const HsiImage& hsi);

/// Size-zone matrix P[level][size-1] of quantized intensity, 8-connected zones.
std::vector<std::vector<std::int64_t>> glszm(const std::vector<Pixel>& pixels, const HsiImage& hsi);
std::array<double, 16> glszm_features(const std::vector<std::vector<std::int64_t>>& matrix);

/// Binary RBF-kernel support vector machine with Platt-scaled probabilities.
class RbfSvm {
 public:
  /// `x` row-major rows x dims; labels 1 = positive.
  void fit(std::span<const double> x, std::span<const std::uint8_t> labels, int dims, double c, double gamma);
  double decision(std::span<const double> row) const;
  double probability(std::span<const double> row) const;
  double platt_a() const { return a_; }
  double platt_b() const { return b_; }

 private:
  int dims_ = 0;
  double gamma_ = 1.0;
  double bias_ = 0.0;
  std::vector<double> support_;  // rows x dims
  std::vector<double> coef_;     // alpha_i * y_i
  double a_ = -1.0, b_ = 0.0;
};

struct FilterResult {
  InstanceMask mask;
  std::vector<std::int32_t> removed;
  bool trained = false;
  std::string warning;
};

/// Trains on detected instances against area-matched background regions and
/// removes instances judged unlikely to be true positives.
FilterResult instance_classify_filter(const InstanceMask& mask, const HsiImage& hsi, const GlobalConfig& cfg,
                                      std::uint64_t seed);

}  // namespace lgnh::globalproc
