#pragma once

#include <vector>

#include "lgnh/core/image_ops.hpp"
#include "lgnh/core/raster.hpp"
#include "lgnh/preprocess/preprocess.hpp"

namespace lgnh::localproc {

struct BimodalCriteria {
  int smoothing_width = 21;
  /// Minimum peak prominence as a fraction of the highest smoothed count.
  double min_prominence = 0.05;
  int min_separation_bins = 32;
  /// The smoothed minimum between the two peaks must lie at least this
  /// fraction below the lower peak. 0 disables the check.
  double min_valley_depth = 0.7;
  /// Each side of the valley must hold at least this fraction of the pixels.
  double min_mode_fraction = 0.03;
  bool operator==(const BimodalCriteria&) const = default;
};

struct BimodalFit {
  double t1 = 0.0;  // darker peak intensity
  double t2 = 0.0;  // brighter peak intensity
  double c1 = 0.0;  // normalised peak heights
  double c2 = 0.0;
  bool valid = false;
};

BimodalFit detect_bimodal(const Histogram256& hist, const BimodalCriteria& criteria = {});

struct ThresholdResult {
  double t_o = 0.0;
  double t_c = 0.0;
  double t_hat = 0.0;
  double lambda = 0.0;
};

/// Midpoint-corrected threshold T_hat = T_o + lambda (T_o - T_c) on
/// normalised (intensity, count) axes, clamped to the open interval (T1, T2).
ThresholdResult adaptive_threshold(const BimodalFit& fit, double lambda);

struct ThresholdConfig {
  int patch_size = 50;
  int fine_patch_size = 25;
  int coarse_patch_size = 100;
  /// Try the fine scale before the coarse context.
  bool fine_first = true;
  double lambda = 0.2;
  /// Use T_o instead of T_hat.
  bool midpoint_only = false;
  /// Patches whose gray-value spread is below this are not thresholded.
  double min_contrast = 0.3;
  BimodalCriteria criteria;
  bool operator==(const ThresholdConfig&) const = default;
};

/// Splits [0, length) into round(length / size) near-equal pieces.
std::vector<std::pair<int, int>> partition_axis(int length, int size);

/// Pixels strictly below the patch threshold become foreground.
BinaryMask threshold_multiscale(int width, int height, const preprocess::PatchProjector& project,
                                const ThresholdConfig& cfg);
BinaryMask threshold_multiscale(const GrayMap& pmap, const ThresholdConfig& cfg);

struct MorphConfig {
  int min_area = 30;
  double solidity_cutoff = 0.85;
  int max_split_depth = 2;
  /// Concavity depth (px) both cut points must reach.
  double min_concavity_depth = 2.0;
  bool operator==(const MorphConfig&) const = default;
};

BinaryMask fill_holes(const BinaryMask& binary);

/// Returns one or more pixel sets; the input is returned unchanged when no
/// split applies.
std::vector<std::vector<Pixel>> split_concave(const std::vector<Pixel>& pixels, const MorphConfig& cfg);

InstanceMask morph_refine(const BinaryMask& binary, const MorphConfig& cfg);

struct LairConfig {
  int patch_size = 200;
  double nu = 0.1;
  double similarity_threshold = 0.7;
  /// Fraction of instances (by ascending area) used as queries.
  double size_percentile_split = 0.6;
  bool operator==(const LairConfig&) const = default;
};

/// Per-instance mean H,S,I followed by per-channel standard deviation.
std::array<double, 6> lair_feature(const std::vector<Pixel>& pixels, const HsiImage& hsi);

double lair_similarity(std::span<const double> reference, std::span<const double> query, double nu);

InstanceMask lair_filter(const InstanceMask& mask, const HsiImage& hsi, const LairConfig& cfg);

}  // namespace lgnh::localproc
