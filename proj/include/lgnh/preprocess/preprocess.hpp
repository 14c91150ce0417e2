#pragma once

#include <array>
#include <functional>
#include <vector>

#include "lgnh/core/raster.hpp"

namespace lgnh::preprocess {

using Vec3 = std::array<double, 3>;

struct StainBasis {
  Vec3 hematoxylin_dir{};
  Vec3 eosin_dir{};
  double od_floor = 1.0 / 256.0;
  /// True when the tile looked single-stained and eosin_dir is a reference
  /// vector rather than a fitted one.
  bool single_stain = false;
};

struct StainOptions {
  double lower_percentile = 1.0;
  double upper_percentile = 99.0;
  /// Pixels with optical-density norm below this are treated as transparent
  /// when estimating stain angles.
  double transparent_od = 0.15;
  /// Second-to-first eigenvalue ratio below which the tile is single-stained.
  double single_stain_ratio = 1e-3;
  bool operator==(const StainOptions&) const = default;
};

struct StainResult {
  RgbTile h_image;
  StainBasis basis;
  /// Per-pixel hematoxylin and eosin concentrations.
  std::vector<double> h_concentration;
  std::vector<double> e_concentration;
};

/// OD = -log((255 v + 1) / 256).
double optical_density(double v);
double od_to_intensity(double od);

/// Optical-density plane from the mean-centred OD covariance; stain directions
/// at the percentile-extreme projected angles. Throws ConstantTile when the
/// top-2 OD standard deviations are below 1e-6.
StainResult stain_separate(const RgbTile& tile, const StainOptions& opts = {});

/// Per-channel CDF remap over 256 levels: out = cdf(level) / N.
RgbTile hist_equalize(const RgbTile& image);

struct PqrBasis {
  Vec3 mean_color{};
  Vec3 p{}, q{}, r{};
  int sign_flag = 1;
  /// Variance along p, q, r.
  Vec3 variances{};
};

/// Pixels are interleaved RGB triples. Throws DegeneratePatch for fewer than
/// 4 pixels or zero colour variance.
PqrBasis fit_pqr(std::span<const double> rgb_pixels);
PqrBasis fit_pqr(const RgbTile& patch);

/// sign * P.(pixel - mean), min-max rescaled to [0,1] over the given pixels;
/// all 0.5 when the projection is constant.
std::vector<double> pqr_project(std::span<const double> rgb_pixels, const PqrBasis& basis);
GrayMap pqr_project(const RgbTile& patch, const PqrBasis& basis);

/// CIELAB lightness L*/100 of an sRGB pixel.
double lab_lightness(double r, double g, double b);

struct Rect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

struct ProjectedPatch {
  /// Row-major within the rectangle, in [0,1]; nuclei come out dark.
  std::vector<double> values;
  /// Spread between the 1st and 99th percentile of the gray values before
  /// any per-patch rescaling.
  double contrast = 0.0;
};

/// Maps a rectangle of the preprocessed image to per-pixel grayscale values.
using PatchProjector = std::function<ProjectedPatch(const Rect&)>;

/// Per-rectangle PQR, min-max rescaled; falls back to the mean RGB intensity
/// on degenerate patches.
PatchProjector make_pqr_projector(const RgbTile& image);
/// Fixed colour conversion: per-rectangle min-max rescaled CIELAB lightness.
PatchProjector make_lightness_projector(const RgbTile& image);
/// Reads values straight out of a precomputed map.
PatchProjector make_map_projector(const GrayMap& map);
double robust_range(std::vector<double> values);
std::vector<double> gather_rect(const RgbTile& image, const Rect& rect);

}  // namespace lgnh::preprocess
