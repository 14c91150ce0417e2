#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lgnh/core/raster.hpp"

namespace lgnh {

/// Gonzalez-Woods HSI. Hue is the arccos form wrapped to [0,1); achromatic
/// and black pixels get hue 0, black pixels saturation 0.
HsiImage rgb_to_hsi(const RgbTile& tile);

struct Histogram256 {
  std::array<std::uint32_t, 256> bins{};
  std::uint64_t total = 0;

  /// Intensity represented by a bin, b / 255.
  static double bin_value(int bin) { return bin / 255.0; }
  static int bin_of(double v);
};

/// Values are clamped to [0,1]; bin = min(255, floor(256 v)).
Histogram256 build_histogram(std::span<const double> values);
Histogram256 build_histogram(const GrayMap& patch);

/// 8-connected labelling in raster order of first pixel; labels 1..n.
InstanceMask connected_components(const BinaryMask& binary);
BinaryMask threshold_above(const Raster<double>& map, double cutoff);

/// Compacts labels to 1..n in order of first appearance. Does not merge or
/// split instances.
InstanceMask relabel_sequential(const InstanceMask& mask);

struct BBox {
  int top = 0, left = 0, bottom = 0, right = 0;  // inclusive
};

struct RegionProps {
  std::int32_t label = 0;
  std::int64_t area = 0;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  BBox bbox;
  double solidity = 1.0;
};

struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};

/// Pixel lists per label, indexed by label (index 0 unused).
std::vector<std::vector<Pixel>> instance_pixels(const InstanceMask& mask);

/// Area of the convex hull of the pixel squares (unit squares at each pixel).
double convex_hull_area(const std::vector<Pixel>& pixels);

RegionProps region_props_of(std::int32_t label, const std::vector<Pixel>& pixels);
/// One record per positive label, ascending label order.
std::vector<RegionProps> region_props(const InstanceMask& mask);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Andrew's monotone chain; counter-clockwise, no collinear points.
std::vector<Point2> convex_hull(std::vector<Point2> points);
double polygon_area(const std::vector<Point2>& polygon);

}  // namespace lgnh
