#include "lgnh/core/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace lgnh {

void RgbTile::validate() const {
  for (double v : values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InputError("RgbTile value outside [0,1]");
    }
  }
}

std::int32_t InstanceMask::max_label() const {
  std::int32_t m = 0;
  for (auto v : values()) m = std::max(m, v);
  return m;
}

std::size_t InstanceMask::instance_count() const {
  std::vector<std::int32_t> labels;
  for (auto v : values()) {
    if (v > 0) labels.push_back(v);
  }
  std::sort(labels.begin(), labels.end());
  return static_cast<std::size_t>(std::unique(labels.begin(), labels.end()) - labels.begin());
}

BinaryMask InstanceMask::foreground() const {
  BinaryMask out(width(), height());
  for (std::size_t i = 0; i < pixel_count(); ++i) out[i] = (*this)[i] > 0 ? 1 : 0;
  return out;
}

HsiImage rgb_to_hsi(const RgbTile& tile) {
  HsiImage out(tile.width(), tile.height());
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t p = 0; p < tile.pixel_count(); ++p) {
    const double r = tile[3 * p], g = tile[3 * p + 1], b = tile[3 * p + 2];
    const double intensity = (r + g + b) / 3.0;
    const double saturation = intensity > 0.0 ? 1.0 - std::min({r, g, b}) / intensity : 0.0;
    double hue = 0.0;
    const double num = 0.5 * ((r - g) + (r - b));
    const double den = std::sqrt((r - g) * (r - g) + (r - b) * (g - b));
    if (den > 1e-12) {
      double theta = std::acos(std::clamp(num / den, -1.0, 1.0));
      if (b > g) theta = two_pi - theta;
      hue = theta / two_pi;
      if (hue >= 1.0) hue -= 1.0;
    }
    out[3 * p] = hue;
    out[3 * p + 1] = std::clamp(saturation, 0.0, 1.0);
    out[3 * p + 2] = intensity;
  }
  return out;
}

int Histogram256::bin_of(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return std::min(255, static_cast<int>(std::floor(v * 256.0)));
}

Histogram256 build_histogram(std::span<const double> values) {
  if (values.empty()) throw InputError("histogram of empty patch");
  Histogram256 h;
  for (double v : values) ++h.bins[Histogram256::bin_of(v)];
  h.total = values.size();
  return h;
}

Histogram256 build_histogram(const GrayMap& patch) { return build_histogram(patch.values()); }

InstanceMask connected_components(const BinaryMask& binary) {
  const int w = binary.width(), h = binary.height();
  InstanceMask out(w, h);
  std::int32_t next = 0;
  std::vector<int> stack;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!binary.at(r, c) || out.at(r, c)) continue;
      ++next;
      out.at(r, c) = next;
      stack.assign(1, r * w + c);
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int pr = idx / w, pc = idx % w;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = pr + dr, nc = pc + dc;
            if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
            if (binary.at(nr, nc) && !out.at(nr, nc)) {
              out.at(nr, nc) = next;
              stack.push_back(nr * w + nc);
            }
          }
        }
      }
    }
  }
  return out;
}

BinaryMask threshold_above(const Raster<double>& map, double cutoff) {
  BinaryMask out(map.width(), map.height());
  for (std::size_t i = 0; i < map.pixel_count(); ++i) out[i] = map[i] >= cutoff ? 1 : 0;
  return out;
}

InstanceMask relabel_sequential(const InstanceMask& mask) {
  InstanceMask out(mask.width(), mask.height());
  std::unordered_map<std::int32_t, std::int32_t> remap;
  std::int32_t next = 0;
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    const auto v = mask[i];
    if (v <= 0) continue;
    auto [it, inserted] = remap.try_emplace(v, next + 1);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return out;
}

std::vector<std::vector<Pixel>> instance_pixels(const InstanceMask& mask) {
  std::vector<std::vector<Pixel>> out(static_cast<std::size_t>(mask.max_label()) + 1);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      const auto v = mask.at(r, c);
      if (v > 0) out[v].push_back({r, c});
    }
  }
  return out;
}

namespace {
double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}
}  // namespace

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(const std::vector<Point2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  return std::abs(acc) / 2.0;
}

double convex_hull_area(const std::vector<Pixel>& pixels) {
  // Only the extreme corners per row matter: leftmost and rightmost pixel.
  std::unordered_map<int, std::pair<int, int>> span;
  for (const auto& p : pixels) {
    auto [it, inserted] = span.try_emplace(p.row, p.col, p.col);
    if (!inserted) {
      it->second.first = std::min(it->second.first, p.col);
      it->second.second = std::max(it->second.second, p.col);
    }
  }
  std::vector<Point2> corners;
  corners.reserve(span.size() * 4);
  for (const auto& [row, lr] : span) {
    const double y0 = row, y1 = row + 1.0;
    const double x0 = lr.first, x1 = lr.second + 1.0;
    corners.push_back({x0, y0});
    corners.push_back({x0, y1});
    corners.push_back({x1, y0});
    corners.push_back({x1, y1});
  }
  return polygon_area(convex_hull(std::move(corners)));
}

RegionProps region_props_of(std::int32_t label, const std::vector<Pixel>& pixels) {
  RegionProps p;
  p.label = label;
  p.area = static_cast<std::int64_t>(pixels.size());
  if (pixels.empty()) return p;
  p.bbox = {pixels.front().row, pixels.front().col, pixels.front().row, pixels.front().col};
  double sr = 0.0, sc = 0.0;
  for (const auto& px : pixels) {
    sr += px.row;
    sc += px.col;
    p.bbox.top = std::min(p.bbox.top, px.row);
    p.bbox.bottom = std::max(p.bbox.bottom, px.row);
    p.bbox.left = std::min(p.bbox.left, px.col);
    p.bbox.right = std::max(p.bbox.right, px.col);
  }
  p.centroid_row = sr / p.area;
  p.centroid_col = sc / p.area;
  const double hull = convex_hull_area(pixels);
  p.solidity = hull > 0.0 ? std::min(1.0, p.area / hull) : 1.0;
  return p;
}

std::vector<RegionProps> region_props(const InstanceMask& mask) {
  const auto groups = instance_pixels(mask);
  std::vector<RegionProps> out;
  for (std::size_t label = 1; label < groups.size(); ++label) {
    if (!groups[label].empty()) {
      out.push_back(region_props_of(static_cast<std::int32_t>(label), groups[label]));
    }
  }
  return out;
}

}  // namespace lgnh
