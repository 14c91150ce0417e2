#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "lgnh/core/image_ops.hpp"
#include "lgnh/core/raster.hpp"

namespace fixtures {

using namespace lgnh;

/// Builds a mask from rows of digits, '.' meaning background.
inline InstanceMask mask_from(std::initializer_list<std::string> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.begin()->size());
  InstanceMask m(w, h);
  int r = 0;
  for (const auto& line : rows) {
    for (int c = 0; c < w; ++c) m.at(r, c) = line[c] == '.' ? 0 : line[c] - '0';
    ++r;
  }
  return m;
}

inline BinaryMask binary_from(std::initializer_list<std::string> rows) {
  const auto m = mask_from(rows);
  BinaryMask b(m.width(), m.height());
  for (std::size_t i = 0; i < m.pixel_count(); ++i) b[i] = m[i] != 0;
  return b;
}

inline void paint_disk(BinaryMask& m, double cr, double cc, double radius) {
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius) m.at(r, c) = 1;
    }
  }
}

inline void paint_disk(InstanceMask& m, double cr, double cc, double radius, std::int32_t label) {
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius) m.at(r, c) = label;
    }
  }
}

inline RgbTile solid_tile(int w, int h, double r, double g, double b) {
  RgbTile t(w, h);
  for (std::size_t p = 0; p < t.pixel_count(); ++p) {
    t[3 * p] = r;
    t[3 * p + 1] = g;
    t[3 * p + 2] = b;
  }
  return t;
}

inline void set_rgb(RgbTile& t, int r, int c, double red, double green, double blue) {
  t.at(r, c, 0) = red;
  t.at(r, c, 1) = green;
  t.at(r, c, 2) = blue;
}

/// Foreground partition as a set of pixel-index sets, independent of label values.
inline std::vector<std::vector<std::size_t>> partition_of(const InstanceMask& m) {
  std::map<std::int32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < m.pixel_count(); ++i) {
    if (m[i] > 0) groups[m[i]].push_back(i);
  }
  std::vector<std::vector<std::size_t>> out;
  for (auto& [label, pixels] : groups) out.push_back(std::move(pixels));
  std::sort(out.begin(), out.end());
  return out;
}

inline std::size_t foreground_count(const InstanceMask& m) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.pixel_count(); ++i) n += m[i] > 0;
  return n;
}

}  // namespace fixtures
