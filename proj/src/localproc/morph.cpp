#include <algorithm>
#include <array>
#include <cmath>

#include "lgnh/localproc/localproc.hpp"

namespace lgnh::localproc {

BinaryMask fill_holes(const BinaryMask& binary) {
  const int w = binary.width(), h = binary.height();
  // Background reachable from the border through 4-connected steps is not a hole.
  BinaryMask outside(w, h);
  std::vector<int> stack;
  auto seed = [&](int r, int c) {
    if (!binary.at(r, c) && !outside.at(r, c)) {
      outside.at(r, c) = 1;
      stack.push_back(r * w + c);
    }
  };
  for (int c = 0; c < w; ++c) {
    seed(0, c);
    seed(h - 1, c);
  }
  for (int r = 0; r < h; ++r) {
    seed(r, 0);
    seed(r, w - 1);
  }
  constexpr std::array<std::array<int, 2>, 4> steps{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    const int r = idx / w, c = idx % w;
    for (auto [dr, dc] : steps) {
      const int nr = r + dr, nc = c + dc;
      if (nr >= 0 && nr < h && nc >= 0 && nc < w) seed(nr, nc);
    }
  }
  BinaryMask out(w, h);
  for (std::size_t i = 0; i < out.pixel_count(); ++i) out[i] = (binary[i] || !outside[i]) ? 1 : 0;
  return out;
}

namespace {

/// Local raster around one instance with a one-pixel background margin.
struct LocalShape {
  int top = 0, left = 0, width = 0, height = 0;
  std::vector<std::uint8_t> on;

  explicit LocalShape(const std::vector<Pixel>& pixels) {
    int bottom = pixels.front().row, right = pixels.front().col;
    top = bottom;
    left = right;
    for (const auto& p : pixels) {
      top = std::min(top, p.row);
      left = std::min(left, p.col);
      bottom = std::max(bottom, p.row);
      right = std::max(right, p.col);
    }
    top -= 1;
    left -= 1;
    height = bottom - top + 2;
    width = right - left + 2;
    on.assign(static_cast<std::size_t>(width) * height, 0);
    for (const auto& p : pixels) set(p.row - top, p.col - left, 1);
  }
  bool get(int r, int c) const {
    return r >= 0 && r < height && c >= 0 && c < width && on[static_cast<std::size_t>(r) * width + c];
  }
  void set(int r, int c, std::uint8_t v) {
    if (r >= 0 && r < height && c >= 0 && c < width) on[static_cast<std::size_t>(r) * width + c] = v;
  }
};

// Clockwise from west, image coordinates (row grows downward).
constexpr std::array<std::array<int, 2>, 8> kMoore{
    {{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}}};

int direction_of(int dr, int dc) {
  for (int d = 0; d < 8; ++d) {
    if (kMoore[d][0] == dr && kMoore[d][1] == dc) return d;
  }
  return 0;
}

/// Moore-neighbour trace of the outer boundary, local coordinates.
std::vector<Pixel> trace_contour(const LocalShape& s) {
  Pixel start{-1, -1};
  for (int r = 0; r < s.height && start.row < 0; ++r) {
    for (int c = 0; c < s.width; ++c) {
      if (s.get(r, c)) {
        start = {r, c};
        break;
      }
    }
  }
  std::vector<Pixel> contour{start};
  Pixel p = start;
  int back = 0;  // west of the first pixel is background
  const int start_back = back;
  const std::size_t limit = 4 * s.on.size() + 8;
  for (std::size_t iter = 0; iter < limit; ++iter) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (s.get(p.row + kMoore[d][0], p.col + kMoore[d][1])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    const Pixel next{p.row + kMoore[found][0], p.col + kMoore[found][1]};
    const int prev = (found + 7) % 8;
    const Pixel back_abs{p.row + kMoore[prev][0], p.col + kMoore[prev][1]};
    back = direction_of(back_abs.row - next.row, back_abs.col - next.col);
    p = next;
    if (p == start && back == start_back) break;
    if (p == start) {
      // Jacob's criterion can miss when entering the start from another side;
      // stop once the first move would repeat.
      int probe = -1;
      for (int k = 1; k <= 8; ++k) {
        const int d = (back + k) % 8;
        if (s.get(p.row + kMoore[d][0], p.col + kMoore[d][1])) {
          probe = d;
          break;
        }
      }
      if (contour.size() > 1 && probe >= 0 &&
          Pixel{p.row + kMoore[probe][0], p.col + kMoore[probe][1]} == contour[1]) {
        break;
      }
    }
    contour.push_back(p);
  }
  return contour;
}

struct Defect {
  double depth = 0.0;
  Pixel deepest;
};

/// Convexity defects of the traced contour against its hull (pixel centres).
std::vector<Defect> convexity_defects(const std::vector<Pixel>& contour) {
  std::vector<Point2> pts;
  pts.reserve(contour.size());
  for (const auto& p : contour) pts.push_back({static_cast<double>(p.col), static_cast<double>(p.row)});
  const auto hull = convex_hull(pts);
  std::vector<Defect> defects;
  if (hull.size() < 3) return defects;
  std::vector<std::size_t> idx;
  for (const auto& v : hull) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].x == v.x && pts[i].y == v.y) {
        idx.push_back(i);
        break;
      }
    }
  }
  std::sort(idx.begin(), idx.end());
  const std::size_t n = pts.size();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t a = idx[k];
    const std::size_t b = idx[(k + 1) % idx.size()];
    const double ax = pts[a].x, ay = pts[a].y, bx = pts[b].x, by = pts[b].y;
    const double len = std::hypot(bx - ax, by - ay);
    if (len <= 0.0) continue;
    Defect d;
    for (std::size_t i = (a + 1) % n; i != b; i = (i + 1) % n) {
      const double dist = std::abs((bx - ax) * (pts[i].y - ay) - (by - ay) * (pts[i].x - ax)) / len;
      if (dist > d.depth) {
        d.depth = dist;
        d.deepest = contour[i];
      }
    }
    if (d.depth > 0.0) defects.push_back(d);
  }
  std::sort(defects.begin(), defects.end(), [](const Defect& x, const Defect& y) { return x.depth > y.depth; });
  return defects;
}

/// 4-connected digital segment, so that it separates 8-connected regions.
std::vector<Pixel> four_connected_line(Pixel a, Pixel b) {
  std::vector<Pixel> out{a};
  int r = a.row, c = a.col;
  const int dr = std::abs(b.row - r), dc = std::abs(b.col - c);
  const int sr = r < b.row ? 1 : -1, sc = c < b.col ? 1 : -1;
  int err = dc - dr;
  while (r != b.row || c != b.col) {
    const int e2 = 2 * err;
    const bool step_c = e2 > -dr;
    const bool step_r = e2 < dc;
    if (step_c && step_r) {
      // Break the diagonal into two axis steps.
      c += sc;
      err -= dr;
      out.push_back({r, c});
      r += sr;
      err += dc;
    } else if (step_c) {
      c += sc;
      err -= dr;
    } else {
      r += sr;
      err += dc;
    }
    out.push_back({r, c});
  }
  return out;
}

std::vector<std::vector<Pixel>> local_components(const LocalShape& s) {
  BinaryMask bin(s.width, s.height);
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) bin.at(r, c) = s.get(r, c) ? 1 : 0;
  }
  auto groups = instance_pixels(connected_components(bin));
  std::vector<std::vector<Pixel>> out;
  for (auto& g : groups) {
    if (g.empty()) continue;
    for (auto& p : g) {
      p.row += s.top;
      p.col += s.left;
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::vector<Pixel>> split_recursive(const std::vector<Pixel>& pixels, const MorphConfig& cfg,
                                                int depth) {
  const std::vector<std::vector<Pixel>> unchanged{pixels};
  if (depth >= cfg.max_split_depth) return unchanged;
  if (static_cast<std::int64_t>(pixels.size()) < 2LL * cfg.min_area) return unchanged;
  if (region_props_of(1, pixels).solidity >= cfg.solidity_cutoff) return unchanged;

  LocalShape shape(pixels);
  const auto defects = convexity_defects(trace_contour(shape));
  if (defects.size() < 2 || defects[1].depth < cfg.min_concavity_depth) return unchanged;

  Pixel a = defects[0].deepest, b = defects[1].deepest;
  const double len = std::hypot(b.row - a.row, b.col - a.col);
  if (len <= 0.0) return unchanged;
  const double ur = (b.row - a.row) / len, uc = (b.col - a.col) / len;
  const Pixel a_ext{static_cast<int>(std::lround(a.row - 2 * ur)), static_cast<int>(std::lround(a.col - 2 * uc))};
  const Pixel b_ext{static_cast<int>(std::lround(b.row + 2 * ur)), static_cast<int>(std::lround(b.col + 2 * uc))};
  for (const auto& p : four_connected_line(a_ext, b_ext)) shape.set(p.row, p.col, 0);

  auto pieces = local_components(shape);
  std::erase_if(pieces, [&](const auto& g) { return static_cast<int>(g.size()) < cfg.min_area; });
  if (pieces.size() < 2) return unchanged;

  std::vector<std::vector<Pixel>> out;
  for (const auto& piece : pieces) {
    for (auto& sub : split_recursive(piece, cfg, depth + 1)) out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace

std::vector<std::vector<Pixel>> split_concave(const std::vector<Pixel>& pixels, const MorphConfig& cfg) {
  if (pixels.empty()) return {};
  return split_recursive(pixels, cfg, 0);
}

InstanceMask morph_refine(const BinaryMask& binary, const MorphConfig& cfg) {
  const auto filled = fill_holes(binary);
  const auto groups = instance_pixels(connected_components(filled));
  std::vector<std::vector<std::vector<Pixel>>> split(groups.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t label = 1; label < groups.size(); ++label) {
    if (static_cast<int>(groups[label].size()) >= cfg.min_area) split[label] = split_concave(groups[label], cfg);
  }
  BinaryMask kept(binary.width(), binary.height());
  for (const auto& pieces : split) {
    for (const auto& piece : pieces) {
      for (const auto& p : piece) kept.at(p.row, p.col) = 1;
    }
  }
  return connected_components(kept);
}

}  // namespace lgnh::localproc
