#include <algorithm>
#include <cmath>

#include "lgnh/core/error.hpp"
#include "lgnh/globalproc/globalproc.hpp"

namespace lgnh::globalproc {

namespace {

double histogram_entropy(const std::vector<double>& values) {
  std::array<std::int64_t, 256> bins{};
  for (double v : values) ++bins[Histogram256::bin_of(v)];
  double h = 0.0;
  const double n = static_cast<double>(values.size());
  for (auto b : bins) {
    if (b == 0) continue;
    const double p = static_cast<double>(b) / n;
    h -= p * std::log2(p);
  }
  return h;
}

int quantize(double v) { return std::clamp(static_cast<int>(std::floor(v * kGlszmLevels)), 0, kGlszmLevels - 1); }

}  // namespace

std::vector<std::vector<std::int64_t>> glszm(const std::vector<Pixel>& pixels, const HsiImage& hsi) {
  if (pixels.empty()) throw InputError("glszm of an empty instance");
  int top = pixels[0].row, left = pixels[0].col, bottom = top, right = left;
  for (const auto& p : pixels) {
    top = std::min(top, p.row);
    left = std::min(left, p.col);
    bottom = std::max(bottom, p.row);
    right = std::max(right, p.col);
  }
  const int w = right - left + 1, h = bottom - top + 1;
  std::vector<int> level(static_cast<std::size_t>(w) * h, -1);
  for (const auto& p : pixels) {
    level[static_cast<std::size_t>(p.row - top) * w + (p.col - left)] = quantize(hsi.at(p.row, p.col, 2));
  }
  std::vector<std::vector<std::int64_t>> matrix(kGlszmLevels, std::vector<std::int64_t>(pixels.size(), 0));
  std::vector<std::uint8_t> seen(level.size(), 0);
  std::vector<int> stack;
  for (std::size_t start = 0; start < level.size(); ++start) {
    if (level[start] < 0 || seen[start]) continue;
    const int g = level[start];
    std::int64_t size = 0;
    seen[start] = 1;
    stack.push_back(static_cast<int>(start));
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      ++size;
      const int r = idx / w, c = idx % w;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const auto n = static_cast<std::size_t>(rr) * w + cc;
          if (!seen[n] && level[n] == g) {
            seen[n] = 1;
            stack.push_back(static_cast<int>(n));
          }
        }
      }
    }
    ++matrix[g][size - 1];
  }
  return matrix;
}

std::array<double, 16> glszm_features(const std::vector<std::vector<std::int64_t>>& matrix) {
  double nz = 0.0, np = 0.0;
  for (const auto& row : matrix) {
    for (std::size_t s = 0; s < row.size(); ++s) {
      nz += static_cast<double>(row[s]);
      np += static_cast<double>(row[s]) * static_cast<double>(s + 1);
    }
  }
  std::array<double, 16> f{};
  if (nz <= 0.0) return f;
  const std::size_t sizes = matrix.empty() ? 0 : matrix[0].size();
  std::vector<double> by_level(matrix.size(), 0.0), by_size(sizes, 0.0);
  double mu_i = 0.0, mu_j = 0.0;
  for (std::size_t g = 0; g < matrix.size(); ++g) {
    for (std::size_t s = 0; s < sizes; ++s) {
      const double count = static_cast<double>(matrix[g][s]);
      if (count == 0.0) continue;
      const double i = static_cast<double>(g + 1), j = static_cast<double>(s + 1);
      const double p = count / nz;
      by_level[g] += count;
      by_size[s] += count;
      mu_i += p * i;
      mu_j += p * j;
      f[0] += count / (j * j);
      f[1] += count * j * j;
      f[10] += count / (i * i);
      f[11] += count * i * i;
      f[12] += count / (i * i * j * j);
      f[13] += count * i * i / (j * j);
      f[14] += count * j * j / (i * i);
      f[15] += count * i * i * j * j;
      f[9] -= p * std::log2(p + 2.2e-16);
    }
  }
  double gln = 0.0, szn = 0.0;
  for (double v : by_level) gln += v * v;
  for (double v : by_size) szn += v * v;
  double glv = 0.0, zv = 0.0;
  for (std::size_t g = 0; g < matrix.size(); ++g) {
    for (std::size_t s = 0; s < sizes; ++s) {
      if (matrix[g][s] == 0) continue;
      const double p = static_cast<double>(matrix[g][s]) / nz;
      glv += p * (static_cast<double>(g + 1) - mu_i) * (static_cast<double>(g + 1) - mu_i);
      zv += p * (static_cast<double>(s + 1) - mu_j) * (static_cast<double>(s + 1) - mu_j);
    }
  }
  for (int k : {0, 1, 10, 11, 12, 13, 14, 15}) f[k] /= nz;
  f[2] = gln / nz;
  f[3] = gln / (nz * nz);
  f[4] = szn / nz;
  f[5] = szn / (nz * nz);
  f[6] = nz / np;
  f[7] = glv;
  f[8] = zv;
  return f;
}

std::array<double, kInstanceFeatureCount> instance_features(const std::vector<Pixel>& pixels, const HsiImage& hsi) {
  if (pixels.empty()) throw InputError("instance_features of an empty instance");
  std::array<double, kInstanceFeatureCount> out{};
  std::vector<double> values(pixels.size());
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < pixels.size(); ++i) values[i] = hsi.at(pixels[i].row, pixels[i].col, ch);
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (double v : values) {
      const double d = v - mean;
      m2 += d * d;
      m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    const double sd = std::sqrt(m2);
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    double* f = out.data() + 6 * ch;
    f[0] = mean;
    f[1] = sd;
    f[2] = sd > 1e-12 ? m3 / (sd * sd * sd) : 0.0;
    f[3] = *lo;
    f[4] = *hi;
    f[5] = histogram_entropy(values);
  }
  const auto tex = glszm_features(glszm(pixels, hsi));
  std::copy(tex.begin(), tex.end(), out.begin() + 18);
  return out;
}

}  // namespace lgnh::globalproc
