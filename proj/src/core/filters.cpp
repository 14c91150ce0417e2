#include "lgnh/core/filters.hpp"

#include <cmath>

namespace lgnh {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

std::vector<double> gaussian_second_derivative_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  const auto g = gaussian_kernel(sigma);
  std::vector<double> k(g.size());
  const double s2 = sigma * sigma;
  double mean = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = g[i + radius] * (i * i - s2) / (s2 * s2);
    mean += k[i + radius];
  }
  // Zero DC response so constant images give exactly zero curvature.
  mean /= static_cast<double>(k.size());
  for (auto& v : k) v -= mean;
  return k;
}

GrayMap convolve_separable(const Raster<double>& src, int channel, const std::vector<double>& row_kernel,
                           const std::vector<double>& col_kernel) {
  const int w = src.width(), h = src.height();
  const int rr = static_cast<int>(row_kernel.size() / 2);
  const int cr = static_cast<int>(col_kernel.size() / 2);
  GrayMap tmp(w, h), out(w, h);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -rr; k <= rr; ++k) acc += row_kernel[k + rr] * src.at(r, reflect_index(c + k, w), channel);
      tmp.at(r, c) = acc;
    }
  }
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -cr; k <= cr; ++k) acc += col_kernel[k + cr] * tmp.at(reflect_index(r + k, h), c);
      out.at(r, c) = acc;
    }
  }
  return out;
}

GrayMap gaussian_blur(const Raster<double>& src, int channel, double sigma) {
  const auto k = gaussian_kernel(sigma);
  return convolve_separable(src, channel, k, k);
}

}  // namespace lgnh
