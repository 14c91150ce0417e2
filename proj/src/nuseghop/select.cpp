#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "lgnh/core/error.hpp"
#include "lgnh/nuseghop/nuseghop.hpp"

namespace lgnh::nuseghop {

namespace {

constexpr int kThresholds = 31;

double entropy(double positive, double total) {
  if (total <= 0.0) return 0.0;
  const double p = std::clamp(positive / total, 0.0, 1.0);
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

}  // namespace

double discriminant_loss(std::span<const float> values, std::span<const std::uint8_t> labels) {
  if (values.size() != labels.size() || values.empty()) throw InputError("discriminant_loss: size mismatch");
  const std::size_t n = values.size();
  std::size_t n1 = 0;
  for (auto y : labels) n1 += y ? 1 : 0;
  const std::size_t n0 = n - n1;
  // Each class carries half of the total weight.
  const double w1 = n1 ? 0.5 / n1 : 0.0;
  const double w0 = n0 ? 0.5 / n0 : 0.0;
  const double scale = (n0 && n1) ? 1.0 : 1.0 / static_cast<double>(n);

  float lo_f = values[0], hi_f = values[0];
  for (const float v : values) {
    lo_f = v < lo_f ? v : lo_f;
    hi_f = v > hi_f ? v : hi_f;
  }
  const double lo = lo_f, hi = hi_f;
  const double pos_total = n1 ? (n0 ? 0.5 : 1.0) : 0.0;
  const double none = entropy(pos_total, 1.0);
  if (!(hi > lo)) return none;

  std::array<double, kThresholds> t{};
  const double step = (hi - lo) / (kThresholds + 1);
  for (int i = 0; i < kThresholds; ++i) t[i] = lo + (i + 1) * step;

  // bucket k: values with t[k-1] < v <= t[k]; the last bucket is above t[30].
  std::array<std::array<std::uint32_t, kThresholds + 1>, 2> counts{};
  const double inv = 1.0 / step;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = values[i];
    const double q = (v - lo) * inv;
    int k = std::min(static_cast<int>(q), kThresholds);
    // Exact comparisons only where rounding could move v across a threshold.
    const double frac = q - k;
    if (frac < 1e-6 || frac > 1.0 - 1e-6) {
      k -= k > 0 && v <= t[k - 1];
      k += k < kThresholds && v > t[k];
    }
    ++counts[labels[i] != 0][k];
  }
  const auto& count0 = counts[0];
  const auto& count1 = counts[1];
  std::array<double, kThresholds + 1> pos{}, all{};
  for (int k = 0; k <= kThresholds; ++k) {
    pos[k] = (n0 && n1) ? count1[k] * w1 : count1[k] * scale;
    all[k] = pos[k] + ((n0 && n1) ? count0[k] * w0 : count0[k] * scale);
  }
  double best = none;
  double left_pos = 0.0, left_all = 0.0;
  for (int i = 0; i < kThresholds; ++i) {
    left_pos += pos[i];
    left_all += all[i];
    const double right_all = 1.0 - left_all;
    const double loss = left_all * entropy(left_pos, left_all) + right_all * entropy(pos_total - left_pos, right_all);
    best = std::min(best, loss);
  }
  return best;
}

std::vector<int> select_discriminant(std::span<const float> features, int cols, std::span<const std::uint8_t> labels,
                                     int keep) {
  const std::size_t rows = labels.size();
  if (cols <= 0 || features.size() != rows * cols) throw InputError("select_discriminant: size mismatch");
  std::vector<double> loss(cols);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < cols; ++j) {
    std::vector<float> col(rows);
    for (std::size_t i = 0; i < rows; ++i) col[i] = features[i * cols + j];
    loss[j] = discriminant_loss(col, labels);
  }
  std::vector<int> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return loss[a] < loss[b]; });
  order.resize(std::min(cols, keep));
  return order;
}

}  // namespace lgnh::nuseghop
