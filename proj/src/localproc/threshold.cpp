#include <algorithm>
#include <cmath>
#include <optional>

#include "lgnh/localproc/localproc.hpp"

namespace lgnh::localproc {

namespace {

struct Peak {
  int bin = 0;
  double height = 0.0;
  double prominence = 0.0;
};

std::vector<double> smooth(const Histogram256& hist, int width) {
  const int half = width / 2;
  std::vector<double> out(256);
  for (int i = 0; i < 256; ++i) {
    double acc = 0.0;
    int n = 0;
    for (int j = std::max(0, i - half); j <= std::min(255, i + half); ++j, ++n) acc += hist.bins[j];
    out[i] = acc / n;
  }
  return out;
}

/// Local maxima of s (zero outside the array); plateaus report their middle.
std::vector<Peak> find_peaks(const std::vector<double>& s) {
  const int n = static_cast<int>(s.size());
  auto at = [&](int i) { return (i < 0 || i >= n) ? 0.0 : s[i]; };
  std::vector<Peak> peaks;
  int i = 0;
  while (i < n) {
    if (s[i] > at(i - 1)) {
      int j = i;
      while (j + 1 < n && s[j + 1] == s[i]) ++j;
      if (s[i] > at(j + 1)) {
        const int mid = (i + j) / 2;
        // Prominence against the higher of the two bases.
        double left_min = s[i];
        int k = i - 1;
        for (; k >= 0 && s[k] <= s[i]; --k) left_min = std::min(left_min, s[k]);
        if (k < 0) left_min = 0.0;
        double right_min = s[i];
        k = j + 1;
        for (; k < n && s[k] <= s[i]; ++k) right_min = std::min(right_min, s[k]);
        if (k >= n) right_min = 0.0;
        peaks.push_back({mid, s[i], s[i] - std::max(left_min, right_min)});
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  return peaks;
}

}  // namespace

BimodalFit detect_bimodal(const Histogram256& hist, const BimodalCriteria& criteria) {
  BimodalFit fit;
  const auto s = smooth(hist, criteria.smoothing_width);
  const double top = *std::max_element(s.begin(), s.end());
  if (top <= 0.0) return fit;
  auto peaks = find_peaks(s);
  std::erase_if(peaks, [&](const Peak& p) { return p.prominence < criteria.min_prominence * top; });
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.prominence > b.prominence || (a.prominence == b.prominence && a.bin < b.bin);
  });
  std::vector<Peak> kept;
  for (const auto& p : peaks) {
    const bool far = std::all_of(kept.begin(), kept.end(), [&](const Peak& k) {
      return std::abs(k.bin - p.bin) >= criteria.min_separation_bins;
    });
    if (far) kept.push_back(p);
    if (kept.size() == 2) break;
  }
  if (kept.size() < 2) return fit;
  if (kept[0].bin > kept[1].bin) std::swap(kept[0], kept[1]);
  const auto valley = std::min_element(s.begin() + kept[0].bin, s.begin() + kept[1].bin + 1);
  if (*valley > (1.0 - criteria.min_valley_depth) * std::min(kept[0].height, kept[1].height)) return fit;
  const auto split = static_cast<int>(valley - s.begin());
  double below = 0.0, total = 0.0;
  for (int i = 0; i < 256; ++i) {
    total += hist.bins[i];
    if (i <= split) below += hist.bins[i];
  }
  const double minority = std::min(below, total - below);
  if (minority < criteria.min_mode_fraction * total) return fit;
  fit.t1 = Histogram256::bin_value(kept[0].bin);
  fit.t2 = Histogram256::bin_value(kept[1].bin);
  fit.c1 = kept[0].height / top;
  fit.c2 = kept[1].height / top;
  fit.valid = true;
  return fit;
}

ThresholdResult adaptive_threshold(const BimodalFit& fit, double lambda) {
  ThresholdResult res;
  res.lambda = lambda;
  res.t_o = 0.5 * (fit.t1 + fit.t2);
  // The perpendicular to L12 through (T_o, (c1+c2)/2) has slope
  // -(T2-T1)/(c2-c1); its count=0 intercept follows directly.
  const double y_o = 0.5 * (fit.c1 + fit.c2);
  res.t_c = res.t_o + y_o * (fit.c2 - fit.c1) / (fit.t2 - fit.t1);
  res.t_hat = res.t_o + lambda * (res.t_o - res.t_c);
  const double eps = 1e-9 * (fit.t2 - fit.t1);
  res.t_hat = std::clamp(res.t_hat, fit.t1 + eps, fit.t2 - eps);
  return res;
}

std::vector<std::pair<int, int>> partition_axis(int length, int size) {
  const int pieces = std::max(1, static_cast<int>(std::lround(static_cast<double>(length) / size)));
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < pieces; ++i) {
    const int a = static_cast<int>(static_cast<long long>(i) * length / pieces);
    const int b = static_cast<int>(static_cast<long long>(i + 1) * length / pieces);
    if (b > a) out.emplace_back(a, b);
  }
  return out;
}

namespace {

std::vector<preprocess::Rect> grid(const preprocess::Rect& area, int size) {
  std::vector<preprocess::Rect> out;
  for (auto [r0, r1] : partition_axis(area.height, size)) {
    for (auto [c0, c1] : partition_axis(area.width, size)) {
      out.push_back({area.top + r0, area.left + c0, r1 - r0, c1 - c0});
    }
  }
  return out;
}

/// Square window of `size` centred on `inner`, shifted to stay inside the image.
preprocess::Rect context_rect(const preprocess::Rect& inner, int size, int width, int height) {
  auto place = [size](int start, int len, int limit, int& out_start, int& out_len) {
    out_len = std::min(size, limit);
    out_start = start + len / 2 - out_len / 2;
    out_start = std::clamp(out_start, 0, limit - out_len);
  };
  preprocess::Rect r;
  place(inner.top, inner.height, height, r.top, r.height);
  place(inner.left, inner.width, width, r.left, r.width);
  return r;
}

struct PatchThreshold {
  std::vector<double> values;
  double threshold = 0.0;
  bool valid = false;
};

PatchThreshold evaluate(const preprocess::Rect& rect, const preprocess::PatchProjector& project,
                        const ThresholdConfig& cfg) {
  PatchThreshold pt;
  auto projected = project(rect);
  pt.values = std::move(projected.values);
  if (projected.contrast < cfg.min_contrast) return pt;
  const auto fit = detect_bimodal(build_histogram(pt.values), cfg.criteria);
  if (!fit.valid) return pt;
  pt.valid = true;
  pt.threshold = cfg.midpoint_only ? 0.5 * (fit.t1 + fit.t2) : adaptive_threshold(fit, cfg.lambda).t_hat;
  return pt;
}

/// Thresholds `target` (a sub-rectangle of `source`) with `source`'s result.
void apply(const PatchThreshold& pt, const preprocess::Rect& source, const preprocess::Rect& target,
           BinaryMask& out) {
  for (int r = target.top; r < target.top + target.height; ++r) {
    for (int c = target.left; c < target.left + target.width; ++c) {
      const auto idx = static_cast<std::size_t>(r - source.top) * source.width + (c - source.left);
      out.at(r, c) = pt.values[idx] < pt.threshold ? 1 : 0;
    }
  }
}

}  // namespace

BinaryMask threshold_multiscale(int width, int height, const preprocess::PatchProjector& project,
                                const ThresholdConfig& cfg) {
  BinaryMask out(width, height);
  const auto patches = grid({0, 0, height, width}, cfg.patch_size);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& patch = patches[i];
    const auto base = evaluate(patch, project, cfg);
    if (base.valid) {
      apply(base, patch, patch, out);
      continue;
    }
    const auto context = context_rect(patch, cfg.coarse_patch_size, width, height);
    std::optional<PatchThreshold> coarse;
    auto coarse_result = [&]() -> const PatchThreshold& {
      if (!coarse) coarse = evaluate(context, project, cfg);
      return *coarse;
    };
    if (!cfg.fine_first && coarse_result().valid) {
      apply(*coarse, context, patch, out);
      continue;
    }
    for (const auto& sub : grid(patch, cfg.fine_patch_size)) {
      const auto fine = evaluate(sub, project, cfg);
      if (fine.valid) {
        apply(fine, sub, sub, out);
      } else if (cfg.fine_first && coarse_result().valid) {
        apply(*coarse, context, sub, out);
      }
      // Otherwise this piece stays background.
    }
  }
  return out;
}

BinaryMask threshold_multiscale(const GrayMap& pmap, const ThresholdConfig& cfg) {
  return threshold_multiscale(pmap.width(), pmap.height(), preprocess::make_map_projector(pmap), cfg);
}

}  // namespace lgnh::localproc
