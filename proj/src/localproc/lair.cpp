#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgnh/localproc/localproc.hpp"

namespace lgnh::localproc {

std::array<double, 6> lair_feature(const std::vector<Pixel>& pixels, const HsiImage& hsi) {
  std::array<double, 6> f{};
  const double n = static_cast<double>(pixels.size());
  for (int ch = 0; ch < 3; ++ch) {
    double sum = 0.0, sq = 0.0;
    for (const auto& p : pixels) {
      const double v = hsi.at(p.row, p.col, ch);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    f[ch] = mean;
    f[3 + ch] = std::sqrt(std::max(0.0, sq / n - mean * mean));
  }
  return f;
}

double lair_similarity(std::span<const double> reference, std::span<const double> query, double nu) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) d2 += (query[i] - reference[i]) * (query[i] - reference[i]);
  return std::exp(-nu * d2);
}

InstanceMask lair_filter(const InstanceMask& mask, const HsiImage& hsi, const LairConfig& cfg) {
  require_same_shape(mask, hsi, "lair_filter mask vs image");
  const auto groups = instance_pixels(mask);
  const auto rows = partition_axis(mask.height(), cfg.patch_size);
  const auto cols = partition_axis(mask.width(), cfg.patch_size);
  auto locate = [](const std::vector<std::pair<int, int>>& axis, double v) {
    for (std::size_t i = 0; i < axis.size(); ++i) {
      if (v < axis[i].second) return i;
    }
    return axis.size() - 1;
  };

  // Instances are assigned to the patch holding their centroid.
  std::vector<std::vector<std::int32_t>> members(rows.size() * cols.size());
  std::vector<std::int64_t> area(groups.size(), 0);
  for (std::size_t label = 1; label < groups.size(); ++label) {
    if (groups[label].empty()) continue;
    const auto props = region_props_of(static_cast<std::int32_t>(label), groups[label]);
    area[label] = props.area;
    members[locate(rows, props.centroid_row) * cols.size() + locate(cols, props.centroid_col)].push_back(
        static_cast<std::int32_t>(label));
  }

  std::vector<std::uint8_t> removed(groups.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t patch = 0; patch < members.size(); ++patch) {
    auto ids = members[patch];
    std::sort(ids.begin(), ids.end(), [&](auto a, auto b) { return area[a] < area[b] || (area[a] == area[b] && a < b); });
    const auto n_query = static_cast<std::size_t>(std::floor(cfg.size_percentile_split * ids.size()));
    if (ids.size() - n_query < 2) continue;

    std::vector<std::array<double, 6>> feats;
    feats.reserve(ids.size());
    for (auto id : ids) feats.push_back(lair_feature(groups[id], hsi));
    for (int d = 0; d < 6; ++d) {
      double lo = feats[0][d], hi = feats[0][d];
      for (const auto& f : feats) {
        lo = std::min(lo, f[d]);
        hi = std::max(hi, f[d]);
      }
      for (auto& f : feats) f[d] = hi > lo ? (f[d] - lo) / (hi - lo) : 0.0;
    }
    std::array<double, 6> reference{};
    for (std::size_t i = n_query; i < ids.size(); ++i) {
      for (int d = 0; d < 6; ++d) reference[d] += feats[i][d];
    }
    for (auto& v : reference) v /= static_cast<double>(ids.size() - n_query);
    for (std::size_t i = 0; i < n_query; ++i) {
      if (lair_similarity(reference, feats[i], cfg.nu) < cfg.similarity_threshold) removed[ids[i]] = 1;
    }
  }

  InstanceMask out = mask;
  for (auto& v : out.values()) {
    if (v > 0 && removed[v]) v = 0;
  }
  return out;
}

}  // namespace lgnh::localproc
