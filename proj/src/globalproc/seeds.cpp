#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <tuple>

#include "lgnh/core/error.hpp"
#include "lgnh/core/filters.hpp"
#include "lgnh/globalproc/globalproc.hpp"

namespace lgnh::globalproc {

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbours{
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

}  // namespace

void GlobalConfig::validate() const {
  auto prob = [](double p) { return p > 0.0 && p < 1.0; };
  if (!prob(confident_mean_prob) || !prob(t_p) || !prob(removal_prob_cutoff) || !(log_blob_threshold > 0.0)) {
    throw InputError("global probabilities must lie in (0,1)");
  }
  if (!(sigma_min > 0.0 && sigma_min < sigma_max) || sigma_steps < 2) throw InputError("bad LoG sigma ladder");
  if (!(svm_c > 0.0) || svm_gamma < 0.0 || min_instances < 1 || min_area < 0) {
    throw InputError("bad instance classifier settings");
  }
}

InstanceMask probability_instances(const Heatmap& heatmap, double level) {
  BinaryMask bin(heatmap.width(), heatmap.height());
  for (std::size_t i = 0; i < bin.pixel_count(); ++i) bin[i] = heatmap[i] > level ? 1 : 0;
  return connected_components(bin);
}

ConfidentSplit filter_confident(const Heatmap& heatmap, const InstanceMask& mask, double cutoff) {
  require_same_shape(heatmap, mask, "filter_confident heatmap vs mask");
  const auto groups = instance_pixels(mask);
  ConfidentSplit out{InstanceMask(mask.width(), mask.height()), heatmap};
  for (std::size_t label = 1; label < groups.size(); ++label) {
    if (groups[label].empty()) continue;
    double sum = 0.0;
    for (const auto& p : groups[label]) sum += heatmap.at(p.row, p.col);
    if (sum / static_cast<double>(groups[label].size()) > cutoff) {
      for (const auto& p : groups[label]) {
        out.confident.at(p.row, p.col) = static_cast<std::int32_t>(label);
        out.p_prime.at(p.row, p.col) = 0.0;
      }
    }
  }
  return out;
}

std::vector<double> sigma_ladder(const GlobalConfig& cfg) {
  std::vector<double> out(cfg.sigma_steps);
  const double ratio = std::pow(cfg.sigma_max / cfg.sigma_min, 1.0 / (cfg.sigma_steps - 1));
  for (int i = 0; i < cfg.sigma_steps; ++i) out[i] = cfg.sigma_min * std::pow(ratio, i);
  out.back() = cfg.sigma_max;
  return out;
}

SeedSet detect_log_maxima(const Heatmap& p_prime, const GlobalConfig& cfg) {
  const auto ladder = sigma_ladder(cfg);
  const int w = p_prime.width(), h = p_prime.height();
  const int n = static_cast<int>(ladder.size());
  std::vector<GrayMap> resp;
  for (double s : ladder) {
    const auto g = gaussian_kernel(s);
    const auto d2 = gaussian_second_derivative_kernel(s);
    const auto xx = convolve_separable(p_prime, 0, d2, g);
    const auto yy = convolve_separable(p_prime, 0, g, d2);
    GrayMap r(w, h);
    for (std::size_t i = 0; i < r.pixel_count(); ++i) r[i] = -s * s * (xx[i] + yy[i]);
    resp.push_back(std::move(r));
  }

  SeedSet found;
  for (int k = 0; k < n; ++k) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double v = resp[k].at(r, c);
        if (!(v > cfg.log_blob_threshold)) continue;
        bool peak = true;
        for (int dk = -1; dk <= 1 && peak; ++dk) {
          const int kk = k + dk;
          if (kk < 0 || kk >= n) continue;
          for (int dr = -1; dr <= 1 && peak; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
              const int rr = r + dr, cc = c + dc;
              if ((dk | dr | dc) == 0 || rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
              if (resp[kk].at(rr, cc) > v) {
                peak = false;
                break;
              }
            }
          }
        }
        if (peak) found.push_back({r, c, ladder[k], v});
      }
    }
  }

  std::sort(found.begin(), found.end(), [](const Seed& a, const Seed& b) {
    return std::tie(b.response, a.row, a.col, a.sigma) < std::tie(a.response, b.row, b.col, b.sigma);
  });
  SeedSet kept;
  for (const auto& s : found) {
    const bool close = std::any_of(kept.begin(), kept.end(), [&](const Seed& k) {
      return std::hypot(k.row - s.row, k.col - s.col) < std::max(k.sigma, s.sigma);
    });
    if (!close) kept.push_back(s);
  }
  return kept;
}

InstanceMask watershed_refine(const Heatmap& p_prime, const SeedSet& seeds, double flood_floor,
                              bool gradient_elevation) {
  const int w = p_prime.width(), h = p_prime.height();
  InstanceMask labels(w, h);
  if (seeds.empty()) return labels;

  GrayMap elevation(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (gradient_elevation) {
        const double gx = 0.5 * (p_prime.at(r, reflect_index(c + 1, w)) - p_prime.at(r, reflect_index(c - 1, w)));
        const double gy = 0.5 * (p_prime.at(reflect_index(r + 1, h), c) - p_prime.at(reflect_index(r - 1, h), c));
        elevation.at(r, c) = std::hypot(gx, gy);
      } else {
        elevation.at(r, c) = 1.0 - p_prime.at(r, c);
      }
    }
  }

  // Priority flood; ties resolve first-in first-out.
  using Entry = std::tuple<double, std::uint64_t, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<std::uint8_t> state(static_cast<std::size_t>(w) * h, 0);  // 1 queued, 2 settled
  std::uint64_t seq = 0;
  auto in_flood = [&](int r, int c) { return p_prime.at(r, c) >= flood_floor; };
  auto push_neighbours = [&](int r, int c) {
    for (auto [dr, dc] : kNeighbours) {
      const int rr = r + dr, cc = c + dc;
      if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
      const auto idx = static_cast<std::size_t>(rr) * w + cc;
      if (state[idx] != 0 || !in_flood(rr, cc)) continue;
      state[idx] = 1;
      heap.emplace(elevation[idx], seq++, static_cast<int>(idx));
    }
  };

  std::int32_t next = 1;
  std::vector<int> markers;
  for (const auto& s : seeds) {
    if (s.row < 0 || s.row >= h || s.col < 0 || s.col >= w) throw InputError("seed outside the heatmap");
    const auto idx = static_cast<std::size_t>(s.row) * w + s.col;
    if (!in_flood(s.row, s.col) || state[idx] != 0) continue;
    state[idx] = 2;
    labels[idx] = next++;
    markers.push_back(static_cast<int>(idx));
  }
  for (int idx : markers) push_neighbours(idx / w, idx % w);

  constexpr std::int32_t kLine = -1;
  while (!heap.empty()) {
    const int idx = std::get<2>(heap.top());
    heap.pop();
    const int r = idx / w, c = idx % w;
    std::int32_t label = 0;
    bool conflict = false;
    for (auto [dr, dc] : kNeighbours) {
      const int rr = r + dr, cc = c + dc;
      if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
      const auto l = labels.at(rr, cc);
      if (l <= 0) continue;
      if (label == 0) {
        label = l;
      } else if (l != label) {
        conflict = true;
      }
    }
    state[idx] = 2;
    if (conflict || label == 0) {
      labels[idx] = kLine;
      continue;
    }
    labels[idx] = label;
    push_neighbours(r, c);
  }
  for (auto& v : labels.values()) v = std::max(v, 0);
  return relabel_sequential(labels);
}

namespace {

/// 8-connected pieces of the pixels with `keep` set, never crossing labels.
std::vector<std::vector<Pixel>> labelled_pieces(const InstanceMask& labels, const std::vector<std::uint8_t>& keep) {
  const int w = labels.width(), h = labels.height();
  std::vector<std::uint8_t> seen(keep.size(), 0);
  std::vector<std::vector<Pixel>> out;
  std::vector<int> stack;
  for (std::size_t start = 0; start < keep.size(); ++start) {
    if (!keep[start] || seen[start] || labels[start] <= 0) continue;
    const auto label = labels[start];
    std::vector<Pixel> piece;
    seen[start] = 1;
    stack.push_back(static_cast<int>(start));
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int r = idx / w, c = idx % w;
      piece.push_back({r, c});
      for (auto [dr, dc] : kNeighbours) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const auto n = static_cast<std::size_t>(rr) * w + cc;
        if (keep[n] && !seen[n] && labels[n] == label) {
          seen[n] = 1;
          stack.push_back(static_cast<int>(n));
        }
      }
    }
    out.push_back(std::move(piece));
  }
  return out;
}

}  // namespace

InstanceMask binarize_merge(const Heatmap& p_prime, const InstanceMask& watershed, const InstanceMask& confident,
                            double t_p, int min_area) {
  require_same_shape(p_prime, watershed, "binarize_merge heatmap vs watershed");
  require_same_shape(p_prime, confident, "binarize_merge heatmap vs confident");
  InstanceMask out(p_prime.width(), p_prime.height());
  std::vector<std::uint8_t> keep(out.pixel_count());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = (p_prime[i] >= t_p && confident[i] <= 0) ? 1 : 0;
  std::int32_t next = 1;
  for (const auto& piece : labelled_pieces(watershed, keep)) {
    if (static_cast<int>(piece.size()) < min_area) continue;
    for (const auto& p : piece) out.at(p.row, p.col) = next;
    ++next;
  }
  const auto groups = instance_pixels(confident);
  for (std::size_t label = 1; label < groups.size(); ++label) {
    if (groups[label].empty()) continue;
    for (const auto& p : groups[label]) out.at(p.row, p.col) = next;
    ++next;
  }
  return out;
}

}  // namespace lgnh::globalproc
