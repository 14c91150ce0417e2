#include "maps.hpp"

#include <algorithm>

namespace lgnh::nuseghop::detail {

Band::Band(int channels, int width, int height, int row0, int row1)
    : channels_(channels), width_(width), height_(height), row0_(row0), row1_(row1),
      data_(static_cast<std::size_t>(channels) * (row1 - row0) * width, 0.0f) {}

void layer1_cuboid(const HsiImage& hsi, const Geometry& g, int r, int c, double* out) {
  const int w = hsi.width(), h = hsi.height();
  for (int dy = -g.half1; dy <= g.half1; ++dy) {
    const int rr = reflect_index(r + dy, h);
    for (int dx = -g.half1; dx <= g.half1; ++dx) {
      const int cc = reflect_index(c + dx, w);
      for (int ch = 0; ch < 3; ++ch) *out++ = hsi.at(rr, cc, ch);
    }
  }
}

void layer2_cuboid(const Band& pooled, int parent, const Geometry& g, int r, int c, double* out) {
  for (int di = -g.half2; di <= g.half2; ++di) {
    for (int dj = -g.half2; dj <= g.half2; ++dj) *out++ = pooled.at(parent, r + g.pool * di, c + g.pool * dj);
  }
}

Band layer1_band(const HsiImage& hsi, const SaabKernel& kernel, const Geometry& g, int r0, int r1) {
  const int w = hsi.width();
  Band band(kernel.output_size(), w, hsi.height(), r0, r1);
  std::vector<double> cuboid(kernel.input_size()), res(kernel.output_size());
  for (int r = r0; r < r1; ++r) {
    for (int c = 0; c < w; ++c) {
      layer1_cuboid(hsi, g, r, c, cuboid.data());
      apply_saab(cuboid, kernel, res);
      for (int ch = 0; ch < kernel.output_size(); ++ch) band.row(ch, r)[c] = static_cast<float>(res[ch]);
    }
  }
  return band;
}

Band pooled_band(const Band& l1, int width, int height, const Geometry& g, int r0, int r1) {
  Band band(l1.channels(), width, height, r0, r1);
  for (int ch = 0; ch < l1.channels(); ++ch) {
    for (int r = r0; r < r1; ++r) {
      float* out = band.row(ch, r);
      for (int c = 0; c < width; ++c) {
        float m = l1.at(ch, r, c);
        for (int a = 0; a < g.pool; ++a) {
          for (int b = 0; b < g.pool; ++b) m = std::max(m, l1.at(ch, r + a, c + b));
        }
        out[c] = m;
      }
    }
  }
  return band;
}

Band layer2_band(const Band& pooled, int parent, const SaabKernel& kernel, int width, int height, const Geometry& g,
                 int r0, int r1) {
  Band band(kernel.output_size(), width, height, r0, r1);
  std::vector<double> cuboid(kernel.input_size()), res(kernel.output_size());
  for (int r = r0; r < r1; ++r) {
    for (int c = 0; c < width; ++c) {
      layer2_cuboid(pooled, parent, g, r, c, cuboid.data());
      apply_saab(cuboid, kernel, res);
      for (int ch = 0; ch < kernel.output_size(); ++ch) band.row(ch, r)[c] = static_cast<float>(res[ch]);
    }
  }
  return band;
}

void layer1_window(const Band& l1, int ch, const Geometry& g, int r, int c, float* out) {
  for (int dy = -g.radius; dy <= g.radius; ++dy) {
    for (int dx = -g.radius; dx <= g.radius; ++dx) *out++ = l1.at(ch, r + dy, c + dx);
  }
}

void layer2_window(const Band& l2, int ch, const Geometry& g, int r, int c, float* out) {
  for (int i = 0; i < g.pooled; ++i) {
    for (int j = 0; j < g.pooled; ++j) *out++ = l2.at(ch, r + g.grid_offset(i), c + g.grid_offset(j));
  }
}

namespace {

float spectral_component(const float* window, const SaabKernel& kernel, int k) {
  double acc = 0.0;
  for (int j = 0; j < kernel.input_size(); ++j) acc += kernel.weights(k, j) * (window[j] - kernel.offset[j]);
  return static_cast<float>(acc);
}

}  // namespace

void spectral_project(const float* window, const SaabKernel& kernel, float* out) {
  for (int k = 0; k < kernel.ac_count(); ++k) out[k] = spectral_component(window, kernel, k);
}

std::vector<FeatureRef> all_features(const NuSegHopModel& model) {
  const Geometry g(model.config);
  std::vector<FeatureRef> out;
  auto push = [&](FeatureKind kind, int parent, int child, int index) {
    out.push_back({kind, static_cast<std::int16_t>(parent), static_cast<std::int16_t>(child),
                   static_cast<std::int16_t>(index), static_cast<std::int32_t>(out.size())});
  };
  for (int p = 0; p < static_cast<int>(model.spectral1.size()); ++p) {
    for (int i = 0; i < g.l1_window(); ++i) push(FeatureKind::L1Spatial, p, 0, i);
    for (int k = 0; k < model.spectral1[p].ac_count(); ++k) push(FeatureKind::L1Spectral, p, 0, k);
  }
  for (int p = 0; p < static_cast<int>(model.spectral2.size()); ++p) {
    for (int q = 0; q < static_cast<int>(model.spectral2[p].size()); ++q) {
      for (int i = 0; i < g.l2_window(); ++i) push(FeatureKind::L2Spatial, p, q, i);
      for (int k = 0; k < model.spectral2[p][q].ac_count(); ++k) push(FeatureKind::L2Spectral, p, q, k);
    }
  }
  return out;
}

MapSet build_maps(const HsiImage& hsi, const NuSegHopModel& model, const std::vector<bool>& parents_needed, int r0,
                  int r1) {
  const Geometry g(model.config);
  const int w = hsi.width(), h = hsi.height();
  auto clip = [h](int v) { return std::clamp(v, 0, h); };
  const int halo2 = g.radius + g.pool;
  const int halo_pool = halo2 + g.pool * g.half2;
  MapSet maps;
  maps.l1 = layer1_band(hsi, model.layer1, g, clip(r0 - halo_pool), clip(r1 + halo_pool + g.pool));
  maps.pooled = pooled_band(maps.l1, w, h, g, clip(r0 - halo_pool), clip(r1 + halo_pool));
  maps.l2.resize(model.layer2.size());
  for (std::size_t p = 0; p < model.layer2.size(); ++p) {
    if (!parents_needed[p]) continue;
    maps.l2[p] = layer2_band(maps.pooled, static_cast<int>(p), model.layer2[p], w, h, g, clip(r0 - halo2),
                             clip(r1 + halo2));
  }
  return maps;
}

void evaluate_refs(const MapSet& maps, const NuSegHopModel& model, const std::vector<FeatureRef>& refs, int r, int c,
                   float* out) {
  const Geometry g(model.config);
  const int side = 2 * g.radius + 1;
  thread_local std::vector<float> window;
  window.resize(std::max(g.l1_window(), g.l2_window()));
  int cached_kind = -1, cached_parent = -1, cached_child = -1;
  for (const auto& ref : refs) {
    switch (ref.kind) {
      case FeatureKind::L1Spatial:
        *out++ = maps.l1.at(ref.parent, r + ref.index / side - g.radius, c + ref.index % side - g.radius);
        break;
      case FeatureKind::L2Spatial:
        *out++ = maps.l2[ref.parent].at(ref.child, r + g.grid_offset(ref.index / g.pooled),
                                        c + g.grid_offset(ref.index % g.pooled));
        break;
      case FeatureKind::L1Spectral:
      case FeatureKind::L2Spectral: {
        const int kind = static_cast<int>(ref.kind);
        if (kind != cached_kind || ref.parent != cached_parent || ref.child != cached_child) {
          if (ref.kind == FeatureKind::L1Spectral) {
            layer1_window(maps.l1, ref.parent, g, r, c, window.data());
          } else {
            layer2_window(maps.l2[ref.parent], ref.child, g, r, c, window.data());
          }
          cached_kind = kind;
          cached_parent = ref.parent;
          cached_child = ref.child;
        }
        const auto& kernel =
            ref.kind == FeatureKind::L1Spectral ? model.spectral1[ref.parent] : model.spectral2[ref.parent][ref.child];
        *out++ = spectral_component(window.data(), kernel, ref.index);
        break;
      }
    }
  }
}

}  // namespace lgnh::nuseghop::detail
