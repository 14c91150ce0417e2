#pragma once

#include <vector>

#include "lgnh/nuseghop/nuseghop.hpp"

namespace lgnh::nuseghop::detail {

/// Planar float maps covering rows [row0, row1) of a width x height image.
/// Reads outside the image reflect; reads outside the band are a bug.
class Band {
 public:
  Band() = default;
  Band(int channels, int width, int height, int row0, int row1);

  int channels() const { return channels_; }
  int row0() const { return row0_; }
  int row1() const { return row1_; }
  bool empty() const { return data_.empty(); }

  float* row(int ch, int r) {
    return data_.data() + (static_cast<std::size_t>(ch) * (row1_ - row0_) + (r - row0_)) * width_;
  }
  float at(int ch, int r, int c) const {
    r = reflect_index(r, height_);
    c = reflect_index(c, width_);
    return data_[(static_cast<std::size_t>(ch) * (row1_ - row0_) + (r - row0_)) * width_ + c];
  }

 private:
  int channels_ = 0, width_ = 0, height_ = 0, row0_ = 0, row1_ = 0;
  std::vector<float> data_;
};

/// Window geometry derived from the configuration.
struct Geometry {
  int radius;    // half window
  int half1;     // half layer-1 filter
  int pool;
  int pooled;    // S2
  int half2;     // half layer-2 filter

  explicit Geometry(const NuSegHopConfig& cfg)
      : radius(cfg.window / 2), half1(cfg.filter1 / 2), pool(cfg.pool), pooled(cfg.pooled_size()),
        half2(cfg.filter2 / 2) {}

  int l1_window() const { return (2 * radius + 1) * (2 * radius + 1); }
  int l2_window() const { return pooled * pooled; }
  /// Offset of pooled grid index i relative to the centre pixel.
  int grid_offset(int i) const { return -radius + pool * i; }
};

/// Layer-1 outputs for image rows [r0, r1).
Band layer1_band(const HsiImage& hsi, const SaabKernel& kernel, const Geometry& g, int r0, int r1);
/// Max-pooled layer-1 maps for rows [r0, r1); `l1` must cover r0 .. r1+pool-1.
Band pooled_band(const Band& l1, int width, int height, const Geometry& g, int r0, int r1);
/// Channel-wise layer-2 outputs of one pooled channel.
Band layer2_band(const Band& pooled, int parent, const SaabKernel& kernel, int width, int height, const Geometry& g,
                 int r0, int r1);

/// The 3 x f x f cuboid around (r, c) in (dy, dx, channel) order.
void layer1_cuboid(const HsiImage& hsi, const Geometry& g, int r, int c, double* out);
void layer2_cuboid(const Band& pooled, int parent, const Geometry& g, int r, int c, double* out);

/// Spatial window of a layer-1 channel (radius^2 layout) or a layer-2 channel
/// (pooled grid layout).
void layer1_window(const Band& l1, int ch, const Geometry& g, int r, int c, float* out);
void layer2_window(const Band& l2, int ch, const Geometry& g, int r, int c, float* out);

/// Projects a spatial window with a spectral (offset) kernel, writing
/// `kernel.ac_count()` values.
void spectral_project(const float* window, const SaabKernel& kernel, float* out);

/// Every feature of the model in canonical order.
std::vector<FeatureRef> all_features(const NuSegHopModel& model);

/// Computed maps around a set of rows. `l2` is indexed by parent; entries may
/// be empty when no requested feature needs them.
struct MapSet {
  Band l1;
  Band pooled;
  std::vector<Band> l2;
};

/// Maps covering features for output rows [r0, r1).
MapSet build_maps(const HsiImage& hsi, const NuSegHopModel& model, const std::vector<bool>& parents_needed, int r0,
                  int r1);

/// Evaluates `refs` (sorted by global index) at (r, c).
void evaluate_refs(const MapSet& maps, const NuSegHopModel& model, const std::vector<FeatureRef>& refs, int r, int c,
                   float* out);

}  // namespace lgnh::nuseghop::detail
