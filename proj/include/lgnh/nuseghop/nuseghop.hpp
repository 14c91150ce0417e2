#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "lgnh/core/image_ops.hpp"
#include "lgnh/core/raster.hpp"
#include "lgnh/nuseghop/gbdt.hpp"
#include "lgnh/nuseghop/saab.hpp"

namespace lgnh::nuseghop {

struct NuSegHopConfig {
  int window = 9;
  int filter1 = 3;
  int pool = 2;
  int filter2 = 3;
  double energy_threshold = 1e-3;
  int max_dims = 10;
  int n_selected = 100;
  /// Sampled training pixels per fit, split evenly between the two classes.
  int n_samples = 50000;
  GbdtConfig classifier;

  void validate() const;
  /// Side of the pooled grid, S2.
  int pooled_size() const { return (window + pool - 1) / pool; }
  bool operator==(const NuSegHopConfig&) const = default;
};

enum class FeatureKind : std::uint8_t { L1Spatial = 0, L1Spectral = 1, L2Spatial = 2, L2Spectral = 3 };

/// Locates one scalar of the concatenated feature vector.
/// Layer 1: `parent` is the layer-1 channel (0 = DC) and `child` is unused.
/// Layer 2: `parent` is the layer-1 channel and `child` the layer-2 channel.
/// `index` is the window position for spatial features and the component
/// for spectral ones.
struct FeatureRef {
  FeatureKind kind = FeatureKind::L1Spatial;
  std::int16_t parent = 0;
  std::int16_t child = 0;
  std::int16_t index = 0;
  /// Position in the full concatenated vector.
  std::int32_t global_index = 0;

  bool operator==(const FeatureRef&) const = default;
};

struct NuSegHopModel {
  NuSegHopConfig config;
  SaabKernel layer1;
  /// One per layer-1 output channel, DC included. A kernel without rows means
  /// the pooled map had no AC energy and only its DC is kept.
  std::vector<SaabKernel> layer2;
  /// Per layer-1 channel; empty when the spatial map had no variance.
  std::vector<SaabKernel> spectral1;
  /// Indexed [parent][child].
  std::vector<std::vector<SaabKernel>> spectral2;
  std::vector<FeatureRef> selected;
  std::int64_t total_features = 0;
  GradientBoostedTrees classifier;

  int layer1_channels() const { return layer1.output_size(); }
  /// Learned projection weights over all Saab and PCA stages.
  std::size_t parameter_count() const;
  /// Throws InputError when internal dimensions disagree.
  void validate() const;
  bool operator==(const NuSegHopModel&) const = default;
};

/// One training image with its pseudolabel.
struct TrainingTile {
  const HsiImage* hsi = nullptr;
  const InstanceMask* pseudolabel = nullptr;
};

/// Per-tile self-supervised fit. Throws DegeneratePseudolabel when either
/// class is missing, EmptyKernel when the image carries no texture.
NuSegHopModel fit_model(const HsiImage& hsi, const InstanceMask& pseudolabel, const NuSegHopConfig& cfg,
                        std::uint64_t seed);
/// Pools samples over several tiles (n_samples split evenly across tiles).
NuSegHopModel fit_model(std::span<const TrainingTile> tiles, const NuSegHopConfig& cfg, std::uint64_t seed);

Heatmap predict_heatmap(const HsiImage& hsi, const NuSegHopModel& model);

/// Full concatenated feature vectors at the given pixels, in canonical order.
/// Mostly for inspection and tests; `predict_heatmap` only computes the
/// selected entries.
std::vector<float> extract_features(const HsiImage& hsi, const NuSegHopModel& model, std::span<const Pixel> pixels);
/// Selected features only, rows x selected.size().
std::vector<float> extract_selected(const HsiImage& hsi, const NuSegHopModel& model, std::span<const Pixel> pixels);

/// Class-balanced weighted binary cross-entropy of the best split over 31
/// evenly spaced thresholds. Lower is more discriminant.
double discriminant_loss(std::span<const float> values, std::span<const std::uint8_t> labels);
/// Indices of the `keep` lowest-loss columns of a row-major rows x cols
/// matrix, ordered by loss then index.
std::vector<int> select_discriminant(std::span<const float> features, int cols, std::span<const std::uint8_t> labels,
                                     int keep = 100);

void save_model(const NuSegHopModel& model, std::ostream& out);
NuSegHopModel load_model(std::istream& in);
void save_model(const NuSegHopModel& model, const std::filesystem::path& path);
NuSegHopModel load_model(const std::filesystem::path& path);

}  // namespace lgnh::nuseghop
