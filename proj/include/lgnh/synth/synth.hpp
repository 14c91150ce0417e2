#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "lgnh/core/keyvalue.hpp"
#include "lgnh/core/raster.hpp"

namespace lgnh::synth {

struct SceneSpec {
  int width = 256;
  int height = 256;
  int count_min = 30;
  int count_max = 40;
  /// Semi-major axis range in pixels.
  double radius_min = 5.0;
  double radius_max = 8.0;
  double eccentricity_min = 0.0;
  double eccentricity_max = 0.6;
  std::array<double, 3> hematoxylin_mean{0.35, 0.25, 0.55};
  double hematoxylin_jitter = 0.05;
  std::array<double, 3> eosin_mean{0.92, 0.75, 0.80};
  double eosin_jitter = 0.05;
  double noise_sigma = 0.03;
  double blur_sigma = 1.0;
  /// Chance that a nucleus is placed overlapping an earlier unpaired one.
  double overlap_probability = 0.0;
  std::uint64_t seed = 1;

  /// Throws InputError on out-of-range fields.
  void validate() const;
  bool operator==(const SceneSpec&) const = default;
};

struct SynthTile {
  RgbTile rgb;
  InstanceMask mask;
  int requested = 0;
  int placed = 0;
  /// Set when fewer nuclei than requested could be placed.
  bool packing_limited = false;
};

SynthTile generate_tile(const SceneSpec& spec);

/// Low jitter, no overlap.
SceneSpec easy_spec(std::uint64_t seed);
/// Every nucleus that can find an unpaired partner overlaps it.
SceneSpec dumbbell_spec(std::uint64_t seed);
/// Easy layout with the nucleus-to-background colour contrast halved.
SceneSpec faint_spec(std::uint64_t seed);

/// Registers every field under `prefix` + field name.
void bind_fields(KeyValueSchema& schema, SceneSpec& spec, const std::string& prefix = "");

/// key = value text, one field per line.
std::string format_spec(const SceneSpec& spec);
SceneSpec parse_spec(const std::string& text);
void save_spec(const SceneSpec& spec, const std::filesystem::path& path);
SceneSpec load_spec(const std::filesystem::path& path);

}  // namespace lgnh::synth
