#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lgnh/core/error.hpp"
#include "lgnh/core/raster.hpp"
#include "lgnh/globalproc/globalproc.hpp"
#include "lgnh/localproc/localproc.hpp"
#include "lgnh/metrics/metrics.hpp"
#include "lgnh/nuseghop/nuseghop.hpp"
#include "lgnh/preprocess/preprocess.hpp"
#include "lgnh/synth/synth.hpp"

namespace lgnh::pipeline {

struct StageToggles {
  /// Global histogram equalization of the H image.
  bool equalize = false;
  /// PQR projection; off uses a fixed lightness conversion.
  bool pqr = true;
  bool morph = true;
  bool lair = true;
  /// Off passes the pseudolabel straight through as a 0/1 heatmap.
  bool nuseghop = true;
  bool lmd = true;
  bool watershed = true;
  bool instance_filter = true;
  bool operator==(const StageToggles&) const = default;
};

struct PipelineConfig {
  preprocess::StainOptions stain;
  localproc::ThresholdConfig threshold;
  localproc::MorphConfig morph;
  localproc::LairConfig lair;
  nuseghop::NuSegHopConfig nuseghop;
  globalproc::GlobalConfig global;
  synth::SceneSpec synth;
  StageToggles stages;
  /// Level at which the heatmap is cut into instances before confident
  /// filtering.
  double heatmap_level = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

std::string format_config(const PipelineConfig& cfg);
/// Starts from defaults; keys absent from the text keep their default.
PipelineConfig parse_config(const std::string& text);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);
PipelineConfig load_config(const std::filesystem::path& path);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  InstanceMask mask;
  Heatmap heatmap;
  InstanceMask pseudolabel;
  RgbTile h_image;
  RgbTile equalized;
  BinaryMask threshold_map;
  /// After morphology, before LAIR.
  InstanceMask refined;
  InstanceMask confident;
  Heatmap p_prime;
  globalproc::SeedSet seeds;
  InstanceMask watershed;
  /// Before the instance filter.
  InstanceMask merged;
  std::vector<std::int32_t> filtered_out;
  std::vector<StageTiming> timings;
  double total_seconds = 0.0;
  std::size_t parameter_count = 0;
  /// A degenerate-input fallback was taken somewhere.
  bool fallback = false;
  std::vector<std::string> warnings;
};

/// A failure inside one stage. `input` is set when the cause was an
/// InputError.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, bool input)
      : Error(stage + ": " + what), stage_(std::move(stage)), input_(input) {}
  const std::string& stage() const { return stage_; }
  bool input() const { return input_; }

 private:
  std::string stage_;
  bool input_;
};

PipelineResult run_pipeline(const RgbTile& tile, const PipelineConfig& cfg);

struct TileReport {
  std::string name;
  metrics::EvalReport report;
};

struct EvalSummary {
  std::vector<TileReport> tiles;
  metrics::EvalReport mean;
  /// Population standard deviation; tp/fp/fn hold totals in `mean` and zero here.
  metrics::EvalReport stddev;
};

/// Aggregates a list of per-tile reports.
EvalSummary summarize(std::vector<TileReport> tiles);
/// Pairs every PNG in either directory by file name. Throws InputError listing
/// every unpaired file, DimensionMismatch naming the tile on a size clash.
EvalSummary eval_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);
std::string summary_json(const EvalSummary& summary);

/// Without ground truth: predicted instance boundaries in green over the tile.
/// With ground truth: true-positive pixels white, false positives yellow,
/// false negatives blue.
RgbTile overlay_render(const RgbTile& tile, const InstanceMask& pred, const InstanceMask* gt = nullptr);

}  // namespace lgnh::pipeline
