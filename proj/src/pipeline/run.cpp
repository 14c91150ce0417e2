#include <chrono>
#include <utility>

#include "lgnh/core/image_ops.hpp"
#include "lgnh/pipeline/pipeline.hpp"

namespace lgnh::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

class StageRunner {
 public:
  explicit StageRunner(PipelineResult& result) : result_(result) {}

  template <typename F>
  void operator()(const char* name, F&& body) {
    const auto t0 = Clock::now();
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const InputError& e) {
      throw StageError(name, e.what(), true);
    } catch (const std::exception& e) {
      throw StageError(name, e.what(), false);
    }
    result_.timings.push_back({name, std::chrono::duration<double>(Clock::now() - t0).count()});
  }

  /// Records a disabled stage so every run reports the same stage list.
  void skip(const char* name) { result_.timings.push_back({name, 0.0}); }

 private:
  PipelineResult& result_;
};

Heatmap as_heatmap(const InstanceMask& mask) {
  Heatmap hm(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) hm[i] = mask[i] > 0 ? 1.0 : 0.0;
  return hm;
}

// One marker per connected region of {P' >= t_p}, at its most probable pixel.
globalproc::SeedSet region_peaks(const Heatmap& p_prime, double t_p) {
  const auto regions = connected_components(threshold_above(p_prime, t_p));
  const auto groups = instance_pixels(regions);
  globalproc::SeedSet seeds;
  for (std::size_t l = 1; l < groups.size(); ++l) {
    if (groups[l].empty()) continue;
    const Pixel* best = &groups[l].front();
    for (const auto& p : groups[l]) {
      if (p_prime.at(p.row, p.col) > p_prime.at(best->row, best->col)) best = &p;
    }
    seeds.push_back({best->row, best->col, 0.0, p_prime.at(best->row, best->col)});
  }
  return seeds;
}

}  // namespace

PipelineResult run_pipeline(const RgbTile& tile, const PipelineConfig& cfg) {
  const auto start = Clock::now();
  PipelineResult r;
  StageRunner stage(r);
  HsiImage hsi;

  stage("config", [&] {
    cfg.validate();
    tile.validate();
  });

  stage("preprocess", [&] {
    try {
      r.h_image = preprocess::stain_separate(tile, cfg.stain).h_image;
    } catch (const ConstantTile& e) {
      r.h_image = tile;
      r.fallback = true;
      r.warnings.push_back(std::string("stain separation skipped: ") + e.what());
    }
    r.equalized = cfg.stages.equalize ? preprocess::hist_equalize(r.h_image) : r.h_image;
    hsi = rgb_to_hsi(r.equalized);
  });

  stage("threshold", [&] {
    const auto project = cfg.stages.pqr ? preprocess::make_pqr_projector(r.equalized)
                                        : preprocess::make_lightness_projector(r.equalized);
    r.threshold_map = localproc::threshold_multiscale(tile.width(), tile.height(), project, cfg.threshold);
  });

  if (cfg.stages.morph) {
    stage("morph", [&] { r.refined = localproc::morph_refine(r.threshold_map, cfg.morph); });
  } else {
    stage.skip("morph");
    r.refined = connected_components(r.threshold_map);
  }

  if (cfg.stages.lair) {
    stage("lair", [&] { r.pseudolabel = localproc::lair_filter(r.refined, hsi, cfg.lair); });
  } else {
    stage.skip("lair");
    r.pseudolabel = r.refined;
  }

  std::optional<nuseghop::NuSegHopModel> model;
  if (cfg.stages.nuseghop) {
    stage("nuseghop_fit", [&] {
      try {
        model = nuseghop::fit_model(hsi, r.pseudolabel, cfg.nuseghop, cfg.seed);
        r.parameter_count = model->parameter_count();
      } catch (const DegeneratePseudolabel& e) {
        r.fallback = true;
        r.warnings.push_back(std::string("pixel classifier skipped: ") + e.what());
      } catch (const EmptyKernel& e) {
        r.fallback = true;
        r.warnings.push_back(std::string("pixel classifier skipped: ") + e.what());
      }
    });
    stage("nuseghop_predict", [&] { r.heatmap = model ? nuseghop::predict_heatmap(hsi, *model) : as_heatmap(r.pseudolabel); });
  } else {
    stage.skip("nuseghop_fit");
    stage.skip("nuseghop_predict");
    r.heatmap = as_heatmap(r.pseudolabel);
  }

  stage("confident", [&] {
    const auto instances = globalproc::probability_instances(r.heatmap, cfg.heatmap_level);
    auto split = globalproc::filter_confident(r.heatmap, instances, cfg.global.confident_mean_prob);
    r.confident = std::move(split.confident);
    r.p_prime = std::move(split.p_prime);
  });

  if (cfg.stages.lmd) {
    stage("lmd", [&] { r.seeds = globalproc::detect_log_maxima(r.p_prime, cfg.global); });
  } else {
    stage.skip("lmd");
  }

  if (cfg.stages.watershed) {
    stage("watershed", [&] {
      if (!cfg.stages.lmd) r.seeds = region_peaks(r.p_prime, cfg.global.t_p);
      r.watershed =
          globalproc::watershed_refine(r.p_prime, r.seeds, cfg.global.t_p / 2.0, cfg.global.gradient_elevation);
    });
  } else {
    stage.skip("watershed");
    r.watershed = connected_components(threshold_above(r.p_prime, cfg.global.t_p));
  }

  stage("merge", [&] {
    r.merged = globalproc::binarize_merge(r.p_prime, r.watershed, r.confident, cfg.global.t_p, cfg.global.min_area);
  });

  if (cfg.stages.instance_filter) {
    stage("instance_filter", [&] {
      auto f = globalproc::instance_classify_filter(r.merged, hsi, cfg.global, cfg.seed + 1);
      if (!f.warning.empty()) r.warnings.push_back(f.warning);
      r.filtered_out = std::move(f.removed);
      r.mask = relabel_sequential(f.mask);
    });
  } else {
    stage.skip("instance_filter");
    r.mask = relabel_sequential(r.merged);
  }

  r.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

}  // namespace lgnh::pipeline
