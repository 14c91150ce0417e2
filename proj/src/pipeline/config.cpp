#include <cmath>

#include "lgnh/core/keyvalue.hpp"
#include "lgnh/pipeline/pipeline.hpp"

namespace lgnh::pipeline {

namespace {

KeyValueSchema schema_of(PipelineConfig& c) {
  KeyValueSchema k;
  k.bind("seed", c.seed);
  k.bind("heatmap_level", c.heatmap_level);

  k.bind("stage.equalize", c.stages.equalize);
  k.bind("stage.pqr", c.stages.pqr);
  k.bind("stage.morph", c.stages.morph);
  k.bind("stage.lair", c.stages.lair);
  k.bind("stage.nuseghop", c.stages.nuseghop);
  k.bind("stage.lmd", c.stages.lmd);
  k.bind("stage.watershed", c.stages.watershed);
  k.bind("stage.instance_filter", c.stages.instance_filter);

  k.bind("stain.lower_percentile", c.stain.lower_percentile);
  k.bind("stain.upper_percentile", c.stain.upper_percentile);
  k.bind("stain.transparent_od", c.stain.transparent_od);
  k.bind("stain.single_stain_ratio", c.stain.single_stain_ratio);

  k.bind("threshold.patch_size", c.threshold.patch_size);
  k.bind("threshold.fine_patch_size", c.threshold.fine_patch_size);
  k.bind("threshold.coarse_patch_size", c.threshold.coarse_patch_size);
  k.bind("threshold.fine_first", c.threshold.fine_first);
  k.bind("threshold.lambda", c.threshold.lambda);
  k.bind("threshold.midpoint_only", c.threshold.midpoint_only);
  k.bind("threshold.min_contrast", c.threshold.min_contrast);
  k.bind("threshold.smoothing_width", c.threshold.criteria.smoothing_width);
  k.bind("threshold.min_prominence", c.threshold.criteria.min_prominence);
  k.bind("threshold.min_separation_bins", c.threshold.criteria.min_separation_bins);
  k.bind("threshold.min_valley_depth", c.threshold.criteria.min_valley_depth);
  k.bind("threshold.min_mode_fraction", c.threshold.criteria.min_mode_fraction);

  k.bind("morph.min_area", c.morph.min_area);
  k.bind("morph.solidity_cutoff", c.morph.solidity_cutoff);
  k.bind("morph.max_split_depth", c.morph.max_split_depth);
  k.bind("morph.min_concavity_depth", c.morph.min_concavity_depth);

  k.bind("lair.patch_size", c.lair.patch_size);
  k.bind("lair.nu", c.lair.nu);
  k.bind("lair.similarity_threshold", c.lair.similarity_threshold);
  k.bind("lair.size_percentile_split", c.lair.size_percentile_split);

  auto& n = c.nuseghop;
  k.bind("nuseghop.window", n.window);
  k.bind("nuseghop.filter1", n.filter1);
  k.bind("nuseghop.pool", n.pool);
  k.bind("nuseghop.filter2", n.filter2);
  k.bind("nuseghop.energy_threshold", n.energy_threshold);
  k.bind("nuseghop.max_dims", n.max_dims);
  k.bind("nuseghop.n_selected", n.n_selected);
  k.bind("nuseghop.n_samples", n.n_samples);
  k.bind("nuseghop.trees", n.classifier.trees);
  k.bind("nuseghop.max_depth", n.classifier.max_depth);
  k.bind("nuseghop.learning_rate", n.classifier.learning_rate);
  k.bind("nuseghop.l2", n.classifier.l2);
  k.bind("nuseghop.min_child_hessian", n.classifier.min_child_hessian);
  k.bind("nuseghop.max_bins", n.classifier.max_bins);

  auto& g = c.global;
  k.bind("global.confident_mean_prob", g.confident_mean_prob);
  k.bind("global.log_blob_threshold", g.log_blob_threshold);
  k.bind("global.sigma_min", g.sigma_min);
  k.bind("global.sigma_max", g.sigma_max);
  k.bind("global.sigma_steps", g.sigma_steps);
  k.bind("global.t_p", g.t_p);
  k.bind("global.min_area", g.min_area);
  k.bind("global.gradient_elevation", g.gradient_elevation);
  k.bind("global.svm_gamma", g.svm_gamma);
  k.bind("global.svm_c", g.svm_c);
  k.bind("global.removal_prob_cutoff", g.removal_prob_cutoff);
  k.bind("global.min_instances", g.min_instances);

  synth::bind_fields(k, c.synth, "synth.");
  return k;
}

void require(bool ok, const char* what) {
  if (!ok) throw InputError(std::string("config: ") + what);
}

}  // namespace

void PipelineConfig::validate() const {
  require(heatmap_level > 0.0 && heatmap_level < 1.0, "heatmap_level must lie in (0,1)");
  require(stain.lower_percentile >= 0.0 && stain.lower_percentile < stain.upper_percentile &&
              stain.upper_percentile <= 100.0,
          "stain percentiles must satisfy 0 <= lower < upper <= 100");
  require(stain.transparent_od >= 0.0 && stain.single_stain_ratio >= 0.0, "stain thresholds must be non-negative");
  require(threshold.patch_size > 0 && threshold.fine_patch_size > 0 && threshold.coarse_patch_size > 0,
          "threshold patch sizes must be positive");
  require(threshold.min_contrast >= 0.0, "threshold.min_contrast must be non-negative");
  require(threshold.lambda >= 0.0 && threshold.lambda <= 1.0, "threshold.lambda must lie in [0,1]");
  require(threshold.criteria.smoothing_width >= 1 && threshold.criteria.min_separation_bins >= 1 &&
              threshold.criteria.min_prominence >= 0.0 && threshold.criteria.min_valley_depth >= 0.0 &&
              threshold.criteria.min_valley_depth <= 1.0 && threshold.criteria.min_mode_fraction >= 0.0 &&
              threshold.criteria.min_mode_fraction < 0.5,
          "bad bimodality criteria");
  require(morph.min_area >= 0 && morph.max_split_depth >= 0 && morph.min_concavity_depth >= 0.0,
          "morph settings must be non-negative");
  require(morph.solidity_cutoff > 0.0 && morph.solidity_cutoff <= 1.0, "morph.solidity_cutoff must lie in (0,1]");
  require(lair.patch_size > 0 && lair.nu > 0.0, "lair patch size and nu must be positive");
  require(lair.similarity_threshold >= 0.0 && lair.similarity_threshold <= 1.0,
          "lair.similarity_threshold must lie in [0,1]");
  require(lair.size_percentile_split > 0.0 && lair.size_percentile_split < 1.0,
          "lair.size_percentile_split must lie in (0,1)");
  nuseghop.validate();
  global.validate();
  synth.validate();
}

std::string format_config(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  return schema_of(copy).format();
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  schema_of(cfg).parse(text);
  cfg.validate();
  return cfg;
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  write_text_file(path.string(), format_config(cfg));
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path.string())); }

}  // namespace lgnh::pipeline
