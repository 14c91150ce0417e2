#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "lgnh/core/io.hpp"
#include "lgnh/core/parallel.hpp"
#include "lgnh/pipeline/pipeline.hpp"
#include "lgnh/synth/synth.hpp"

namespace fs = std::filesystem;
using namespace lgnh;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitFallback = 3;

struct SegmentArgs {
  std::vector<std::string> inputs;
  std::string out_dir = ".";
  std::string config;
  std::optional<std::uint64_t> seed;
  bool dump_pseudolabel = false;
  bool dump_heatmap = false;
  bool dump_seeds = false;
  bool quiet = false;
  bool equalize = false;
  std::map<std::string, bool> disable;
};

void write_seeds(const fs::path& path, const globalproc::SeedSet& seeds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "row,col,sigma,response\n";
  for (const auto& s : seeds) out << s.row << ',' << s.col << ',' << s.sigma << ',' << s.response << '\n';
}

struct TileOutcome {
  int code = kExitOk;
  std::string log;
};

TileOutcome segment_one(const fs::path& input, const SegmentArgs& args, const pipeline::PipelineConfig& cfg) {
  TileOutcome o;
  try {
    const auto tile = io::read_rgb_png(input);
    const auto r = pipeline::run_pipeline(tile, cfg);
    const fs::path dir(args.out_dir);
    const auto stem = input.stem().string();
    io::write_mask_png(dir / (stem + ".png"), r.mask);
    // Side outputs live in subfolders so the output directory stays pairable with eval.
    if (args.dump_pseudolabel) io::write_mask_png(dir / "pseudolabel" / (stem + ".png"), r.pseudolabel);
    if (args.dump_heatmap) {
      io::write_heatmap(dir / "heatmap" / (stem + ".lgnh"), r.heatmap);
      io::write_heatmap_preview(dir / "heatmap" / (stem + ".png"), r.heatmap);
    }
    if (args.dump_seeds) write_seeds(dir / "seeds" / (stem + ".csv"), r.seeds);

    char line[160];
    std::snprintf(line, sizeof(line), "%s: %zu instances, %.2f s, %zu parameters\n", input.filename().c_str(),
                  r.mask.instance_count(), r.total_seconds, r.parameter_count);
    o.log = line;
    if (!args.quiet) {
      for (const auto& t : r.timings) {
        std::snprintf(line, sizeof(line), "  %-18s %8.3f s\n", t.stage.c_str(), t.seconds);
        o.log += line;
      }
    }
    for (const auto& w : r.warnings) o.log += "  warning: " + w + "\n";
    if (r.fallback) o.code = kExitFallback;
  } catch (const pipeline::StageError& e) {
    o.log = input.string() + ": " + e.what() + "\n";
    o.code = e.input() ? kExitInput : kExitFailure;
  } catch (const InputError& e) {
    o.log = input.string() + ": " + e.what() + "\n";
    o.code = kExitInput;
  } catch (const std::exception& e) {
    o.log = input.string() + ": " + e.what() + "\n";
    o.code = kExitFailure;
  }
  return o;
}

int run_segment(const SegmentArgs& args) {
  auto cfg = args.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  cfg.stages.equalize = cfg.stages.equalize || args.equalize;
  auto off = [&](const char* name) { return args.disable.at(name); };
  cfg.stages.pqr = cfg.stages.pqr && !off("pqr");
  cfg.threshold.midpoint_only = cfg.threshold.midpoint_only || off("adaptive");
  cfg.stages.morph = cfg.stages.morph && !off("morph");
  cfg.stages.lair = cfg.stages.lair && !off("lair");
  cfg.stages.nuseghop = cfg.stages.nuseghop && !off("nuseghop");
  cfg.stages.lmd = cfg.stages.lmd && !off("lmd");
  cfg.stages.watershed = cfg.stages.watershed && !off("watershed");
  cfg.stages.instance_filter = cfg.stages.instance_filter && !off("instance-filter");
  cfg.validate();
  const fs::path out(args.out_dir);
  fs::create_directories(out);
  if (args.dump_pseudolabel) fs::create_directories(out / "pseudolabel");
  if (args.dump_heatmap) fs::create_directories(out / "heatmap");
  if (args.dump_seeds) fs::create_directories(out / "seeds");

  const int n = static_cast<int>(args.inputs.size());
  std::vector<TileOutcome> outcomes(n);
  const int workers = std::max(1, std::min(thread_cap(), n));
  // Tiles in parallel; stage-level regions then run single-threaded inside.
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int i = 0; i < n; ++i) outcomes[i] = segment_one(args.inputs[i], args, cfg);

  int code = kExitOk;
  for (const auto& o : outcomes) {
    std::cout << o.log;
    if (o.code == kExitFailure || (o.code == kExitInput && code != kExitFailure)) {
      code = o.code;
    } else if (o.code == kExitFallback && code == kExitOk) {
      code = kExitFallback;
    }
  }
  return code;
}

int run_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& json_path) {
  const auto s = pipeline::eval_directories(pred_dir, gt_dir);
  std::printf("%-28s %7s %7s %7s %7s %7s %7s\n", "tile", "dice", "f1", "aji", "pq", "dq", "sq");
  for (const auto& t : s.tiles) {
    const auto& r = t.report;
    std::printf("%-28s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f\n", t.name.c_str(), r.dice, r.f1, r.aji, r.pq, r.dq, r.sq);
  }
  const auto& m = s.mean;
  const auto& d = s.stddev;
  std::printf("mean +- std (%zu tiles)\n", s.tiles.size());
  std::printf("  dice %.4f +- %.4f\n  f1   %.4f +- %.4f\n  aji  %.4f +- %.4f\n", m.dice, d.dice, m.f1, d.f1, m.aji,
              d.aji);
  std::printf("  pq   %.4f +- %.4f\n  dq   %.4f +- %.4f\n  sq   %.4f +- %.4f\n", m.pq, d.pq, m.dq, d.dq, m.sq, d.sq);
  if (!json_path.empty()) write_text_file(json_path, pipeline::summary_json(s) + "\n");
  return kExitOk;
}

synth::SceneSpec resolve_spec(const std::string& name) {
  if (fs::exists(name)) return synth::load_spec(name);
  if (name == "default") return synth::SceneSpec{};
  if (name == "easy") return synth::easy_spec(1);
  if (name == "dumbbell") return synth::dumbbell_spec(1);
  if (name == "faint") return synth::faint_spec(1);
  throw InputError("no such spec file or preset: " + name);
}

int run_synth(const std::string& spec_name, int count, const std::string& out_dir) {
  if (count < 1) throw InputError("-n must be at least 1");
  const auto base = resolve_spec(spec_name);
  const fs::path root(out_dir);
  for (const char* sub : {"images", "masks", "specs"}) fs::create_directories(root / sub);
  for (int i = 0; i < count; ++i) {
    auto spec = base;
    spec.seed = base.seed + static_cast<std::uint64_t>(i);
    const auto t = synth::generate_tile(spec);
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d", i);
    io::write_rgb_png(root / "images" / (std::string(name) + ".png"), t.rgb);
    io::write_mask_png(root / "masks" / (std::string(name) + ".png"), t.mask);
    synth::save_spec(spec, root / "specs" / (std::string(name) + ".spec"));
    if (t.packing_limited) {
      std::cerr << name << ": placed " << t.placed << " of " << t.requested << " nuclei\n";
    }
  }
  std::cout << "wrote " << count << " tiles to " << root.string() << "\n";
  return kExitOk;
}

int run_overlay(const std::string& tile_path, const std::string& pred_path, const std::string& gt_path,
                const std::string& out) {
  const auto tile = io::read_rgb_png(tile_path);
  const auto pred = io::read_mask_png(pred_path);
  if (gt_path.empty()) {
    io::write_rgb_png(out, pipeline::overlay_render(tile, pred));
  } else {
    const auto gt = io::read_mask_png(gt_path);
    io::write_rgb_png(out, pipeline::overlay_render(tile, pred, &gt));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised nuclei segmentation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (overrides LGNH_THREADS)")->check(CLI::NonNegativeNumber);

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Segment one or more RGB tiles");
  segment->add_option("inputs", seg.inputs, "Input PNG tiles")->required();
  segment->add_option("-o,--out", seg.out_dir, "Output directory");
  segment->add_option("--config", seg.config, "Configuration file");
  segment->add_option("--seed", seg.seed, "Random seed");
  segment->add_flag("--dump-pseudolabel", seg.dump_pseudolabel, "Also write pseudolabel masks to <out>/pseudolabel");
  segment->add_flag("--dump-heatmap", seg.dump_heatmap, "Also write heatmaps to <out>/heatmap (raw float and preview PNG)");
  segment->add_flag("--dump-seeds", seg.dump_seeds, "Also write watershed seeds to <out>/seeds as CSV");
  segment->add_flag("--equalize", seg.equalize, "Histogram-equalize the H image before thresholding");
  segment->add_flag("-q,--quiet", seg.quiet, "Omit per-stage timings");
  segment->add_option("--threads", threads, "Worker thread cap")->check(CLI::NonNegativeNumber);
  for (const char* stage : {"pqr", "adaptive", "morph", "lair", "nuseghop", "lmd", "watershed", "instance-filter"}) {
    seg.disable[stage] = false;
    segment->add_flag(std::string("--no-") + stage, seg.disable[stage], std::string("Disable ") + stage);
  }

  std::string pred_dir, gt_dir, json_path;
  auto* eval = app.add_subcommand("eval", "Score predicted masks against ground truth");
  eval->add_option("pred-dir", pred_dir)->required();
  eval->add_option("gt-dir", gt_dir)->required();
  eval->add_option("--json", json_path, "Write the report as JSON");

  std::string spec_name, synth_out;
  int count = 1;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic tiles with ground truth");
  synth_cmd->add_option("spec", spec_name, "Spec file or preset (default, easy, dumbbell, faint)")->required();
  synth_cmd->add_option("-n", count, "Number of tiles");
  synth_cmd->add_option("-o,--out", synth_out, "Output directory")->required();

  std::string tile_path, pred_path, overlay_gt, overlay_out;
  auto* overlay = app.add_subcommand("overlay", "Render predictions over a tile");
  overlay->add_option("tile", tile_path)->required();
  overlay->add_option("pred", pred_path)->required();
  overlay->add_option("gt", overlay_gt);
  overlay->add_option("-o,--out", overlay_out)->required();

  std::string config_out;
  auto* config = app.add_subcommand("config", "Write the default configuration");
  config->add_option("-o,--out", config_out, "Destination (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  apply_thread_env();
  if (threads > 0) set_thread_cap(threads);

  try {
    if (*segment) return run_segment(seg);
    if (*eval) return run_eval(pred_dir, gt_dir, json_path);
    if (*synth_cmd) return run_synth(spec_name, count, synth_out);
    if (*overlay) return run_overlay(tile_path, pred_path, overlay_gt, overlay_out);
    if (*config) {
      const auto text = pipeline::format_config(pipeline::PipelineConfig{});
      if (config_out.empty()) {
        std::cout << text;
      } else {
        write_text_file(config_out, text);
      }
      return kExitOk;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
