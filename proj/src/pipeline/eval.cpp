#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "lgnh/core/io.hpp"
#include "lgnh/pipeline/pipeline.hpp"

namespace lgnh::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr double metrics::EvalReport::*kScores[] = {
    &metrics::EvalReport::dice, &metrics::EvalReport::f1, &metrics::EvalReport::aji,
    &metrics::EvalReport::pq,   &metrics::EvalReport::dq, &metrics::EvalReport::sq,
};

std::set<std::string> png_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::set<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.insert(e.path().filename().string());
  }
  return out;
}

nlohmann::json to_json(const metrics::EvalReport& r) {
  return {{"dice", r.dice}, {"f1", r.f1}, {"aji", r.aji}, {"pq", r.pq}, {"dq", r.dq},
          {"sq", r.sq},     {"tp", r.tp}, {"fp", r.fp},   {"fn", r.fn}};
}

}  // namespace

EvalSummary summarize(std::vector<TileReport> tiles) {
  EvalSummary s;
  s.tiles = std::move(tiles);
  const double n = static_cast<double>(s.tiles.size());
  if (s.tiles.empty()) return s;
  for (const auto& t : s.tiles) {
    for (auto m : kScores) s.mean.*m += t.report.*m / n;
    s.mean.tp += t.report.tp;
    s.mean.fp += t.report.fp;
    s.mean.fn += t.report.fn;
  }
  for (auto m : kScores) {
    double acc = 0.0;
    for (const auto& t : s.tiles) acc += (t.report.*m - s.mean.*m) * (t.report.*m - s.mean.*m);
    s.stddev.*m = std::sqrt(acc / n);
  }
  return s;
}

EvalSummary eval_directories(const fs::path& pred_dir, const fs::path& gt_dir) {
  const auto preds = png_names(pred_dir);
  const auto gts = png_names(gt_dir);
  std::string missing;
  for (const auto& g : gts) {
    if (!preds.count(g)) missing += "\n  missing prediction: " + (pred_dir / g).string();
  }
  for (const auto& p : preds) {
    if (!gts.count(p)) missing += "\n  missing ground truth: " + (gt_dir / p).string();
  }
  if (!missing.empty()) throw InputError("unpaired files:" + missing);
  if (gts.empty()) throw InputError("no PNG masks in " + gt_dir.string());

  std::vector<TileReport> tiles;
  for (const auto& name : gts) {
    const auto gt = io::read_mask_png(gt_dir / name);
    const auto pred = io::read_mask_png(pred_dir / name);
    if (!gt.same_shape(pred)) throw DimensionMismatch(name);
    tiles.push_back({name, metrics::evaluate(gt, pred)});
  }
  return summarize(std::move(tiles));
}

std::string summary_json(const EvalSummary& s) {
  nlohmann::json j;
  j["tiles"] = nlohmann::json::array();
  for (const auto& t : s.tiles) {
    auto e = to_json(t.report);
    e["name"] = t.name;
    j["tiles"].push_back(e);
  }
  j["mean"] = to_json(s.mean);
  j["std"] = to_json(s.stddev);
  return j.dump(2);
}

RgbTile overlay_render(const RgbTile& tile, const InstanceMask& pred, const InstanceMask* gt) {
  require_same_shape(tile, pred, "overlay tile vs prediction");
  if (gt) require_same_shape(tile, *gt, "overlay tile vs ground truth");
  RgbTile out = tile;
  auto paint = [&](int r, int c, double red, double green, double blue) {
    out.at(r, c, 0) = red;
    out.at(r, c, 1) = green;
    out.at(r, c, 2) = blue;
  };
  const int w = tile.width(), h = tile.height();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto p = pred.at(r, c);
      if (gt) {
        const bool g = gt->at(r, c) > 0;
        if (p > 0 && g) {
          paint(r, c, 1.0, 1.0, 1.0);
        } else if (p > 0) {
          paint(r, c, 1.0, 1.0, 0.0);
        } else if (g) {
          paint(r, c, 0.0, 0.0, 1.0);
        }
        continue;
      }
      if (p <= 0) continue;
      bool edge = r == 0 || c == 0 || r == h - 1 || c == w - 1;
      constexpr int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
      for (int k = 0; k < 4 && !edge; ++k) edge = pred.at(r + dr[k], c + dc[k]) != p;
      if (edge) paint(r, c, 0.0, 1.0, 0.0);
    }
  }
  return out;
}

}  // namespace lgnh::pipeline
