#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "lgnh/core/error.hpp"
#include "lgnh/nuseghop/nuseghop.hpp"
#include "maps.hpp"

namespace lgnh::nuseghop {

using detail::Band;
using detail::Geometry;

void NuSegHopConfig::validate() const {
  if (window < 3 || window % 2 == 0) throw InputError("window must be odd and >= 3");
  if (filter1 < 1 || filter1 % 2 == 0 || filter2 < 1 || filter2 % 2 == 0) throw InputError("filters must be odd");
  if (pool < 1) throw InputError("pool must be >= 1");
  if (!(energy_threshold > 0.0 && energy_threshold < 1.0)) throw InputError("energy threshold must be in (0,1)");
  if (max_dims < 1 || n_selected < 1 || n_samples < 2) throw InputError("nuseghop counts must be positive");
  if (classifier.trees < 1 || classifier.max_depth < 1 || !(classifier.learning_rate > 0.0)) {
    throw InputError("classifier settings must be positive");
  }
  if (classifier.max_bins < 2 || classifier.max_bins > 256) throw InputError("max_bins must be in [2, 256]");
}

std::size_t NuSegHopModel::parameter_count() const {
  std::size_t n = layer1.parameter_count();
  for (const auto& k : layer2) n += k.parameter_count();
  for (const auto& k : spectral1) n += k.parameter_count();
  for (const auto& row : spectral2) {
    for (const auto& k : row) n += k.parameter_count();
  }
  return n;
}

void NuSegHopModel::validate() const {
  config.validate();
  const Geometry g(config);
  const int c1 = layer1_channels();
  if (layer1.input_size() != config.filter1 * config.filter1 * 3 || !layer1.dc_included) {
    throw InputError("model: layer-1 kernel shape");
  }
  if (static_cast<int>(layer2.size()) != c1 || static_cast<int>(spectral1.size()) != c1 ||
      static_cast<int>(spectral2.size()) != c1) {
    throw InputError("model: per-channel kernel counts");
  }
  for (int p = 0; p < c1; ++p) {
    if (layer2[p].input_size() != config.filter2 * config.filter2 || !layer2[p].dc_included) {
      throw InputError("model: layer-2 kernel shape");
    }
    if (spectral1[p].input_size() != g.l1_window() || spectral1[p].dc_included) {
      throw InputError("model: layer-1 spectral basis shape");
    }
    if (static_cast<int>(spectral2[p].size()) != layer2[p].output_size()) {
      throw InputError("model: layer-2 spectral basis count");
    }
    for (const auto& k : spectral2[p]) {
      if (k.input_size() != g.l2_window() || k.dc_included) throw InputError("model: layer-2 spectral basis shape");
    }
  }
  if (layer1.weights.cols() != layer1.input_size()) throw InputError("model: kernel width");
  const auto all = detail::all_features(*this);
  if (static_cast<std::int64_t>(all.size()) != total_features) throw InputError("model: feature count");
  std::set<std::int32_t> seen;
  for (const auto& ref : selected) {
    if (ref.global_index < 0 || ref.global_index >= total_features || !(all[ref.global_index] == ref) ||
        !seen.insert(ref.global_index).second) {
      throw InputError("model: selected feature out of range or repeated");
    }
  }
  if (!std::is_sorted(selected.begin(), selected.end(),
                      [](const FeatureRef& a, const FeatureRef& b) { return a.global_index < b.global_index; })) {
    throw InputError("model: selected features must be in canonical order");
  }
  if (classifier.feature_count() != static_cast<int>(selected.size())) throw InputError("model: classifier width");
}

namespace {

constexpr int kChunkRows = 64;
constexpr int kPredictRows = 128;
constexpr std::size_t kWindowChunk = 4096;

struct TileState {
  const HsiImage* hsi = nullptr;
  std::vector<Pixel> samples;
  std::vector<std::uint8_t> labels;
  Band l1;
  Band pooled;
  Band l2;
  std::vector<std::uint32_t> l1_hits;
  std::vector<std::uint32_t> l2_hits;
};

void draw(std::vector<int>& pool, std::size_t k, std::mt19937_64& rng, std::vector<int>& out) {
  if (pool.size() >= k) {
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
    return;
  }
  out.insert(out.end(), pool.begin(), pool.end());
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::size_t i = pool.size(); i < k; ++i) out.push_back(pool[pick(rng)]);
}

void sample_tile(TileState& tile, const InstanceMask& pseudo, std::size_t quota, std::mt19937_64& rng) {
  std::vector<int> fg, bg;
  const int w = pseudo.width();
  for (std::size_t i = 0; i < pseudo.pixel_count(); ++i) (pseudo[i] > 0 ? fg : bg).push_back(static_cast<int>(i));
  if (fg.empty() || bg.empty()) throw DegeneratePseudolabel();
  std::vector<int> picked_fg, picked_bg;
  draw(fg, quota / 2, rng, picked_fg);
  draw(bg, quota - quota / 2, rng, picked_bg);
  std::vector<std::pair<int, std::uint8_t>> all;
  for (int i : picked_fg) all.emplace_back(i, 1);
  for (int i : picked_bg) all.emplace_back(i, 0);
  std::sort(all.begin(), all.end());
  for (auto [idx, y] : all) {
    tile.samples.push_back({idx / w, idx % w});
    tile.labels.push_back(y);
  }
}

/// Accumulates cuboid moments over image positions with positive hit counts.
/// Rows are reduced in fixed chunks so the result does not depend on the
/// thread count.
template <typename Gather>
MomentAccumulator weighted_moments(int dims, int width, int height, const std::vector<std::uint32_t>& hits,
                                   Gather gather) {
  const int chunks = (height + kChunkRows - 1) / kChunkRows;
  std::vector<MomentAccumulator> partial(chunks, MomentAccumulator(dims));
#pragma omp parallel for schedule(dynamic)
  for (int chunk = 0; chunk < chunks; ++chunk) {
    std::vector<double> x(dims);
    for (int r = chunk * kChunkRows; r < std::min(height, (chunk + 1) * kChunkRows); ++r) {
      for (int c = 0; c < width; ++c) {
        const auto w = hits[static_cast<std::size_t>(r) * width + c];
        if (w == 0) continue;
        gather(r, c, x.data());
        partial[chunk].add(std::span<const double>(x), static_cast<double>(w));
      }
    }
  }
  MomentAccumulator total(dims);
  for (const auto& p : partial) total.merge(p);
  return total;
}

SaabKernel empty_kernel(std::array<int, 3> dims, bool dc, const Eigen::VectorXd& offset) {
  SaabKernel k;
  k.input_dims = dims;
  k.dc_included = dc;
  k.weights.resize(0, dims[0] * dims[1] * dims[2]);
  if (!dc) k.offset = offset;
  return k;
}

struct Candidate {
  double loss = 0.0;
  FeatureRef ref;
  std::vector<float> column;
};

/// Keeps the `keep` lowest-loss features; on equal loss the earlier index wins.
class Selector {
 public:
  explicit Selector(int keep) : keep_(keep) {}

  void offer(double loss, const FeatureRef& ref, std::vector<float>&& column) {
    if (static_cast<int>(items_.size()) < keep_) {
      items_.push_back({loss, ref, std::move(column)});
      return;
    }
    auto worst = std::max_element(items_.begin(), items_.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.loss, a.ref.global_index) < std::tie(b.loss, b.ref.global_index);
    });
    if (loss < worst->loss) *worst = {loss, ref, std::move(column)};
  }

  std::vector<Candidate> take() {
    std::sort(items_.begin(), items_.end(),
              [](const Candidate& a, const Candidate& b) { return a.ref.global_index < b.ref.global_index; });
    return std::move(items_);
  }

 private:
  int keep_;
  std::vector<Candidate> items_;
};

using WindowBlock = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

WindowBlock window_block(const std::vector<float>& windows, std::size_t begin, std::size_t end, int dims) {
  return WindowBlock(windows.data() + begin * dims, static_cast<Eigen::Index>(end - begin), dims);
}

/// Moments of row-major windows, reduced in fixed row chunks.
MomentAccumulator window_moments(const std::vector<float>& windows, std::size_t n, int dims) {
  const std::size_t chunks = (n + kWindowChunk - 1) / kWindowChunk;
  std::vector<MomentAccumulator> partial(chunks, MomentAccumulator(dims));
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t end = std::min(n, (c + 1) * kWindowChunk);
    partial[c].add_rows(window_block(windows, c * kWindowChunk, end, dims).cast<double>());
  }
  MomentAccumulator total(dims);
  for (const auto& p : partial) total.merge(p);
  return total;
}

/// Spectral components of every window, one column per component.
std::vector<std::vector<float>> project_windows(const std::vector<float>& windows, std::size_t n, int dims,
                                                const SaabKernel& basis) {
  const int comps = basis.ac_count();
  std::vector<std::vector<float>> spec(comps, std::vector<float>(n));
  if (comps == 0) return spec;
  const std::size_t chunks = (n + kWindowChunk - 1) / kWindowChunk;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * kWindowChunk, end = std::min(n, begin + kWindowChunk);
    const Eigen::MatrixXd centred =
        window_block(windows, begin, end, dims).cast<double>().rowwise() - basis.offset.transpose();
    const Eigen::MatrixXd out = centred * basis.weights.transpose();
    for (int k = 0; k < comps; ++k) {
      for (std::size_t i = begin; i < end; ++i) spec[k][i] = static_cast<float>(out(i - begin, k));
    }
  }
  return spec;
}

class Trainer {
 public:
  Trainer(const std::vector<TileState>& tiles, const NuSegHopConfig& cfg, NuSegHopModel& model)
      : cfg_(cfg), model_(model), selector_(cfg.n_selected) {
    for (const auto& t : tiles) {
      labels_.insert(labels_.end(), t.labels.begin(), t.labels.end());
    }
  }

  /// Scores the spatial window features of one map plus its spectral PCA.
  SaabKernel process_map(FeatureKind spatial, FeatureKind spectral, int parent, int child, int side,
                         const std::vector<float>& windows) {
    const int dims = side * side;
    const std::size_t n = labels_.size();
    std::vector<std::vector<float>> columns(dims, std::vector<float>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < dims; ++j) columns[j][i] = windows[i * dims + j];
    }
    const auto moments = window_moments(windows, n, dims);
    SaabKernel basis;
    const SaabOptions opts{cfg_.energy_threshold, cfg_.max_dims, false};
    try {
      basis = fit_saab(moments, opts, {side, side, 1});
    } catch (const EmptyKernel&) {
      basis = empty_kernel({side, side, 1}, false, moments.mean());
    }
    auto spec = project_windows(windows, n, dims, basis);
    for (auto& col : spec) columns.push_back(std::move(col));
    std::vector<double> loss(columns.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t j = 0; j < columns.size(); ++j) loss[j] = discriminant_loss(columns[j], labels_);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const bool is_spatial = static_cast<int>(j) < dims;
      const FeatureRef ref{is_spatial ? spatial : spectral, static_cast<std::int16_t>(parent),
                           static_cast<std::int16_t>(child),
                           static_cast<std::int16_t>(is_spatial ? j : j - dims), next_index_++};
      selector_.offer(loss[j], ref, std::move(columns[j]));
    }
    return basis;
  }

  void finish() {
    model_.total_features = next_index_;
    auto chosen = selector_.take();
    const int s = static_cast<int>(chosen.size());
    const std::size_t n = labels_.size();
    std::vector<float> x(n * s);
    for (int j = 0; j < s; ++j) {
      model_.selected.push_back(chosen[j].ref);
      for (std::size_t i = 0; i < n; ++i) x[i * s + j] = chosen[j].column[i];
    }
    model_.classifier.fit(x, labels_, s, cfg_.classifier);
  }

 private:
  const NuSegHopConfig& cfg_;
  NuSegHopModel& model_;
  Selector selector_;
  std::vector<std::uint8_t> labels_;
  std::int32_t next_index_ = 0;
};

}  // namespace

NuSegHopModel fit_model(std::span<const TrainingTile> inputs, const NuSegHopConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (inputs.empty()) throw InputError("fit_model: no training tiles");
  const Geometry g(cfg);
  std::mt19937_64 rng(seed);

  std::vector<TileState> tiles(inputs.size());
  std::size_t total_samples = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto& in = inputs[t];
    if (!in.hsi || !in.pseudolabel) throw InputError("fit_model: missing tile data");
    require_same_shape(*in.hsi, *in.pseudolabel, "fit_model image vs pseudolabel");
    tiles[t].hsi = in.hsi;
    const std::size_t quota = cfg.n_samples / inputs.size() + (t < cfg.n_samples % inputs.size() ? 1 : 0);
    sample_tile(tiles[t], *in.pseudolabel, std::max<std::size_t>(quota, 2), rng);
    total_samples += tiles[t].samples.size();
  }

  NuSegHopModel model;
  model.config = cfg;

  // Layer 1: every cuboid of every sampled window, counted with multiplicity.
  MomentAccumulator l1_moments(cfg.filter1 * cfg.filter1 * 3);
  for (auto& tile : tiles) {
    const int w = tile.hsi->width(), h = tile.hsi->height();
    tile.l1_hits.assign(static_cast<std::size_t>(w) * h, 0);
    tile.l2_hits.assign(static_cast<std::size_t>(w) * h, 0);
    for (const auto& s : tile.samples) {
      for (int dy = -g.radius; dy <= g.radius; ++dy) {
        for (int dx = -g.radius; dx <= g.radius; ++dx) {
          ++tile.l1_hits[static_cast<std::size_t>(reflect_index(s.row + dy, h)) * w + reflect_index(s.col + dx, w)];
        }
      }
      for (int i = 0; i < g.pooled; ++i) {
        for (int j = 0; j < g.pooled; ++j) {
          ++tile.l2_hits[static_cast<std::size_t>(reflect_index(s.row + g.grid_offset(i), h)) * w +
                         reflect_index(s.col + g.grid_offset(j), w)];
        }
      }
    }
    l1_moments.merge(weighted_moments(l1_moments.dims(), w, h, tile.l1_hits, [&](int r, int c, double* x) {
      detail::layer1_cuboid(*tile.hsi, g, r, c, x);
    }));
  }
  model.layer1 = fit_saab(l1_moments, {cfg.energy_threshold, cfg.max_dims, true}, {cfg.filter1, cfg.filter1, 3});
  const int c1 = model.layer1_channels();

  for (auto& tile : tiles) {
    const int w = tile.hsi->width(), h = tile.hsi->height();
    tile.l1 = detail::layer1_band(*tile.hsi, model.layer1, g, 0, h);
    tile.pooled = detail::pooled_band(tile.l1, w, h, g, 0, h);
    tile.l1_hits = {};
  }

  // Layer 2: channel-wise over the pooled maps.
  const std::array<int, 3> l2_dims{cfg.filter2, cfg.filter2, 1};
  for (int p = 0; p < c1; ++p) {
    MomentAccumulator moments(cfg.filter2 * cfg.filter2);
    for (auto& tile : tiles) {
      moments.merge(weighted_moments(moments.dims(), tile.hsi->width(), tile.hsi->height(), tile.l2_hits,
                                     [&](int r, int c, double* x) { detail::layer2_cuboid(tile.pooled, p, g, r, c, x); }));
    }
    try {
      model.layer2.push_back(fit_saab(moments, {cfg.energy_threshold, cfg.max_dims, true}, l2_dims));
    } catch (const EmptyKernel&) {
      model.layer2.push_back(empty_kernel(l2_dims, true, {}));
    }
  }

  Trainer trainer(tiles, cfg, model);
  const int side1 = 2 * g.radius + 1;
  std::vector<float> windows;
  for (int p = 0; p < c1; ++p) {
    windows.assign(total_samples * g.l1_window(), 0.0f);
    std::size_t row = 0;
    for (const auto& tile : tiles) {
      for (const auto& s : tile.samples) {
        detail::layer1_window(tile.l1, p, g, s.row, s.col, windows.data() + row++ * g.l1_window());
      }
    }
    model.spectral1.push_back(
        trainer.process_map(FeatureKind::L1Spatial, FeatureKind::L1Spectral, p, 0, side1, windows));
  }
  for (int p = 0; p < c1; ++p) {
    for (auto& tile : tiles) {
      tile.l2 = detail::layer2_band(tile.pooled, p, model.layer2[p], tile.hsi->width(), tile.hsi->height(), g, 0,
                                    tile.hsi->height());
    }
    model.spectral2.emplace_back();
    for (int q = 0; q < model.layer2[p].output_size(); ++q) {
      windows.assign(total_samples * g.l2_window(), 0.0f);
      std::size_t row = 0;
      for (const auto& tile : tiles) {
        for (const auto& s : tile.samples) {
          detail::layer2_window(tile.l2, q, g, s.row, s.col, windows.data() + row++ * g.l2_window());
        }
      }
      model.spectral2.back().push_back(
          trainer.process_map(FeatureKind::L2Spatial, FeatureKind::L2Spectral, p, q, g.pooled, windows));
    }
  }
  trainer.finish();
  return model;
}

NuSegHopModel fit_model(const HsiImage& hsi, const InstanceMask& pseudolabel, const NuSegHopConfig& cfg,
                        std::uint64_t seed) {
  const TrainingTile tile{&hsi, &pseudolabel};
  return fit_model(std::span<const TrainingTile>(&tile, 1), cfg, seed);
}

namespace {

std::vector<bool> parents_for(const NuSegHopModel& model, const std::vector<FeatureRef>& refs) {
  std::vector<bool> need(model.layer2.size(), false);
  for (const auto& ref : refs) {
    if (ref.kind == FeatureKind::L2Spatial || ref.kind == FeatureKind::L2Spectral) need[ref.parent] = true;
  }
  return need;
}

std::vector<float> extract(const HsiImage& hsi, const NuSegHopModel& model, const std::vector<FeatureRef>& refs,
                           std::span<const Pixel> pixels) {
  std::vector<float> out(pixels.size() * refs.size());
  if (pixels.empty()) return out;
  const auto maps = detail::build_maps(hsi, model, parents_for(model, refs), 0, hsi.height());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (pixels[i].row < 0 || pixels[i].row >= hsi.height() || pixels[i].col < 0 || pixels[i].col >= hsi.width()) {
      throw InputError("extract_features: pixel outside image");
    }
    detail::evaluate_refs(maps, model, refs, pixels[i].row, pixels[i].col, out.data() + i * refs.size());
  }
  return out;
}

}  // namespace

std::vector<float> extract_features(const HsiImage& hsi, const NuSegHopModel& model, std::span<const Pixel> pixels) {
  return extract(hsi, model, detail::all_features(model), pixels);
}

std::vector<float> extract_selected(const HsiImage& hsi, const NuSegHopModel& model, std::span<const Pixel> pixels) {
  return extract(hsi, model, model.selected, pixels);
}

Heatmap predict_heatmap(const HsiImage& hsi, const NuSegHopModel& model) {
  if (hsi.channels() != 3) throw InputError("predict_heatmap expects a 3-channel image");
  const int w = hsi.width(), h = hsi.height();
  Heatmap out(w, h);
  const auto need = parents_for(model, model.selected);
  const int blocks = (h + kPredictRows - 1) / kPredictRows;
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < blocks; ++b) {
    const int r0 = b * kPredictRows, r1 = std::min(h, r0 + kPredictRows);
    const auto maps = detail::build_maps(hsi, model, need, r0, r1);
    std::vector<float> row(model.selected.size());
    for (int r = r0; r < r1; ++r) {
      for (int c = 0; c < w; ++c) {
        detail::evaluate_refs(maps, model, model.selected, r, c, row.data());
        out.at(r, c) = model.classifier.predict_proba(row.data());
      }
    }
  }
  return out;
}

}  // namespace lgnh::nuseghop
