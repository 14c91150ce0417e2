#include "lgnh/nuseghop/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lgnh/core/error.hpp"

namespace lgnh::nuseghop {

namespace {

struct Binned {
  int rows = 0;
  int features = 0;
  std::vector<std::vector<float>> cuts;    // per feature, ascending
  std::vector<std::size_t> offset;         // histogram offset per feature
  std::size_t total_bins = 0;
  std::vector<std::uint8_t> bins;          // feature-major
  std::vector<std::uint8_t> row_bins;      // row-major copy for histograms
};

// Places the values of the given ascending ranks without sorting the rest.
void multiselect(std::vector<float>& v, std::size_t lo, std::size_t hi, const std::vector<std::size_t>& ranks, int a,
                 int b) {
  if (a >= b) return;
  const int m = (a + b) / 2;
  std::nth_element(v.begin() + lo, v.begin() + ranks[m], v.begin() + hi);
  multiselect(v, lo, ranks[m], ranks, a, m);
  multiselect(v, ranks[m] + 1, hi, ranks, m + 1, b);
}

Binned bin_features(std::span<const float> x, int n, int f, int max_bins) {
  Binned b;
  b.rows = n;
  b.features = f;
  b.cuts.resize(f);
  b.offset.resize(f);
  b.bins.resize(static_cast<std::size_t>(n) * f);
  std::vector<std::size_t> ranks;
  for (int k = 1; k < max_bins; ++k) ranks.push_back(static_cast<std::size_t>(k) * n / max_bins);
  ranks.push_back(static_cast<std::size_t>(n) - 1);
  int width = 1;
  while (width < max_bins) width *= 2;
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < f; ++j) {
    std::vector<float> col(n);
    for (int i = 0; i < n; ++i) col[i] = x[static_cast<std::size_t>(i) * f + j];
    std::vector<float> sorted = col;
    multiselect(sorted, 0, sorted.size(), ranks, 0, static_cast<int>(ranks.size()));
    const float top = sorted.back();
    auto& cuts = b.cuts[j];
    for (int k = 0; k + 1 < static_cast<int>(ranks.size()); ++k) {
      const float v = sorted[ranks[k]];
      if (v < top && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
    }
    // Branchless count of cuts below each value, over a power-of-two table.
    std::vector<float> table(width, std::numeric_limits<float>::infinity());
    std::copy(cuts.begin(), cuts.end(), table.begin());
    auto* out = b.bins.data() + static_cast<std::size_t>(j) * n;
    for (int i = 0; i < n; ++i) {
      const float v = col[i];
      int pos = 0;
      for (int step = width / 2; step > 0; step /= 2) pos += table[pos + step - 1] < v ? step : 0;
      out[i] = static_cast<std::uint8_t>(pos);
    }
  }
  for (int j = 0; j < f; ++j) {
    b.offset[j] = b.total_bins;
    b.total_bins += b.cuts[j].size() + 1;
  }
  b.row_bins.resize(b.bins.size());
  for (int j = 0; j < f; ++j) {
    const auto* col = b.bins.data() + static_cast<std::size_t>(j) * n;
    for (int i = 0; i < n; ++i) b.row_bins[static_cast<std::size_t>(i) * f + j] = col[i];
  }
  return b;
}

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

// Rows per partial histogram; partials are summed in a fixed order so the
// result does not depend on the thread count.
constexpr std::size_t kHistRows = 4096;

class TreeBuilder {
 public:
  TreeBuilder(const Binned& data, const std::vector<GradPair>& grad, const GbdtConfig& cfg,
              std::vector<double>& margin)
      : data_(data), grad_(grad), cfg_(cfg), margin_(margin) {}

  GradientBoostedTrees::Tree build() {
    std::vector<int> rows(data_.rows);
    std::iota(rows.begin(), rows.end(), 0);
    auto hist = histogram(rows);
    GradPair total;
    for (int r : rows) {
      total.g += grad_[r].g;
      total.h += grad_[r].h;
    }
    grow(rows, hist, total, 0);
    return std::move(tree_);
  }

 private:
  std::vector<GradPair> histogram(const std::vector<int>& rows) const {
    const std::size_t bins = data_.total_bins;
    const int f = data_.features;
    const std::size_t blocks = (rows.size() + kHistRows - 1) / kHistRows;
    std::vector<GradPair> partial(blocks * bins);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t b = 0; b < blocks; ++b) {
      auto* h = partial.data() + b * bins;
      const std::size_t end = std::min(rows.size(), (b + 1) * kHistRows);
      for (std::size_t i = b * kHistRows; i < end; ++i) {
        const int r = rows[i];
        const auto* rb = data_.row_bins.data() + static_cast<std::size_t>(r) * f;
        const GradPair gp = grad_[r];
        for (int j = 0; j < f; ++j) {
          auto& cell = h[data_.offset[j] + rb[j]];
          cell.g += gp.g;
          cell.h += gp.h;
        }
      }
    }
    std::vector<GradPair> hist(partial.begin(), partial.begin() + std::min(partial.size(), bins));
    hist.resize(bins);
    for (std::size_t b = 1; b < blocks; ++b) {
      const auto* h = partial.data() + b * bins;
      for (std::size_t k = 0; k < bins; ++k) {
        hist[k].g += h[k].g;
        hist[k].h += h[k].h;
      }
    }
    return hist;
  }

  double score(const GradPair& p) const { return p.g * p.g / (p.h + cfg_.l2); }

  int grow(const std::vector<int>& rows, const std::vector<GradPair>& hist, GradPair total, int depth) {
    const int idx = static_cast<int>(tree_.size());
    tree_.push_back({});
    tree_[idx].value = -total.g / (total.h + cfg_.l2) * cfg_.learning_rate;

    int best_feature = -1, best_bin = -1;
    double best_gain = 1e-10;
    if (depth < cfg_.max_depth && rows.size() >= 2) {
      const double parent = score(total);
      for (int j = 0; j < data_.features; ++j) {
        const auto* h = hist.data() + data_.offset[j];
        const int nb = static_cast<int>(data_.cuts[j].size());
        GradPair left;
        for (int k = 0; k < nb; ++k) {
          left.g += h[k].g;
          left.h += h[k].h;
          const GradPair right{total.g - left.g, total.h - left.h};
          if (left.h < cfg_.min_child_hessian || right.h < cfg_.min_child_hessian) continue;
          const double gain = score(left) + score(right) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = j;
            best_bin = k;
          }
        }
      }
    }
    if (best_feature < 0) {
      for (int r : rows) margin_[r] += tree_[idx].value;
      return idx;
    }

    const auto* col = data_.bins.data() + static_cast<std::size_t>(best_feature) * data_.rows;
    std::vector<int> left_rows, right_rows;
    GradPair left_total;
    for (int r : rows) {
      if (col[r] <= best_bin) {
        left_rows.push_back(r);
        left_total.g += grad_[r].g;
        left_total.h += grad_[r].h;
      } else {
        right_rows.push_back(r);
      }
    }
    const GradPair right_total{total.g - left_total.g, total.h - left_total.h};
    const bool left_small = left_rows.size() <= right_rows.size();
    auto small_hist = histogram(left_small ? left_rows : right_rows);
    std::vector<GradPair> large_hist(hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i) {
      large_hist[i] = {hist[i].g - small_hist[i].g, hist[i].h - small_hist[i].h};
    }
    const auto& left_hist = left_small ? small_hist : large_hist;
    const auto& right_hist = left_small ? large_hist : small_hist;

    tree_[idx].feature = best_feature;
    tree_[idx].threshold = data_.cuts[best_feature][best_bin];
    const int l = grow(left_rows, left_hist, left_total, depth + 1);
    const int r = grow(right_rows, right_hist, right_total, depth + 1);
    tree_[idx].left = l;
    tree_[idx].right = r;
    return idx;
  }

  const Binned& data_;
  const std::vector<GradPair>& grad_;
  const GbdtConfig& cfg_;
  std::vector<double>& margin_;
  GradientBoostedTrees::Tree tree_;
};

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

}  // namespace

void GradientBoostedTrees::fit(std::span<const float> x, std::span<const std::uint8_t> labels, int features,
                               const GbdtConfig& cfg) {
  const int n = static_cast<int>(labels.size());
  if (n == 0 || features <= 0 || x.size() != static_cast<std::size_t>(n) * features) {
    throw InputError("gbdt: feature matrix does not match labels");
  }
  if (cfg.max_bins < 2 || cfg.max_bins > 256) throw InputError("gbdt: max_bins must be in [2, 256]");
  features_ = features;
  trees_.clear();

  double positives = 0.0;
  for (auto y : labels) positives += y ? 1.0 : 0.0;
  const double p = std::clamp(positives / n, 1e-6, 1.0 - 1e-6);
  base_margin_ = std::log(p / (1.0 - p));

  const auto data = bin_features(x, n, features, cfg.max_bins);
  std::vector<double> margin(n, base_margin_);
  std::vector<GradPair> grad(n);
  for (int t = 0; t < cfg.trees; ++t) {
    for (int i = 0; i < n; ++i) {
      const double q = sigmoid(margin[i]);
      grad[i] = {q - (labels[i] ? 1.0 : 0.0), std::max(q * (1.0 - q), 1e-16)};
    }
    TreeBuilder builder(data, grad, cfg, margin);
    trees_.push_back(builder.build());
  }
}

double GradientBoostedTrees::predict_margin(const float* row) const {
  double m = base_margin_;
  for (const auto& tree : trees_) {
    int node = 0;
    while (tree[node].feature >= 0) {
      node = row[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
    }
    m += tree[node].value;
  }
  return m;
}

double GradientBoostedTrees::predict_proba(const float* row) const { return sigmoid(predict_margin(row)); }

GradientBoostedTrees GradientBoostedTrees::from_parts(int features, double base_margin, std::vector<Tree> trees) {
  GradientBoostedTrees g;
  g.features_ = features;
  g.base_margin_ = base_margin;
  for (const auto& tree : trees) {
    if (tree.empty()) throw InputError("gbdt: empty tree");
    const int size = static_cast<int>(tree.size());
    for (int i = 0; i < size; ++i) {
      const auto& node = tree[i];
      if (node.feature >= features) throw InputError("gbdt: split feature out of range");
      // Children always follow their parent, which rules out cycles.
      if (node.feature >= 0 && (node.left <= i || node.right <= i || node.left >= size || node.right >= size)) {
        throw InputError("gbdt: malformed tree");
      }
    }
  }
  g.trees_ = std::move(trees);
  return g;
}

}  // namespace lgnh::nuseghop
