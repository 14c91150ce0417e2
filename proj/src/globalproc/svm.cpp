#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lgnh/core/error.hpp"
#include "lgnh/globalproc/globalproc.hpp"

namespace lgnh::globalproc {

namespace {

constexpr double kTau = 1e-12;
constexpr double kTolerance = 1e-3;

double rbf(const double* a, const double* b, int dims, double gamma) {
  double d2 = 0.0;
  for (int k = 0; k < dims; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
  return std::exp(-gamma * d2);
}

/// Sigmoid fit of decision values to labels (Newton with backtracking).
std::pair<double, double> platt_fit(const std::vector<double>& dec, std::span<const std::uint8_t> labels) {
  double prior1 = 0.0, prior0 = 0.0;
  for (auto y : labels) (y ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  const std::size_t n = dec.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] ? hi : lo;
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * aa + bb;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  double fval = objective(a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return {a, b};
}

}  // namespace

void RbfSvm::fit(std::span<const double> x, std::span<const std::uint8_t> labels, int dims, double c, double gamma) {
  const int n = static_cast<int>(labels.size());
  if (n < 2 || dims <= 0 || x.size() != static_cast<std::size_t>(n) * dims) throw InputError("svm: bad training set");
  dims_ = dims;
  gamma_ = gamma;
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = labels[i] ? 1.0 : -1.0;

  std::vector<float> k(static_cast<std::size_t>(n) * n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      k[static_cast<std::size_t>(i) * n + j] = static_cast<float>(rbf(&x[i * dims], &x[j * dims], dims, gamma));
    }
  }
  auto kern = [&](int i, int j) { return static_cast<double>(k[static_cast<std::size_t>(i) * n + j]); };

  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  auto upper = [&](int t) { return alpha[t] >= c; };
  auto lower = [&](int t) { return alpha[t] <= 0.0; };
  const long max_iter = std::max<long>(10000000L, 100L * n);
  for (long iter = 0; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    int i = -1;
    for (int t = 0; t < n; ++t) {
      if (y[t] > 0 ? !upper(t) : !lower(t)) {
        const double v = -y[t] * grad[t];
        if (v >= gmax) {
          gmax = v;
          i = t;
        }
      }
    }
    if (i < 0) break;
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    int j = -1;
    for (int t = 0; t < n; ++t) {
      if (y[t] > 0 ? lower(t) : upper(t)) continue;
      const double v = y[t] * grad[t];
      gmax2 = std::max(gmax2, v);
      const double diff = gmax + v;
      if (diff > 0) {
        const double quad = std::max(kern(i, i) + kern(t, t) - 2.0 * kern(i, t), kTau);
        const double obj = -diff * diff / quad;
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    if (gmax + gmax2 < kTolerance || j < 0) break;

    const double qij = y[i] * y[j] * kern(i, j);
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      const double quad = std::max(kern(i, i) + kern(j, j) + 2.0 * qij, kTau);
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      const double quad = std::max(kern(i, i) + kern(j, j) - 2.0 * qij, kTau);
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (int t = 0; t < n; ++t) grad[t] += y[i] * y[t] * kern(i, t) * di + y[j] * y[t] * kern(j, t) * dj;
  }

  // Offset from free vectors, else the midpoint of the feasible interval.
  double sum_free = 0.0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  int free = 0;
  for (int t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  const double rho = free > 0 ? sum_free / free : 0.5 * (ub + lb);
  bias_ = -rho;

  support_.clear();
  coef_.clear();
  for (int t = 0; t < n; ++t) {
    if (alpha[t] <= 0.0) continue;
    support_.insert(support_.end(), x.begin() + static_cast<std::ptrdiff_t>(t) * dims,
                    x.begin() + static_cast<std::ptrdiff_t>(t + 1) * dims);
    coef_.push_back(alpha[t] * y[t]);
  }

  std::vector<double> dec(n);
  for (int t = 0; t < n; ++t) dec[t] = decision(x.subspan(static_cast<std::size_t>(t) * dims, dims));
  std::tie(a_, b_) = platt_fit(dec, labels);
}

double RbfSvm::decision(std::span<const double> row) const {
  double f = bias_;
  for (std::size_t s = 0; s < coef_.size(); ++s) f += coef_[s] * rbf(&support_[s * dims_], row.data(), dims_, gamma_);
  return f;
}

double RbfSvm::probability(std::span<const double> row) const {
  const double z = decision(row) * a_ + b_;
  return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

FilterResult instance_classify_filter(const InstanceMask& mask, const HsiImage& hsi, const GlobalConfig& cfg,
                                      std::uint64_t seed) {
  require_same_shape(mask, hsi, "instance filter mask vs image");
  FilterResult result{mask, {}, false, {}};
  const auto groups = instance_pixels(mask);
  std::vector<std::int32_t> labels;
  for (std::size_t l = 1; l < groups.size(); ++l) {
    if (!groups[l].empty()) labels.push_back(static_cast<std::int32_t>(l));
  }
  const int n_pos = static_cast<int>(labels.size());
  if (n_pos < cfg.min_instances) return result;

  constexpr int d = kInstanceFeatureCount;
  std::vector<double> pos(static_cast<std::size_t>(n_pos) * d);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_pos; ++i) {
    const auto f = instance_features(groups[labels[i]], hsi);
    std::copy(f.begin(), f.end(), pos.begin() + static_cast<std::ptrdiff_t>(i) * d);
  }

  // Negatives: the same shapes translated onto pure background.
  std::mt19937_64 rng(seed);
  const int w = mask.width(), h = mask.height();
  std::vector<std::vector<Pixel>> negatives;
  for (auto label : labels) {
    const auto& px = groups[label];
    int top = px[0].row, left = px[0].col, bottom = top, right = left;
    for (const auto& p : px) {
      top = std::min(top, p.row);
      left = std::min(left, p.col);
      bottom = std::max(bottom, p.row);
      right = std::max(right, p.col);
    }
    if (bottom - top + 1 > h || right - left + 1 > w) continue;
    std::uniform_int_distribution<int> pick_r(0, h - (bottom - top + 1)), pick_c(0, w - (right - left + 1));
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int dr = pick_r(rng) - top, dc = pick_c(rng) - left;
      const bool clear = std::all_of(px.begin(), px.end(), [&](const Pixel& p) { return mask.at(p.row + dr, p.col + dc) == 0; });
      if (!clear) continue;
      std::vector<Pixel> moved;
      moved.reserve(px.size());
      for (const auto& p : px) moved.push_back({p.row + dr, p.col + dc});
      negatives.push_back(std::move(moved));
      break;
    }
  }
  const int n_neg = static_cast<int>(negatives.size());
  if (2 * n_neg < n_pos) {
    result.warning = "instance filter skipped: placed " + std::to_string(n_neg) + " background samples for " +
                     std::to_string(n_pos) + " instances";
    return result;
  }
  std::vector<double> neg(static_cast<std::size_t>(n_neg) * d);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_neg; ++i) {
    const auto f = instance_features(negatives[i], hsi);
    std::copy(f.begin(), f.end(), neg.begin() + static_cast<std::ptrdiff_t>(i) * d);
  }

  // Cap the kernel matrix size with a seeded subsample per class.
  constexpr int kMaxPerClass = 3000;
  auto subsample = [&](int n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (n > kMaxPerClass) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(kMaxPerClass);
      std::sort(idx.begin(), idx.end());
    }
    return idx;
  };
  const auto pos_idx = subsample(n_pos), neg_idx = subsample(n_neg);
  std::vector<double> x;
  std::vector<std::uint8_t> y;
  for (int i : pos_idx) {
    x.insert(x.end(), pos.begin() + static_cast<std::ptrdiff_t>(i) * d, pos.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
    y.push_back(1);
  }
  for (int i : neg_idx) {
    x.insert(x.end(), neg.begin() + static_cast<std::ptrdiff_t>(i) * d, neg.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
    y.push_back(0);
  }

  const std::size_t rows = y.size();
  std::array<double, d> mean{}, sd{};
  for (std::size_t r = 0; r < rows; ++r) {
    for (int k = 0; k < d; ++k) mean[k] += x[r * d + k];
  }
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int k = 0; k < d; ++k) sd[k] += (x[r * d + k] - mean[k]) * (x[r * d + k] - mean[k]);
  }
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(rows));
  auto standardize = [&](double* row) {
    for (int k = 0; k < d; ++k) row[k] = sd[k] > 1e-12 ? (row[k] - mean[k]) / sd[k] : 0.0;
  };
  for (std::size_t r = 0; r < rows; ++r) standardize(&x[r * d]);
  for (int i = 0; i < n_pos; ++i) standardize(&pos[static_cast<std::size_t>(i) * d]);

  RbfSvm svm;
  svm.fit(x, y, d, cfg.svm_c, cfg.svm_gamma > 0.0 ? cfg.svm_gamma : 1.0 / d);
  result.trained = true;
  std::vector<std::uint8_t> drop(groups.size(), 0);
  for (int i = 0; i < n_pos; ++i) {
    const double p = svm.probability(std::span<const double>(&pos[static_cast<std::size_t>(i) * d], d));
    if (p < cfg.removal_prob_cutoff) {
      drop[labels[i]] = 1;
      result.removed.push_back(labels[i]);
    }
  }
  for (auto& v : result.mask.values()) {
    if (v > 0 && drop[v]) v = 0;
  }
  return result;
}

}  // namespace lgnh::globalproc
