#include "lgnh/preprocess/preprocess.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "lgnh/core/error.hpp"

namespace lgnh::preprocess {
namespace {

Vec3 normalized(Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (n > 0.0) {
    for (auto& x : v) x /= n;
  }
  return v;
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

/// Flips to the non-negative orthant and clips residual negative components.
Vec3 nonnegative_direction(Vec3 v) {
  if (v[0] + v[1] + v[2] < 0.0) {
    for (auto& x : v) x = -x;
  }
  for (auto& x : v) x = std::max(0.0, x);
  return normalized(v);
}

double percentile(std::vector<double> values, double pct) {
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - t) + values[hi] * t;
}

struct Eigen3 {
  Eigen::Vector3d values;  // descending
  Eigen::Matrix3d vectors;  // columns
};

Eigen3 sorted_eigen(const Eigen::Matrix3d& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  Eigen3 out;
  for (int i = 0; i < 3; ++i) {
    out.values[i] = std::max(0.0, solver.eigenvalues()[2 - i]);
    Eigen::Vector3d v = solver.eigenvectors().col(2 - i);
    // Deterministic sign: largest-magnitude component positive.
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0) v = -v;
    out.vectors.col(i) = v;
  }
  return out;
}

const Vec3 kReferenceEosin = normalized({0.07, 0.99, 0.11});
const Vec3 kReferenceHematoxylin = normalized({0.65, 0.70, 0.29});

}  // namespace

double optical_density(double v) { return -std::log((v * 255.0 + 1.0) / 256.0); }

double od_to_intensity(double od) { return std::clamp((256.0 * std::exp(-od) - 1.0) / 255.0, 0.0, 1.0); }

StainResult stain_separate(const RgbTile& tile, const StainOptions& opts) {
  const std::size_t n = tile.pixel_count();
  std::vector<Vec3> od(n);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t p = 0; p < n; ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      od[p][ch] = optical_density(tile[3 * p + ch]);
      mean[ch] += od[p][ch];
    }
  }
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& v : od) {
    const Eigen::Vector3d d(v[0] - mean[0], v[1] - mean[1], v[2] - mean[2]);
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n);
  const auto eig = sorted_eigen(cov);
  if (std::sqrt(eig.values[0]) < 1e-6 && std::sqrt(eig.values[1]) < 1e-6) throw ConstantTile();

  std::vector<std::size_t> opaque;
  for (std::size_t p = 0; p < n; ++p) {
    if (std::sqrt(dot(od[p], od[p])) >= opts.transparent_od) opaque.push_back(p);
  }
  if (opaque.size() < std::max<std::size_t>(3, n / 100)) {
    opaque.resize(n);
    for (std::size_t p = 0; p < n; ++p) opaque[p] = p;
  }

  StainBasis basis;
  bool single = eig.values[1] < opts.single_stain_ratio * eig.values[0];
  if (!single) {
    Eigen::Vector3d e1 = eig.vectors.col(0), e2 = eig.vectors.col(1);
    if (e1.dot(mean) < 0) e1 = -e1;
    std::vector<double> angles;
    angles.reserve(opaque.size());
    for (auto p : opaque) {
      const Eigen::Vector3d v(od[p][0], od[p][1], od[p][2]);
      angles.push_back(std::atan2(v.dot(e2), v.dot(e1)));
    }
    const double lo = percentile(angles, opts.lower_percentile);
    const double hi = percentile(angles, opts.upper_percentile);
    const Eigen::Vector3d v_lo = std::cos(lo) * e1 + std::sin(lo) * e2;
    const Eigen::Vector3d v_hi = std::cos(hi) * e1 + std::sin(hi) * e2;
    Vec3 a = nonnegative_direction({v_lo[0], v_lo[1], v_lo[2]});
    Vec3 b = nonnegative_direction({v_hi[0], v_hi[1], v_hi[2]});
    // Hematoxylin absorbs red far more strongly than eosin.
    if (a[0] < b[0]) std::swap(a, b);
    basis.hematoxylin_dir = a;
    basis.eosin_dir = b;
    single = std::abs(dot(a, b)) >= 0.999;
  }
  if (single) {
    Vec3 dir{0.0, 0.0, 0.0};
    for (auto p : opaque) {
      for (int ch = 0; ch < 3; ++ch) dir[ch] += od[p][ch];
    }
    basis.hematoxylin_dir = nonnegative_direction(dir);
    basis.eosin_dir = kReferenceEosin;
    if (std::abs(dot(basis.hematoxylin_dir, basis.eosin_dir)) >= 0.999) basis.eosin_dir = kReferenceHematoxylin;
    basis.single_stain = true;
  }

  // Least-squares concentrations against the two stain vectors.
  const auto& h = basis.hematoxylin_dir;
  const auto& e = basis.eosin_dir;
  const double hh = dot(h, h), ee = dot(e, e), he = dot(h, e);
  const double det = hh * ee - he * he;
  StainResult result;
  result.basis = basis;
  result.h_image = RgbTile(tile.width(), tile.height());
  result.h_concentration.resize(n);
  result.e_concentration.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double bh = dot(h, od[p]), be = dot(e, od[p]);
    const double ch = (ee * bh - he * be) / det;
    const double ce = (hh * be - he * bh) / det;
    result.h_concentration[p] = ch;
    result.e_concentration[p] = ce;
    const double c = std::max(0.0, ch);
    for (int k = 0; k < 3; ++k) result.h_image[3 * p + k] = od_to_intensity(c * h[k]);
  }
  return result;
}

RgbTile hist_equalize(const RgbTile& image) {
  RgbTile out(image.width(), image.height());
  const std::size_t n = image.pixel_count();
  for (int ch = 0; ch < 3; ++ch) {
    std::array<std::uint64_t, 256> counts{};
    for (std::size_t p = 0; p < n; ++p) {
      ++counts[static_cast<int>(std::lround(std::clamp(image[3 * p + ch], 0.0, 1.0) * 255.0))];
    }
    std::array<double, 256> lut{};
    std::uint64_t cum = 0;
    for (int l = 0; l < 256; ++l) {
      cum += counts[l];
      lut[l] = static_cast<double>(cum) / static_cast<double>(n);
    }
    for (std::size_t p = 0; p < n; ++p) {
      out[3 * p + ch] = lut[static_cast<int>(std::lround(std::clamp(image[3 * p + ch], 0.0, 1.0) * 255.0))];
    }
  }
  return out;
}

PqrBasis fit_pqr(std::span<const double> px) {
  const std::size_t n = px.size() / 3;
  if (n < 4) throw DegeneratePatch();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t p = 0; p < n; ++p) mean += Eigen::Vector3d(px[3 * p], px[3 * p + 1], px[3 * p + 2]);
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t p = 0; p < n; ++p) {
    const Eigen::Vector3d d = Eigen::Vector3d(px[3 * p], px[3 * p + 1], px[3 * p + 2]) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n);
  if (cov.trace() <= 1e-14) throw DegeneratePatch();
  const auto eig = sorted_eigen(cov);
  PqrBasis b;
  for (int k = 0; k < 3; ++k) {
    b.mean_color[k] = mean[k];
    b.p[k] = eig.vectors(k, 0);
    b.q[k] = eig.vectors(k, 1);
    b.r[k] = eig.vectors(k, 2);
    b.variances[k] = eig.values[k];
  }
  // cov(P.x, intensity) = P' Sigma (1,1,1)/3
  const double corr = eig.vectors.col(0).dot(cov * Eigen::Vector3d::Constant(1.0 / 3.0));
  b.sign_flag = corr < 0.0 ? -1 : 1;
  return b;
}

PqrBasis fit_pqr(const RgbTile& patch) { return fit_pqr(patch.values()); }

std::vector<double> pqr_project(std::span<const double> px, const PqrBasis& b) {
  const std::size_t n = px.size() / 3;
  std::vector<double> out(n);
  double lo = 0.0, hi = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double v = 0.0;
    for (int k = 0; k < 3; ++k) v += b.p[k] * (px[3 * p + k] - b.mean_color[k]);
    out[p] = b.sign_flag * v;
    if (p == 0 || out[p] < lo) lo = out[p];
    if (p == 0 || out[p] > hi) hi = out[p];
  }
  const double range = hi - lo;
  for (auto& v : out) v = range > 0.0 ? (v - lo) / range : 0.5;
  return out;
}

GrayMap pqr_project(const RgbTile& patch, const PqrBasis& basis) {
  const auto values = pqr_project(patch.values(), basis);
  GrayMap out(patch.width(), patch.height());
  std::copy(values.begin(), values.end(), out.values().begin());
  return out;
}

double lab_lightness(double r, double g, double b) {
  auto linear = [](double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); };
  const double y = 0.2126 * linear(r) + 0.7152 * linear(g) + 0.0722 * linear(b);
  const double f = y > 216.0 / 24389.0 ? std::cbrt(y) : (24389.0 / 27.0 * y + 16.0) / 116.0;
  return std::clamp((116.0 * f - 16.0) / 100.0, 0.0, 1.0);
}

std::vector<double> gather_rect(const RgbTile& image, const Rect& rect) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rect.width) * rect.height * 3);
  for (int r = rect.top; r < rect.top + rect.height; ++r) {
    for (int c = rect.left; c < rect.left + rect.width; ++c) {
      for (int k = 0; k < 3; ++k) out.push_back(image.at(r, c, k));
    }
  }
  return out;
}

double robust_range(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto lo = static_cast<std::ptrdiff_t>(0.01 * static_cast<double>(v.size() - 1));
  const auto hi = static_cast<std::ptrdiff_t>(0.99 * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + lo, v.end());
  const double a = v[lo];
  std::nth_element(v.begin(), v.begin() + hi, v.end());
  return v[hi] - a;
}

namespace {

ProjectedPatch finish(std::vector<double> raw) {
  ProjectedPatch out;
  out.contrast = robust_range(raw);
  if (!raw.empty()) {
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double a = *lo, range = *hi - *lo;
    for (auto& x : raw) x = range > 0.0 ? (x - a) / range : 0.5;
  }
  out.values = std::move(raw);
  return out;
}

}  // namespace

PatchProjector make_pqr_projector(const RgbTile& image) {
  return [&image](const Rect& rect) {
    const auto px = gather_rect(image, rect);
    std::vector<double> raw(px.size() / 3);
    try {
      const auto b = fit_pqr(px);
      for (std::size_t p = 0; p < raw.size(); ++p) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += b.p[k] * (px[3 * p + k] - b.mean_color[k]);
        raw[p] = b.sign_flag * v;
      }
    } catch (const DegeneratePatch&) {
      for (std::size_t p = 0; p < raw.size(); ++p) raw[p] = (px[3 * p] + px[3 * p + 1] + px[3 * p + 2]) / 3.0;
    }
    return finish(std::move(raw));
  };
}

PatchProjector make_lightness_projector(const RgbTile& image) {
  return [&image](const Rect& rect) {
    const auto px = gather_rect(image, rect);
    std::vector<double> raw(px.size() / 3);
    for (std::size_t p = 0; p < raw.size(); ++p) raw[p] = lab_lightness(px[3 * p], px[3 * p + 1], px[3 * p + 2]);
    return finish(std::move(raw));
  };
}

PatchProjector make_map_projector(const GrayMap& map) {
  return [&map](const Rect& rect) {
    ProjectedPatch out;
    out.values.reserve(static_cast<std::size_t>(rect.width) * rect.height);
    for (int r = rect.top; r < rect.top + rect.height; ++r) {
      for (int c = rect.left; c < rect.left + rect.width; ++c) out.values.push_back(map.at(r, c));
    }
    out.contrast = robust_range(out.values);
    return out;
  };
}

}  // namespace lgnh::preprocess
