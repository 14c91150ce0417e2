#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "lgnh/localproc/localproc.hpp"

using namespace lgnh;
using namespace lgnh::localproc;

namespace {

// Independent oracle for the midpoint correction: intersect L12's
// perpendicular through the midpoint with the count = 0 axis by solving the
// 2x2 system with Cramer's rule.
double oracle_t_hat(double t1, double c1, double t2, double c2, double lambda, double* t_c_out = nullptr) {
  const double xo = 0.5 * (t1 + t2), yo = 0.5 * (c1 + c2);
  const double dx = t2 - t1, dy = c2 - c1;
  // Unknowns (x, s): x = xo + s * (-dy), 0 = yo + s * dx.
  const double a11 = 1.0, a12 = dy, b1 = xo;
  const double a21 = 0.0, a22 = dx, b2 = -yo;
  const double det = a11 * a22 - a12 * a21;
  const double t_c = (b1 * a22 - a12 * b2) / det;
  if (t_c_out) *t_c_out = t_c;
  return xo + lambda * (xo - t_c);
}

BimodalFit fit_of(double t1, double c1, double t2, double c2) {
  BimodalFit f;
  f.t1 = t1;
  f.c1 = c1;
  f.t2 = t2;
  f.c2 = c2;
  f.valid = true;
  return f;
}

Histogram256 histogram_of(const std::vector<std::pair<int, int>>& bins) {
  Histogram256 h;
  for (auto [b, n] : bins) {
    h.bins[b] += n;
    h.total += n;
  }
  return h;
}

InstanceMask dumbbell(int side) {
  BinaryMask b(side, side);
  fixtures::paint_disk(b, side / 2.0, side / 2.0 - 11, 8);
  fixtures::paint_disk(b, side / 2.0, side / 2.0 + 11, 8);
  for (int c = side / 2 - 4; c <= side / 2 + 4; ++c) {
    b.at(side / 2, c) = 1;
    b.at(side / 2 + 1, c) = 1;
  }
  return connected_components(b);
}

}  // namespace

TEST_CASE("detect_bimodal examples") {
  SUBCASE("two spikes") {
    const auto fit = detect_bimodal(histogram_of({{40, 500}, {200, 800}}));
    REQUIRE(fit.valid);
    CHECK(fit.t1 == doctest::Approx(40 / 255.0));
    CHECK(fit.t2 == doctest::Approx(200 / 255.0));
    CHECK(fit.c2 == doctest::Approx(1.0));
    CHECK(fit.c1 == doctest::Approx(500.0 / 800.0));
  }
  SUBCASE("one spike") { CHECK_FALSE(detect_bimodal(histogram_of({{120, 2500}})).valid); }
  SUBCASE("uniform") {
    Histogram256 h;
    for (auto& b : h.bins) b = 10;
    h.total = 2560;
    CHECK_FALSE(detect_bimodal(h).valid);
  }
  SUBCASE("a minority mode below the pixel share is ignored") {
    CHECK_FALSE(detect_bimodal(histogram_of({{40, 20}, {200, 2480}})).valid);
  }
}

TEST_CASE("adaptive_threshold worked example") {
  const auto res = adaptive_threshold(fit_of(0.2, 1.0, 0.8, 0.6), 0.2);
  double t_c = 0.0;
  const double expect = oracle_t_hat(0.2, 1.0, 0.8, 0.6, 0.2, &t_c);
  CHECK(res.t_o == doctest::Approx(0.5));
  CHECK(t_c == doctest::Approx(0.5 - 0.8 / 1.5));
  CHECK(res.t_c == doctest::Approx(t_c).epsilon(1e-12));
  CHECK(res.t_hat == doctest::Approx(expect).epsilon(1e-12));
  CHECK(res.t_hat == doctest::Approx(0.6067).epsilon(1e-4));
}

TEST_CASE("adaptive_threshold limit cases") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    double t1 = u(rng), t2 = u(rng);
    if (t1 > t2) std::swap(t1, t2);
    if (t2 - t1 < 1e-3) continue;
    const double c1 = u(rng), c2 = u(rng);
    const auto zero = adaptive_threshold(fit_of(t1, c1, t2, c2), 0.0);
    CHECK(zero.t_hat == zero.t_o);
    const auto flat = adaptive_threshold(fit_of(t1, c1, t2, c1), u(rng));
    CHECK(flat.t_hat == flat.t_o);
  }
}

TEST_CASE("adaptive_threshold is monotone in lambda and stays inside the peaks") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    double t1 = u(rng), t2 = u(rng);
    if (t1 > t2) std::swap(t1, t2);
    if (t2 - t1 < 1e-3) continue;
    const auto fit = fit_of(t1, u(rng), t2, u(rng));
    double prev = -1.0;
    for (double lambda = 0.0; lambda <= 1.0; lambda += 0.1) {
      const auto res = adaptive_threshold(fit, lambda);
      CHECK(res.t_hat > t1);
      CHECK(res.t_hat < t2);
      const double unclamped = res.t_o + lambda * (res.t_o - res.t_c);
      if (res.t_c < res.t_o) {
        CHECK(unclamped >= prev);
        prev = unclamped;
      }
      const double expect = oracle_t_hat(t1, fit.c1, t2, fit.c2, lambda);
      if (expect > t1 && expect < t2) CHECK(std::abs(res.t_hat - expect) < 1e-9);
    }
  }
}

TEST_CASE("partition_axis") {
  const auto parts = partition_axis(256, 50);
  REQUIRE(parts.size() == 5);
  CHECK(parts.front().first == 0);
  CHECK(parts.back().second == 256);
  for (std::size_t i = 1; i < parts.size(); ++i) CHECK(parts[i].first == parts[i - 1].second);
  for (auto [a, b] : parts) CHECK(std::abs((b - a) - 51) <= 1);
  CHECK(partition_axis(20, 50).size() == 1);
}

TEST_CASE("threshold_multiscale on dark disks") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.02);
  GrayMap g(256, 256);
  BinaryMask truth(256, 256);
  for (int r = 20; r < 256; r += 45) {
    for (int c = 20; c < 256; c += 45) fixtures::paint_disk(truth, r, c, 7);
  }
  for (std::size_t i = 0; i < g.pixel_count(); ++i) g[i] = (truth[i] ? 0.25 : 0.8) + noise(rng);
  const auto out = threshold_multiscale(g, ThresholdConfig{});
  std::size_t hit = 0, positives = 0, false_pos = 0;
  for (std::size_t i = 0; i < g.pixel_count(); ++i) {
    positives += truth[i];
    hit += truth[i] && out[i];
    false_pos += !truth[i] && out[i];
  }
  CHECK(static_cast<double>(hit) / positives >= 0.95);
  CHECK(false_pos < positives / 20);
}

TEST_CASE("threshold_multiscale on a blank tile") {
  const auto out = threshold_multiscale(GrayMap(120, 80, 0.7), ThresholdConfig{});
  for (auto v : out.values()) CHECK(v == 0);
}

TEST_CASE("threshold_multiscale falls back to the coarse context") {
  // Every 50 and 25 px patch sees one intensity plus a gentle gradient; only
  // the 100 px context around the dark block is bimodal.
  GrayMap g(200, 200);
  for (int r = 0; r < 200; ++r) {
    for (int c = 0; c < 200; ++c) {
      const bool block = r >= 50 && r < 100 && c >= 50 && c < 100;
      g.at(r, c) = (block ? 0.1 : 0.7) + 0.2 * c / 200.0;
    }
  }
  ThresholdConfig cfg;
  const auto out = threshold_multiscale(g, cfg);
  std::size_t fg = 0;
  for (int r = 0; r < 200; ++r) {
    for (int c = 0; c < 200; ++c) {
      const bool block = r >= 50 && r < 100 && c >= 50 && c < 100;
      CHECK(out.at(r, c) == (block ? 1 : 0));
      fg += out.at(r, c);
    }
  }
  CHECK(fg > 0);
  // Without the coarse context the block is never thresholded.
  cfg.coarse_patch_size = 50;
  const auto local_only = threshold_multiscale(g, cfg);
  for (auto v : local_only.values()) CHECK(v == 0);
}

TEST_CASE("fill_holes and speck removal") {
  BinaryMask b(21, 21);
  fixtures::paint_disk(b, 10, 10, 6);
  b.at(10, 10) = 0;
  const auto filled = fill_holes(b);
  CHECK(filled.at(10, 10) == 1);
  const auto refined = morph_refine(b, MorphConfig{});
  CHECK(refined.instance_count() == 1);
  CHECK(refined.at(10, 10) > 0);

  BinaryMask speck(10, 10);
  speck.at(4, 4) = speck.at(4, 5) = 1;
  CHECK(morph_refine(speck, MorphConfig{}).instance_count() == 0);
}

TEST_CASE("morph_refine splits concave shapes") {
  SUBCASE("dumbbell with a 2 px neck") {
    const auto shape = dumbbell(48);
    const auto out = morph_refine(shape.foreground(), MorphConfig{});
    REQUIRE(out.instance_count() == 2);
    CHECK(out.at(24, 24 - 11) != out.at(24, 24 + 11));
  }
  SUBCASE("figure eight") {
    BinaryMask b(48, 40);
    fixtures::paint_disk(b, 20, 12, 9);
    fixtures::paint_disk(b, 20, 36, 9);
    for (int r = 17; r < 23; ++r) {
      for (int c = 12; c <= 36; ++c) b.at(r, c) = 1;
    }
    const auto out = morph_refine(b, MorphConfig{});
    REQUIRE(out.instance_count() == 2);
    CHECK(out.at(20, 8) != out.at(20, 40));
  }
  SUBCASE("convex ellipse is left alone") {
    BinaryMask b(40, 30);
    for (int r = 0; r < 30; ++r) {
      for (int c = 0; c < 40; ++c) {
        const double x = (c - 20) / 14.0, y = (r - 15) / 8.0;
        b.at(r, c) = x * x + y * y <= 1.0;
      }
    }
    const auto out = morph_refine(b, MorphConfig{});
    CHECK(out.instance_count() == 1);
    CHECK(out.foreground() == b);
  }
  SUBCASE("crescent has one concavity and stays whole") {
    BinaryMask b(40, 40);
    fixtures::paint_disk(b, 20, 20, 12);
    BinaryMask bite(40, 40);
    fixtures::paint_disk(bite, 20, 28, 9);
    for (std::size_t i = 0; i < b.pixel_count(); ++i) b[i] = b[i] && !bite[i];
    const auto out = morph_refine(b, MorphConfig{});
    CHECK(out.instance_count() == 1);
  }
}

TEST_CASE("morph_refine never adds foreground beyond filled holes") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask b(64, 64);
    for (int k = 0; k < 8; ++k) fixtures::paint_disk(b, 64 * u(rng), 64 * u(rng), 3 + 7 * u(rng));
    for (auto& v : b.values()) {
      if (u(rng) < 0.03) v = 1 - v;
    }
    const auto filled = fill_holes(b);
    const auto out = morph_refine(b, MorphConfig{});
    for (std::size_t i = 0; i < b.pixel_count(); ++i) {
      if (out[i] > 0) CHECK(filled[i] == 1);
    }
    for (const auto& pixels : instance_pixels(out)) {
      if (!pixels.empty()) CHECK(static_cast<int>(pixels.size()) >= MorphConfig{}.min_area);
    }
  }
}

TEST_CASE("lair_similarity") {
  const std::array<double, 6> ref{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  CHECK(lair_similarity(ref, ref, 0.1) == 1.0);
  // Squared distance ln(1/0.7)/0.1 sits exactly on the threshold.
  auto q = ref;
  q[0] += std::sqrt(std::log(1.0 / 0.7) / 0.1);
  const double s = lair_similarity(ref, q, 0.1);
  CHECK(s == doctest::Approx(0.7).epsilon(1e-12));
  CHECK_FALSE(s < 0.7 - 1e-12);
}

namespace {

struct LairScene {
  InstanceMask mask;
  HsiImage hsi;
};

// Ten nuclei of growing radius in one 200 px patch; `odd` paints the smallest
// one with a two-colour texture unlike the rest.
LairScene lair_scene(bool odd) {
  InstanceMask mask(200, 200);
  RgbTile rgb = fixtures::solid_tile(200, 200, 0.92, 0.75, 0.80);
  for (int k = 0; k < 10; ++k) {
    const double cr = 30 + 60 * (k / 4), cc = 25 + 45 * (k % 4);
    fixtures::paint_disk(mask, cr, cc, 4 + k, k + 1);
  }
  for (int r = 0; r < 200; ++r) {
    for (int c = 0; c < 200; ++c) {
      const auto label = mask.at(r, c);
      if (label == 0) continue;
      if (odd && label == 1) {
        if ((r + c) % 2) {
          fixtures::set_rgb(rgb, r, c, 0.9, 0.9, 0.2);
        } else {
          fixtures::set_rgb(rgb, r, c, 0.2, 0.2, 0.9);
        }
      } else {
        fixtures::set_rgb(rgb, r, c, 0.35, 0.25, 0.55);
      }
    }
  }
  return {mask, rgb_to_hsi(rgb)};
}

}  // namespace

TEST_CASE("lair_filter keeps homogeneous nuclei") {
  const auto scene = lair_scene(false);
  CHECK(lair_filter(scene.mask, scene.hsi, LairConfig{}) == scene.mask);
}

TEST_CASE("lair_filter removes a small anomalous instance and nothing else") {
  const auto scene = lair_scene(true);
  const auto out = lair_filter(scene.mask, scene.hsi, LairConfig{});
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (scene.mask[i] == 1) {
      CHECK(out[i] == 0);
    } else {
      CHECK(out[i] == scene.mask[i]);
    }
  }
}

TEST_CASE("lair_filter only deletes whole instances") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    InstanceMask mask(160, 160);
    RgbTile rgb(160, 160);
    for (auto& v : rgb.values()) v = u(rng);
    for (int k = 1; k <= 25; ++k) fixtures::paint_disk(mask, 160 * u(rng), 160 * u(rng), 2 + 6 * u(rng), k);
    const auto out = lair_filter(mask, rgb_to_hsi(rgb), LairConfig{});
    const auto before = instance_pixels(mask);
    const auto after = instance_pixels(out);
    for (std::size_t l = 1; l < after.size(); ++l) {
      if (!after[l].empty()) CHECK(after[l] == before[l]);
    }
    for (std::size_t i = 0; i < out.pixel_count(); ++i) CHECK((out[i] == 0 || out[i] == mask[i]));
  }
}
