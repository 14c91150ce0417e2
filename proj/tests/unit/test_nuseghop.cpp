#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "lgnh/core/error.hpp"
#include "lgnh/nuseghop/gbdt.hpp"
#include "lgnh/nuseghop/nuseghop.hpp"
#include "lgnh/nuseghop/saab.hpp"

using namespace lgnh;
using namespace lgnh::nuseghop;

namespace {

void check_kernel_invariants(const SaabKernel& k, double energy_threshold) {
  const Eigen::MatrixXd gram = k.weights * k.weights.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-6);
  for (std::size_t i = 0; i < k.energies.size(); ++i) {
    CHECK(k.energies[i] >= energy_threshold);
    if (i > 0) CHECK(k.energies[i] <= k.energies[i - 1]);
  }
}

Eigen::MatrixXd low_rank_samples(int n, int k, int rank, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd basis(rank, k);
  for (int i = 0; i < rank; ++i) {
    for (int j = 0; j < k; ++j) basis(i, j) = g(rng);
  }
  Eigen::MatrixXd x(n, k);
  for (int r = 0; r < n; ++r) {
    Eigen::RowVectorXd coef(rank);
    for (int i = 0; i < rank; ++i) coef[i] = g(rng);
    x.row(r) = coef * basis;
    for (int j = 0; j < k; ++j) x(r, j) += noise * g(rng);
  }
  return x;
}

// Left half a fine checkerboard, right half flat gray with mild noise; both
// halves share the same mean intensity.
RgbTile texture_tile(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.03);
  RgbTile t(side, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double v = c < side / 2 ? ((r + c) % 2 ? 0.8 : 0.2) + n(rng) : 0.5 + n(rng);
      fixtures::set_rgb(t, r, c, v, v, v);
    }
  }
  return t;
}

InstanceMask left_half(int side) {
  InstanceMask m(side, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side / 2; ++c) m.at(r, c) = 1;
  }
  return m;
}

NuSegHopConfig small_config() {
  NuSegHopConfig cfg;
  cfg.n_samples = 4000;
  cfg.classifier.trees = 30;
  return cfg;
}

double oracle_loss(const std::vector<float>& v, const std::vector<std::uint8_t>& y) {
  double n1 = 0, n0 = 0;
  for (auto l : y) (l ? n1 : n0) += 1;
  auto weight = [&](std::uint8_t l) {
    if (n0 == 0 || n1 == 0) return 1.0 / static_cast<double>(v.size());
    return l ? 0.5 / n1 : 0.5 / n0;
  };
  auto h = [](double pos, double all) {
    if (all <= 0) return 0.0;
    const double p = pos / all;
    double e = 0;
    if (p > 0) e -= p * std::log2(p);
    if (p < 1) e -= (1 - p) * std::log2(1 - p);
    return e;
  };
  double pos_total = 0, all_total = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    all_total += weight(y[i]);
    if (y[i]) pos_total += weight(y[i]);
  }
  double best = h(pos_total, all_total);
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());
  if (!(hi > lo)) return best;
  for (int i = 1; i <= 31; ++i) {
    const double t = lo + i * (hi - lo) / 32.0;
    double lp = 0, la = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] <= t) {
        la += weight(y[j]);
        if (y[j]) lp += weight(y[j]);
      }
    }
    best = std::min(best, la * h(lp, la) + (all_total - la) * h(pos_total - lp, all_total - la));
  }
  return best;
}

}  // namespace

TEST_CASE("fit_saab on constant cuboids is an EmptyKernel") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(50, 9, 0.4);
  CHECK_THROWS_AS(fit_saab(x, SaabOptions{}, {3, 3, 1}), EmptyKernel);
}

TEST_CASE("fit_saab isotropic plane") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, 0, 1, -1, 0, 0, -1;
  SUBCASE("without DC removal both directions are kept with equal energy") {
    SaabOptions opts;
    opts.remove_dc = false;
    const auto k = fit_saab(x, opts, {1, 1, 2});
    REQUIRE(k.ac_count() == 2);
    CHECK(k.energies[0] == doctest::Approx(0.5));
    CHECK(k.energies[1] == doctest::Approx(0.5));
    CHECK_FALSE(k.dc_included);
    check_kernel_invariants(k, opts.energy_threshold);
  }
  SUBCASE("with DC removal a single AC direction remains") {
    const auto k = fit_saab(x, SaabOptions{}, {1, 1, 2});
    REQUIRE(k.ac_count() == 1);
    CHECK(k.output_size() == 2);
    CHECK(std::abs(k.weights(0, 0)) == doctest::Approx(std::sqrt(0.5)));
    CHECK(k.weights(0, 0) == doctest::Approx(-k.weights(0, 1)));
  }
}

TEST_CASE("fit_saab recovers a planted rank") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SaabOptions opts;
    opts.remove_dc = false;
    const auto k = fit_saab(low_rank_samples(1500, 27, 3, 1e-6, seed), opts, {3, 3, 3});
    CHECK(k.ac_count() == 3);
    check_kernel_invariants(k, opts.energy_threshold);
  }
}

TEST_CASE("fit_saab respects max_dims and the energy threshold") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(800, 27);
  for (int r = 0; r < x.rows(); ++r) {
    for (int c = 0; c < 27; ++c) x(r, c) = g(rng) * (1.0 + c);
  }
  const auto k = fit_saab(x, SaabOptions{}, {3, 3, 3});
  CHECK(k.ac_count() == 10);
  check_kernel_invariants(k, 1e-3);
  CHECK_THROWS_AS(fit_saab(x, SaabOptions{}, {3, 3, 2}), InputError);
  CHECK_THROWS_AS(fit_saab(Eigen::MatrixXd(5, 27), SaabOptions{}, {3, 3, 3}), InputError);
}

TEST_CASE("moment accumulator merges like one pass") {
  const auto x = low_rank_samples(300, 6, 6, 0.0, 4);
  MomentAccumulator whole(6), a(6), b(6);
  whole.add_rows(x);
  a.add_rows(x.topRows(120));
  for (int r = 120; r < 300; ++r) {
    std::vector<double> row(6);
    for (int c = 0; c < 6; ++c) row[c] = x(r, c);
    b.add(row);
  }
  a.merge(b);
  CHECK(a.weight() == whole.weight());
  CHECK((a.mean() - whole.mean()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.covariance() - whole.covariance()).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - mu;
  const Eigen::MatrixXd cov = centred.transpose() * centred / 300.0;
  CHECK((whole.covariance() - cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("apply_saab examples") {
  const auto k = fit_saab(low_rank_samples(500, 9, 5, 0.01, 6), SaabOptions{}, {3, 3, 1});
  std::vector<double> out(k.output_size());
  SUBCASE("constant cuboid") {
    const std::vector<double> x(9, 0.37);
    apply_saab(x, k, out);
    CHECK(out[0] == doctest::Approx(0.37));
    for (int i = 1; i < k.output_size(); ++i) CHECK(std::abs(out[i]) < 1e-12);
  }
  SUBCASE("kernel rows map to unit vectors") {
    for (int i = 0; i < k.ac_count(); ++i) {
      std::vector<double> x(9);
      for (int j = 0; j < 9; ++j) x[j] = k.weights(i, j);
      apply_saab(x, k, out);
      CHECK(std::abs(out[0]) < 1e-12);
      for (int j = 0; j < k.ac_count(); ++j) CHECK(out[j + 1] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    }
  }
  SUBCASE("DC is the mean and AC energy never exceeds the residual") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x(9);
      for (auto& v : x) v = u(rng);
      apply_saab(x, k, out);
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= 9.0;
      CHECK(out[0] == mean);
      double residual = 0.0, ac = 0.0;
      for (double v : x) residual += (v - mean) * (v - mean);
      for (int i = 1; i < k.output_size(); ++i) ac += out[i] * out[i];
      CHECK(ac <= residual + 1e-9);
    }
  }
  SUBCASE("size mismatch") { CHECK_THROWS_AS(apply_saab(std::vector<double>(8), k, out), InputError); }
}

TEST_CASE("PCA-mode outputs are decorrelated on the fitting sample") {
  const auto x = low_rank_samples(2000, 12, 7, 0.05, 10);
  SaabOptions opts;
  opts.remove_dc = false;
  const auto k = fit_saab(x, opts, {1, 1, 12});
  const Eigen::MatrixXd y = apply_saab(x, k);
  const Eigen::RowVectorXd mu = y.colwise().mean();
  const Eigen::MatrixXd c = (y.rowwise() - mu).transpose() * (y.rowwise() - mu) / static_cast<double>(y.rows());
  const double diag = c.diagonal().cwiseAbs().sum();
  const double off = c.cwiseAbs().sum() - diag;
  CHECK(off / diag < 1e-6);
}

TEST_CASE("discriminant_loss matches a direct split search") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 20 + trial * 7;
    std::vector<float> v(n);
    std::vector<std::uint8_t> y(n);
    for (int i = 0; i < n; ++i) {
      y[i] = coin(rng);
      v[i] = static_cast<float>(g(rng) + (y[i] ? 0.1 * trial : 0.0));
    }
    // Quantized values land exactly on thresholds now and then.
    if (trial % 2) {
      for (auto& x : v) x = std::round(x * 4.0f) / 4.0f;
    }
    CHECK(discriminant_loss(v, y) == doctest::Approx(oracle_loss(v, y)).epsilon(1e-9));
  }
}

TEST_CASE("select_discriminant examples") {
  const int rows = 200, cols = 130;
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<std::uint8_t> y(rows);
  for (int r = 0; r < rows; ++r) y[r] = r % 3 == 0;
  std::vector<float> x(rows * cols);
  for (auto& v : x) v = u(rng);
  for (int r = 0; r < rows; ++r) {
    x[r * cols + 77] = y[r];         // equals the label
    x[r * cols + 5] = 0.5f;          // constant
    x[r * cols + 40] = x[r * cols + 90] = y[r] ? 0.4f + 0.6f * u(rng) : 0.6f * u(rng);
  }
  std::vector<float> col(rows);
  for (int r = 0; r < rows; ++r) col[r] = x[r * cols + 5];
  const double worst = discriminant_loss(col, y);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) col[r] = x[r * cols + c];
    CHECK(discriminant_loss(col, y) <= worst + 1e-12);
  }

  const auto kept = select_discriminant(x, cols, y, 100);
  REQUIRE(kept.size() == 100);
  CHECK(kept[0] == 77);
  CHECK(kept[1] == 40);
  CHECK(kept[2] == 90);
  CHECK(std::find(kept.begin(), kept.end(), 5) == kept.end());

  const auto all = select_discriminant(x, cols, y, 200);
  CHECK(all.size() == static_cast<std::size_t>(cols));
}

TEST_CASE("gradient boosted trees") {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  const int n = 3000;
  std::vector<float> x(n * 3);
  std::vector<std::uint8_t> y(n);
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < 3; ++f) x[i * 3 + f] = u(rng);
    y[i] = (x[i * 3] > 0) != (x[i * 3 + 1] > 0);
  }
  GbdtConfig cfg;
  GradientBoostedTrees model;
  model.fit(x, y, 3, cfg);
  CHECK(model.trees().size() == static_cast<std::size_t>(cfg.trees));
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const double p = model.predict_proba(&x[i * 3]);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    correct += (p > 0.5) == (y[i] != 0);
  }
  CHECK(correct > 0.95 * n);
  for (const auto& tree : model.trees()) {
    for (const auto& node : tree) {
      if (node.feature >= 0) CHECK(node.feature < 3);
    }
  }

  GradientBoostedTrees again;
  again.fit(x, y, 3, cfg);
  CHECK(again == model);
  const auto rebuilt = GradientBoostedTrees::from_parts(3, model.base_margin(), model.trees());
  CHECK(rebuilt == model);
}

TEST_CASE("NuSegHop separates two textures") {
  const int side = 64;
  const auto tile = texture_tile(side, 1);
  const auto hsi = rgb_to_hsi(tile);
  const auto label = left_half(side);
  const auto cfg = small_config();
  const auto model = fit_model(hsi, label, cfg, 7);

  CHECK(model.layer1.ac_count() <= 10);
  CHECK(model.selected.size() == static_cast<std::size_t>(cfg.n_selected));
  CHECK(model.parameter_count() > 0);
  CHECK(model.parameter_count() < 400000);
  CHECK_NOTHROW(model.validate());
  for (std::size_t i = 1; i < model.selected.size(); ++i) {
    CHECK(model.selected[i - 1].global_index < model.selected[i].global_index);
  }

  // Held out: a fresh tile with the same textures and new noise.
  const auto held_hsi = rgb_to_hsi(texture_tile(side, 2));
  const auto heat = predict_heatmap(held_hsi, model);
  REQUIRE(heat.same_shape(held_hsi));
  int correct = 0, total = 0;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      CHECK(heat.at(r, c) >= 0.0);
      CHECK(heat.at(r, c) <= 1.0);
      if (std::abs(c - side / 2) < 5) continue;
      ++total;
      correct += (heat.at(r, c) > 0.5) == (c < side / 2);
    }
  }
  CHECK(static_cast<double>(correct) / total >= 0.9);

  // A memorized foreground window.
  CHECK(predict_heatmap(hsi, model).at(side / 2, side / 4) > 0.5);

  SUBCASE("uniform input gives a constant heatmap") {
    const auto flat = predict_heatmap(rgb_to_hsi(fixtures::solid_tile(20, 20, 0.5, 0.5, 0.5)), model);
    for (std::size_t i = 0; i < flat.pixel_count(); ++i) CHECK(flat[i] == flat[0]);
  }
  SUBCASE("fits are deterministic") {
    const auto again = fit_model(hsi, label, cfg, 7);
    CHECK(again == model);
    CHECK(predict_heatmap(held_hsi, again) == heat);
  }
  SUBCASE("selected features are the matching entries of the full vector") {
    const std::vector<Pixel> px{{0, 0}, {10, 3}, {40, 50}, {63, 63}};
    const auto full = extract_features(held_hsi, model, px);
    const auto sel = extract_selected(held_hsi, model, px);
    REQUIRE(full.size() == px.size() * static_cast<std::size_t>(model.total_features));
    REQUIRE(sel.size() == px.size() * model.selected.size());
    for (std::size_t p = 0; p < px.size(); ++p) {
      for (std::size_t j = 0; j < model.selected.size(); ++j) {
        const float a = sel[p * model.selected.size() + j];
        const float b = full[p * model.total_features + model.selected[j].global_index];
        CHECK(a == doctest::Approx(b).epsilon(1e-5).scale(1.0));
      }
    }
  }
  SUBCASE("serialization is bit-exact") {
    std::stringstream buf;
    save_model(model, buf);
    CHECK(buf.str().substr(0, 4) == "NSHM");
    const auto back = load_model(buf);
    CHECK(back == model);
    CHECK(predict_heatmap(held_hsi, back) == heat);
    std::stringstream junk("NOPE and more");
    CHECK_THROWS_AS(load_model(junk), InputError);
  }
}

TEST_CASE("NuSegHop rejects a single-class pseudolabel") {
  const auto hsi = rgb_to_hsi(texture_tile(32, 3));
  CHECK_THROWS_AS(fit_model(hsi, InstanceMask(32, 32), small_config(), 1), DegeneratePseudolabel);
  InstanceMask all(32, 32);
  for (auto& v : all.values()) v = 1;
  CHECK_THROWS_AS(fit_model(hsi, all, small_config(), 1), DegeneratePseudolabel);
}

TEST_CASE("NuSegHop config validation") {
  NuSegHopConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.pooled_size() == 5);
  cfg.n_selected = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}
