#include "lgnh/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lgnh/core/error.hpp"
#include "lgnh/core/filters.hpp"
#include "lgnh/core/image_ops.hpp"
#include "lgnh/core/keyvalue.hpp"

namespace lgnh::synth {

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw InputError("synth: tile size must be positive");
  if (count_min < 0 || count_max < count_min) throw InputError("synth: bad nucleus count range");
  if (radius_min < 2.0 || radius_max < radius_min) throw InputError("synth: radii must be >= 2 px and ordered");
  if (eccentricity_min < 0.0 || eccentricity_max >= 1.0 || eccentricity_max < eccentricity_min) {
    throw InputError("synth: eccentricity range must lie in [0,1)");
  }
  for (const auto* c : {&hematoxylin_mean, &eosin_mean}) {
    for (double v : *c) {
      if (!(v >= 0.0 && v <= 1.0)) throw InputError("synth: colours must lie in [0,1]");
    }
  }
  if (hematoxylin_jitter < 0.0 || eosin_jitter < 0.0 || noise_sigma < 0.0 || blur_sigma < 0.0) {
    throw InputError("synth: jitter, noise and blur must be non-negative");
  }
  if (!(overlap_probability >= 0.0 && overlap_probability <= 1.0)) throw InputError("synth: bad overlap probability");
}

namespace {

struct Ellipse {
  double row = 0.0, col = 0.0, a = 0.0, b = 0.0, angle = 0.0;

  bool contains(int r, int c) const {
    const double dy = r - row, dx = c - col;
    const double u = dx * std::cos(angle) + dy * std::sin(angle);
    const double v = -dx * std::sin(angle) + dy * std::cos(angle);
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
};

std::vector<Pixel> pixels_of(const Ellipse& e, int w, int h) {
  std::vector<Pixel> out;
  const int r0 = std::max(0, static_cast<int>(std::floor(e.row - e.a))), r1 = std::min(h - 1, static_cast<int>(std::ceil(e.row + e.a)));
  const int c0 = std::max(0, static_cast<int>(std::floor(e.col - e.a))), c1 = std::min(w - 1, static_cast<int>(std::ceil(e.col + e.a)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (e.contains(r, c)) out.push_back({r, c});
    }
  }
  return out;
}

bool connected(const std::vector<Pixel>& px, int w, int h) {
  if (px.empty()) return false;
  BinaryMask m(w, h);
  for (const auto& p : px) m.at(p.row, p.col) = 1;
  return connected_components(m).instance_count() == 1;
}

}  // namespace

SynthTile generate_tile(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const int w = spec.width, h = spec.height;

  SynthTile out;
  out.mask = InstanceMask(w, h);
  out.requested = std::uniform_int_distribution<int>(spec.count_min, spec.count_max)(rng);

  std::array<double, 3> background{};
  for (int ch = 0; ch < 3; ++ch) {
    background[ch] = std::clamp(spec.eosin_mean[ch] + uniform(-spec.eosin_jitter, spec.eosin_jitter), 0.0, 1.0);
  }

  std::vector<Ellipse> placed;
  std::vector<std::array<double, 3>> colours;
  std::vector<char> paired;
  const double min_area = std::numbers::pi * spec.radius_min * spec.radius_min / 2.0;
  for (int n = 0; n < out.requested; ++n) {
    std::vector<int> single;
    for (std::size_t i = 0; i < placed.size(); ++i) {
      if (!paired[i]) single.push_back(static_cast<int>(i));
    }
    const bool want_overlap = !single.empty() && unit(rng) < spec.overlap_probability;
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      Ellipse e;
      e.a = uniform(spec.radius_min, spec.radius_max);
      const double ecc = uniform(spec.eccentricity_min, spec.eccentricity_max);
      e.b = std::max(2.0, e.a * std::sqrt(1.0 - ecc * ecc));
      e.angle = uniform(0.0, std::numbers::pi);
      int partner = -1;
      if (want_overlap) {
        partner = single[std::uniform_int_distribution<std::size_t>(0, single.size() - 1)(rng)];
        const auto& p = placed[partner];
        const double dist = uniform(0.7, 0.95) * (p.a + e.a);
        const double theta = uniform(0.0, 2.0 * std::numbers::pi);
        e.row = p.row + dist * std::sin(theta);
        e.col = p.col + dist * std::cos(theta);
      } else {
        e.row = uniform(e.a, h - 1 - e.a);
        e.col = uniform(e.a, w - 1 - e.a);
      }
      if (e.row < e.a || e.row > h - 1 - e.a || e.col < e.a || e.col > w - 1 - e.a) continue;
      const bool clear = std::all_of(placed.begin(), placed.end(), [&](const Ellipse& q) {
        if (&q == (partner >= 0 ? &placed[partner] : nullptr)) return true;
        return std::hypot(q.row - e.row, q.col - e.col) >= q.a + e.a + 1.0;
      });
      if (!clear) continue;
      const auto px = pixels_of(e, w, h);
      if (static_cast<double>(px.size()) < min_area) continue;
      if (partner >= 0) {
        // The earlier nucleus must survive the overwrite as one sizeable piece.
        const std::int32_t label = partner + 1;
        std::vector<Pixel> rest;
        for (const auto& p : pixels_of(placed[partner], w, h)) {
          if (out.mask.at(p.row, p.col) == label && !e.contains(p.row, p.col)) rest.push_back(p);
        }
        if (static_cast<double>(rest.size()) < min_area || !connected(rest, w, h)) continue;
      }
      const auto label = static_cast<std::int32_t>(placed.size() + 1);
      for (const auto& p : px) out.mask.at(p.row, p.col) = label;
      std::array<double, 3> colour{};
      for (int ch = 0; ch < 3; ++ch) {
        colour[ch] = std::clamp(spec.hematoxylin_mean[ch] + uniform(-spec.hematoxylin_jitter, spec.hematoxylin_jitter),
                                0.0, 1.0);
      }
      placed.push_back(e);
      colours.push_back(colour);
      paired.push_back(partner >= 0 ? 1 : 0);
      if (partner >= 0) paired[partner] = 1;
      ok = true;
    }
  }
  out.placed = static_cast<int>(placed.size());
  out.packing_limited = out.placed < out.requested;

  RgbTile clean(w, h);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto l = out.mask.at(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        const double base = l > 0 ? colours[l - 1][ch] : background[ch];
        clean.at(r, c, ch) = base + (spec.noise_sigma > 0.0 ? noise(rng) : 0.0);
      }
    }
  }
  out.rgb = RgbTile(w, h);
  for (int ch = 0; ch < 3; ++ch) {
    const GrayMap blurred = spec.blur_sigma > 0.0 ? gaussian_blur(clean, ch, spec.blur_sigma) : GrayMap();
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double v = spec.blur_sigma > 0.0 ? blurred.at(r, c) : clean.at(r, c, ch);
        out.rgb.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

SceneSpec easy_spec(std::uint64_t seed) {
  SceneSpec s;
  s.hematoxylin_jitter = 0.02;
  s.eosin_jitter = 0.02;
  s.eccentricity_max = 0.5;
  s.noise_sigma = 0.02;
  s.seed = seed;
  return s;
}

SceneSpec dumbbell_spec(std::uint64_t seed) {
  SceneSpec s = easy_spec(seed);
  s.count_min = 24;
  s.count_max = 30;
  s.overlap_probability = 1.0;
  return s;
}

SceneSpec faint_spec(std::uint64_t seed) {
  SceneSpec s = easy_spec(seed);
  for (int ch = 0; ch < 3; ++ch) {
    s.hematoxylin_mean[ch] = s.eosin_mean[ch] + 0.5 * (s.hematoxylin_mean[ch] - s.eosin_mean[ch]);
  }
  return s;
}

void bind_fields(KeyValueSchema& k, SceneSpec& s, const std::string& prefix) {
  k.bind(prefix + "width", s.width);
  k.bind(prefix + "height", s.height);
  k.bind(prefix + "count_min", s.count_min);
  k.bind(prefix + "count_max", s.count_max);
  k.bind(prefix + "radius_min", s.radius_min);
  k.bind(prefix + "radius_max", s.radius_max);
  k.bind(prefix + "eccentricity_min", s.eccentricity_min);
  k.bind(prefix + "eccentricity_max", s.eccentricity_max);
  k.bind(prefix + "hematoxylin_r", s.hematoxylin_mean[0]);
  k.bind(prefix + "hematoxylin_g", s.hematoxylin_mean[1]);
  k.bind(prefix + "hematoxylin_b", s.hematoxylin_mean[2]);
  k.bind(prefix + "hematoxylin_jitter", s.hematoxylin_jitter);
  k.bind(prefix + "eosin_r", s.eosin_mean[0]);
  k.bind(prefix + "eosin_g", s.eosin_mean[1]);
  k.bind(prefix + "eosin_b", s.eosin_mean[2]);
  k.bind(prefix + "eosin_jitter", s.eosin_jitter);
  k.bind(prefix + "noise_sigma", s.noise_sigma);
  k.bind(prefix + "blur_sigma", s.blur_sigma);
  k.bind(prefix + "overlap_probability", s.overlap_probability);
  k.bind(prefix + "seed", s.seed);
}

namespace {

KeyValueSchema schema_of(SceneSpec& s) {
  KeyValueSchema k;
  bind_fields(k, s);
  return k;
}

}  // namespace

std::string format_spec(const SceneSpec& spec) {
  SceneSpec copy = spec;
  return schema_of(copy).format();
}

SceneSpec parse_spec(const std::string& text) {
  SceneSpec s;
  schema_of(s).parse(text);
  s.validate();
  return s;
}

void save_spec(const SceneSpec& spec, const std::filesystem::path& path) { write_text_file(path.string(), format_spec(spec)); }

SceneSpec load_spec(const std::filesystem::path& path) { return parse_spec(read_text_file(path.string())); }

}  // namespace lgnh::synth
