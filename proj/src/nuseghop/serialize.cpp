#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "lgnh/core/error.hpp"
#include "lgnh/nuseghop/nuseghop.hpp"

namespace lgnh::nuseghop {

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i16(std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    u8(static_cast<std::uint8_t>(u));
    u8(static_cast<std::uint8_t>(u >> 8));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) { buf_ += s; }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : buf_(std::move(data)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int16_t i16() {
    const std::uint16_t lo = u8();
    const std::uint16_t hi = u8();
    return static_cast<std::int16_t>(lo | (hi << 8));
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  /// Guards element counts read from the stream against the bytes left.
  std::size_t count(std::size_t min_bytes_each) {
    const std::size_t n = u32();
    if (min_bytes_each > 0 && n > (buf_.size() - pos_) / min_bytes_each) throw InputError("model file: bad count");
    return n;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw InputError("model file is truncated");
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

void put_kernel(Writer& w, const SaabKernel& k) {
  for (int d : k.input_dims) w.i32(d);
  w.u8(k.dc_included ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(k.weights.rows()));
  w.u32(static_cast<std::uint32_t>(k.weights.cols()));
  for (double e : k.energies) w.f64(e);
  for (Eigen::Index r = 0; r < k.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < k.weights.cols(); ++c) w.f64(k.weights(r, c));
  }
  w.u32(static_cast<std::uint32_t>(k.offset.size()));
  for (Eigen::Index i = 0; i < k.offset.size(); ++i) w.f64(k.offset[i]);
}

SaabKernel get_kernel(Reader& r) {
  SaabKernel k;
  for (auto& d : k.input_dims) {
    d = r.i32();
    if (d <= 0 || d > 4096) throw InputError("model file: bad kernel dims");
  }
  k.dc_included = r.u8() != 0;
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  if (static_cast<int>(cols) != k.input_size() || rows > cols) throw InputError("model file: bad kernel shape");
  k.energies.resize(rows);
  for (auto& e : k.energies) e = r.f64();
  k.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) k.weights(i, j) = r.f64();
  }
  const std::size_t n = r.count(8);
  if (n != 0 && n != cols) throw InputError("model file: bad kernel offset");
  k.offset.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) k.offset[i] = r.f64();
  return k;
}

void put_section(Writer& out, const char (&tag)[5], const Writer& body) {
  out.bytes(std::string(tag, 4));
  out.u64(body.str().size());
  out.bytes(body.str());
}

}  // namespace

void save_model(const NuSegHopModel& model, std::ostream& os) {
  Writer out;
  out.bytes("NSHM");
  out.u32(kVersion);

  Writer conf;
  const auto& c = model.config;
  for (int v : {c.window, c.filter1, c.pool, c.filter2}) conf.i32(v);
  conf.f64(c.energy_threshold);
  for (int v : {c.max_dims, c.n_selected, c.n_samples, c.classifier.trees, c.classifier.max_depth}) conf.i32(v);
  conf.f64(c.classifier.learning_rate);
  conf.f64(c.classifier.l2);
  conf.f64(c.classifier.min_child_hessian);
  conf.i32(c.classifier.max_bins);
  put_section(out, "CONF", conf);

  Writer k1;
  put_kernel(k1, model.layer1);
  put_section(out, "KRN1", k1);

  Writer k2;
  k2.u32(static_cast<std::uint32_t>(model.layer2.size()));
  for (const auto& k : model.layer2) put_kernel(k2, k);
  put_section(out, "KRN2", k2);

  Writer s1;
  s1.u32(static_cast<std::uint32_t>(model.spectral1.size()));
  for (const auto& k : model.spectral1) put_kernel(s1, k);
  put_section(out, "SPC1", s1);

  Writer s2;
  s2.u32(static_cast<std::uint32_t>(model.spectral2.size()));
  for (const auto& row : model.spectral2) {
    s2.u32(static_cast<std::uint32_t>(row.size()));
    for (const auto& k : row) put_kernel(s2, k);
  }
  put_section(out, "SPC2", s2);

  Writer sel;
  sel.i64(model.total_features);
  sel.u32(static_cast<std::uint32_t>(model.selected.size()));
  for (const auto& ref : model.selected) {
    sel.u8(static_cast<std::uint8_t>(ref.kind));
    sel.i16(ref.parent);
    sel.i16(ref.child);
    sel.i16(ref.index);
    sel.i32(ref.global_index);
  }
  put_section(out, "SELF", sel);

  Writer tree;
  tree.i32(model.classifier.feature_count());
  tree.f64(model.classifier.base_margin());
  tree.u32(static_cast<std::uint32_t>(model.classifier.trees().size()));
  for (const auto& t : model.classifier.trees()) {
    tree.u32(static_cast<std::uint32_t>(t.size()));
    for (const auto& n : t) {
      tree.i32(n.feature);
      tree.f32(n.threshold);
      tree.i32(n.left);
      tree.i32(n.right);
      tree.f64(n.value);
    }
  }
  put_section(out, "TREE", tree);

  os.write(out.str().data(), static_cast<std::streamsize>(out.str().size()));
  if (!os) throw Error("failed to write model");
}

NuSegHopModel load_model(std::istream& is) {
  std::ostringstream ss;
  ss << is.rdbuf();
  Reader in(ss.str());
  if (in.bytes(4) != "NSHM") throw InputError("not a NuSegHop model file");
  if (in.u32() != kVersion) throw InputError("unsupported model version");

  std::map<std::string, std::string> sections;
  while (!in.done()) {
    auto tag = in.bytes(4);
    const auto len = in.u64();
    if (len > (std::uint64_t{1} << 40)) throw InputError("model file: bad section length");
    sections[tag] = in.bytes(static_cast<std::size_t>(len));
  }
  auto section = [&](const char* tag) {
    auto it = sections.find(tag);
    if (it == sections.end()) throw InputError(std::string("model file lacks section ") + tag);
    return Reader(it->second);
  };

  NuSegHopModel m;
  {
    auto r = section("CONF");
    auto& c = m.config;
    c.window = r.i32();
    c.filter1 = r.i32();
    c.pool = r.i32();
    c.filter2 = r.i32();
    c.energy_threshold = r.f64();
    c.max_dims = r.i32();
    c.n_selected = r.i32();
    c.n_samples = r.i32();
    c.classifier.trees = r.i32();
    c.classifier.max_depth = r.i32();
    c.classifier.learning_rate = r.f64();
    c.classifier.l2 = r.f64();
    c.classifier.min_child_hessian = r.f64();
    c.classifier.max_bins = r.i32();
  }
  {
    auto r = section("KRN1");
    m.layer1 = get_kernel(r);
  }
  {
    auto r = section("KRN2");
    const auto n = r.count(13);
    for (std::size_t i = 0; i < n; ++i) m.layer2.push_back(get_kernel(r));
  }
  {
    auto r = section("SPC1");
    const auto n = r.count(13);
    for (std::size_t i = 0; i < n; ++i) m.spectral1.push_back(get_kernel(r));
  }
  {
    auto r = section("SPC2");
    const auto n = r.count(4);
    for (std::size_t i = 0; i < n; ++i) {
      m.spectral2.emplace_back();
      const auto q = r.count(13);
      for (std::size_t j = 0; j < q; ++j) m.spectral2.back().push_back(get_kernel(r));
    }
  }
  {
    auto r = section("SELF");
    m.total_features = r.i64();
    const auto n = r.count(11);
    for (std::size_t i = 0; i < n; ++i) {
      FeatureRef ref;
      const auto kind = r.u8();
      if (kind > 3) throw InputError("model file: bad feature kind");
      ref.kind = static_cast<FeatureKind>(kind);
      ref.parent = r.i16();
      ref.child = r.i16();
      ref.index = r.i16();
      ref.global_index = r.i32();
      m.selected.push_back(ref);
    }
  }
  {
    auto r = section("TREE");
    const int features = r.i32();
    const double base = r.f64();
    const auto n = r.count(4);
    std::vector<GradientBoostedTrees::Tree> trees(n);
    for (auto& t : trees) {
      const auto nodes = r.count(24);
      t.resize(nodes);
      for (auto& node : t) {
        node.feature = r.i32();
        node.threshold = r.f32();
        node.left = r.i32();
        node.right = r.i32();
        node.value = r.f64();
      }
    }
    m.classifier = GradientBoostedTrees::from_parts(features, base, std::move(trees));
  }
  m.validate();
  return m;
}

void save_model(const NuSegHopModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  save_model(model, os);
}

NuSegHopModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  return load_model(is);
}

}  // namespace lgnh::nuseghop
