#include "lgnh/core/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lgnh/core/error.hpp"

namespace lgnh {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw InputError("bad value for " + key + ": '" + text + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void KeyValueSchema::bind(const std::string& key, double& field) {
  entries_.push_back({key, [&field] { return format_double(field); },
                      [&field, key](const std::string& s) {
                        const double v = parse_number<double>(key, s);
                        if (!std::isfinite(v)) throw InputError("non-finite value for " + key);
                        field = v;
                      }});
}

void KeyValueSchema::bind(const std::string& key, int& field) {
  entries_.push_back({key, [&field] { return std::to_string(field); },
                      [&field, key](const std::string& s) { field = parse_number<int>(key, s); }});
}

void KeyValueSchema::bind(const std::string& key, std::uint64_t& field) {
  entries_.push_back({key, [&field] { return std::to_string(field); },
                      [&field, key](const std::string& s) { field = parse_number<std::uint64_t>(key, s); }});
}

void KeyValueSchema::bind(const std::string& key, bool& field) {
  entries_.push_back({key, [&field] { return std::string(field ? "true" : "false"); },
                      [&field, key](const std::string& s) {
                        if (s == "true" || s == "1" || s == "on") {
                          field = true;
                        } else if (s == "false" || s == "0" || s == "off") {
                          field = false;
                        } else {
                          throw InputError("bad boolean for " + key + ": '" + s + "'");
                        }
                      }});
}

const KeyValueSchema::Entry* KeyValueSchema::find(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

std::string KeyValueSchema::format() const {
  std::string out;
  for (const auto& e : entries_) out += e.key + " = " + e.get() + "\n";
  return out;
}

void KeyValueSchema::parse(const std::string& text) const {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto content = trim(line);
    if (content.empty() || content[0] == '#') continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw InputError("line " + std::to_string(number) + ": expected key = value");
    const auto key = trim(content.substr(0, eq));
    const auto value = trim(content.substr(eq + 1));
    const auto* entry = find(key);
    if (!entry) throw InputError("unknown key '" + key + "' on line " + std::to_string(number));
    if (!seen.insert(key).second) throw InputError("repeated key '" + key + "'");
    entry->set(value);
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace lgnh
