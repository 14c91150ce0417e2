#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lgnh {

/// Binds named fields of one object to a `key = value` text format. Numbers
/// are written in shortest round-trip form, so parse(format()) is lossless.
/// Blank lines and lines starting with '#' are ignored; unknown keys, repeated
/// keys and malformed values throw InputError.
class KeyValueSchema {
 public:
  void bind(const std::string& key, double& field);
  void bind(const std::string& key, int& field);
  void bind(const std::string& key, std::uint64_t& field);
  void bind(const std::string& key, bool& field);

  std::string format() const;
  void parse(const std::string& text) const;

 private:
  struct Entry {
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
  };
  const Entry* find(const std::string& key) const;
  std::vector<Entry> entries_;
};

std::string format_double(double v);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace lgnh
