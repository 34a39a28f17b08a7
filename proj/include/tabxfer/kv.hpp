#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tabxfer {

// Line-oriented `key = value` documents. Blank lines and lines starting with
// `#` are ignored; keys may carry dotted section prefixes (`transfer.alpha`).
class KeyValueFile {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
  };

  static KeyValueFile parse(std::string_view text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;
  std::string get(std::string_view key) const;  // InvalidConfig when absent
  std::string get_or(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;

  // Entries whose key starts with `prefix`, in file order.
  std::vector<Entry> with_prefix(std::string_view prefix) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::string& origin() const noexcept { return origin_; }

  void set(std::string key, std::string value);

 private:
  std::vector<Entry> entries_;
  std::string origin_;
};

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

// Round-trippable decimal rendering used by every report and mapping file.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace tabxfer
