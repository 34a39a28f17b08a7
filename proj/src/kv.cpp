#include "tabxfer/kv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tabxfer/error.hpp"

namespace tabxfer {

std::string trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    raise(ErrorCode::InvalidConfig, "expected a number for " + std::string(what) + ", got '" + t + "'");
  }
  return v;
}

long long parse_int(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    raise(ErrorCode::InvalidConfig, "expected an integer for " + std::string(what) + ", got '" + t + "'");
  }
  return v;
}

std::string format_double(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

KeyValueFile KeyValueFile::parse(std::string_view text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::string_view raw =
        text.substr(start, end == std::string_view::npos ? text.npos : end - start);
    ++line_no;
    const std::string line = trim(raw);
    if (!line.empty() && line[0] != '#') {
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        raise(ErrorCode::InvalidConfig,
              origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
      }
      std::string key = trim(std::string_view(line).substr(0, eq));
      if (key.empty()) {
        raise(ErrorCode::InvalidConfig, origin + ":" + std::to_string(line_no) + ": empty key");
      }
      if (kv.has(key)) {
        raise(ErrorCode::InvalidConfig,
              origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
      }
      kv.entries_.push_back({std::move(key), trim(std::string_view(line).substr(eq + 1)), line_no});
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

bool KeyValueFile::has(std::string_view key) const { return find(key).has_value(); }

std::optional<std::string> KeyValueFile::find(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return e.value;
  }
  return std::nullopt;
}

std::string KeyValueFile::get(std::string_view key) const {
  auto v = find(key);
  if (!v) raise(ErrorCode::InvalidConfig, origin_ + ": missing key '" + std::string(key) + "'");
  return *v;
}

std::string KeyValueFile::get_or(std::string_view key, std::string fallback) const {
  auto v = find(key);
  return v ? *v : std::move(fallback);
}

double KeyValueFile::get_double(std::string_view key, double fallback) const {
  auto v = find(key);
  return v ? parse_double(*v, key) : fallback;
}

long long KeyValueFile::get_int(std::string_view key, long long fallback) const {
  auto v = find(key);
  return v ? parse_int(*v, key) : fallback;
}

std::vector<KeyValueFile::Entry> KeyValueFile::with_prefix(std::string_view prefix) const {
  std::vector<Entry> out;
  for (const auto& e : entries_) {
    if (e.key.starts_with(prefix)) out.push_back(e);
  }
  return out;
}

void KeyValueFile::set(std::string key, std::string value) {
  for (auto& e : entries_) {
    if (e.key == key) {
      e.value = std::move(value);
      return;
    }
  }
  entries_.push_back({std::move(key), std::move(value), 0});
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::NotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) raise(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace tabxfer
