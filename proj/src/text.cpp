#include "tabxfer/text.hpp"

#include <algorithm>
#include <array>

namespace tabxfer {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (current.size() >= 2) tokens.push_back(current);
    current.clear();
  };
  for (const char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      current.push_back(static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

bool is_stop_word(std::string_view token) {
  // sorted for binary search
  static constexpr std::array<std::string_view, 44> kStopWords = {
      "about", "an",   "and",  "are",   "as",    "at",    "be",    "been", "but",
      "by",    "can",  "data", "dataset", "datasets", "each", "for", "from", "has",
      "have",  "in",   "into", "is",    "it",    "its",   "of",    "on",   "or",
      "such",  "than", "that", "the",   "their", "these", "this",  "those", "to",
      "used",  "using", "was", "were",  "which", "while", "who",   "with"};
  return std::binary_search(kStopWords.begin(), kStopWords.end(), token);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tabxfer
