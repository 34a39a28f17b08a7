#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tabxfer {

// Lowercases ASCII, splits on anything that is not [a-z0-9], and drops
// tokens shorter than two characters.
std::vector<std::string> tokenize(std::string_view text);

bool is_stop_word(std::string_view token);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace tabxfer
