#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tonecost {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Number of whitespace-delimited tokens.
int whitespace_word_count(std::string_view s);

/// Lowercased words with punctuation stripped: maximal runs of
/// [a-z0-9'] or bytes >= 0x80. "A big, RED dog!" -> {a, big, red, dog}.
std::vector<std::string> word_tokens(std::string_view s);

/// FNV-1a 64-bit hash; the deterministic seed base for mock behavior.
std::uint64_t fnv1a64(std::string_view s);

/// splitmix64 step; a tiny counter-based generator with good dispersion.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace tonecost
