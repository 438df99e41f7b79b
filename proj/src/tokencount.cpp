#include "tonecost/tokencount.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>

#include "tonecost/error.hpp"

namespace tonecost {

namespace {

enum class ByteClass { space, alpha, digit, punct };

ByteClass classify_byte(unsigned char b) {
  if (b == ' ' || b == '\t' || b == '\n' || b == '\r' || b == '\v' || b == '\f') {
    return ByteClass::space;
  }
  if (std::isalpha(b) || b >= 0x80) return ByteClass::alpha;
  if (std::isdigit(b)) return ByteClass::digit;
  return ByteClass::punct;
}

int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::string base64_decode(std::string_view in) {
  std::string out;
  out.reserve(in.size() * 3 / 4 + 3);
  int buffer = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    int v = base64_value(c);
    if (v < 0) throw Error("encoding file: invalid base64 token");
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace

std::vector<std::string_view> split_pieces(std::string_view text) {
  std::vector<std::string_view> pieces;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    std::size_t j = i;
    if (text[j] == ' ' && j + 1 < n &&
        classify_byte(static_cast<unsigned char>(text[j + 1])) != ByteClass::space) {
      ++j;  // single leading space rides with the next run
    }
    ByteClass cls = classify_byte(static_cast<unsigned char>(text[j]));
    std::size_t k = j;
    while (k < n && classify_byte(static_cast<unsigned char>(text[k])) == cls) ++k;
    pieces.push_back(text.substr(i, k - i));
    i = k;
  }
  return pieces;
}

EncodingTable EncodingTable::load(const std::filesystem::path& rank_file,
                                  std::string encoding_id) {
  std::ifstream in(rank_file);
  if (!in) throw Error("encoding file: cannot open " + rank_file.string());
  EncodingTable table;
  table.encoding_id_ = std::move(encoding_id);
  std::string line;
  int max_rank = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto space = line.find(' ');
    if (space == std::string::npos) {
      throw Error("encoding file: malformed line in " + rank_file.string());
    }
    std::string token = base64_decode(std::string_view(line).substr(0, space));
    int rank = std::stoi(line.substr(space + 1));
    if (token.empty()) throw Error("encoding file: empty token in " + rank_file.string());
    table.ranks_.emplace(std::move(token), rank);
    max_rank = std::max(max_rank, rank);
  }
  if (table.ranks_.empty()) {
    throw Error("encoding file: empty vocabulary in " + rank_file.string());
  }
  table.special_["<|endoftext|>"] = max_rank + 1;
  return table;
}

EncodingTable EncodingTable::whitespace_fallback() {
  EncodingTable table;
  table.encoding_id_ = "whitespace";
  table.whitespace_mode_ = true;
  return table;
}

void EncodingTable::encode_piece(std::string_view piece, std::vector<int>& out) const {
  if (auto it = ranks_.find(piece); it != ranks_.end()) {
    out.push_back(it->second);
    return;
  }
  // boundaries of the current parts, initially one part per byte
  std::vector<std::size_t> bounds(piece.size() + 1);
  for (std::size_t i = 0; i <= piece.size(); ++i) bounds[i] = i;
  while (bounds.size() > 2) {
    int best_rank = std::numeric_limits<int>::max();
    std::size_t best = 0;
    for (std::size_t i = 0; i + 2 < bounds.size(); ++i) {
      auto merged = piece.substr(bounds[i], bounds[i + 2] - bounds[i]);
      auto it = ranks_.find(merged);
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = i;
      }
    }
    if (best_rank == std::numeric_limits<int>::max()) break;
    bounds.erase(bounds.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    auto part = piece.substr(bounds[i], bounds[i + 1] - bounds[i]);
    auto it = ranks_.find(part);
    // single bytes are always present in a well-formed table
    if (it == ranks_.end()) throw Error("encoding table lacks byte token; file is incomplete");
    out.push_back(it->second);
  }
}

std::vector<int> EncodingTable::encode(std::string_view text) const {
  std::vector<int> out;
  if (whitespace_mode_) {
    throw Error("whitespace fallback encoding has no token ids; use count_tokens");
  }
  for (auto piece : split_pieces(text)) encode_piece(piece, out);
  return out;
}

int EncodingTable::count_tokens(std::string_view text) const {
  if (text.empty()) return 0;
  if (whitespace_mode_) {
    int words = 0;
    bool in_word = false;
    for (unsigned char c : text) {
      bool space = classify_byte(c) == ByteClass::space;
      if (!space && !in_word) ++words;
      in_word = !space;
    }
    // pure-whitespace text still occupies one token
    return words == 0 ? 1 : words;
  }
  std::vector<int> out;
  for (auto piece : split_pieces(text)) encode_piece(piece, out);
  return static_cast<int>(out.size());
}

int token_diff(std::string_view a, std::string_view b, const EncodingTable& encoding) {
  return encoding.count_tokens(a) - encoding.count_tokens(b);
}

std::vector<int> count_tokens_batch(const std::vector<std::string>& texts,
                                    const EncodingTable& encoding, ExecPolicy policy) {
  std::vector<int> counts(texts.size(), 0);
  parallel_for(texts.size(), policy,
               [&](std::size_t i) { counts[i] = encoding.count_tokens(texts[i]); });
  return counts;
}

}  // namespace tonecost
