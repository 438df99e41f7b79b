#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tonecost/parallel.hpp"

namespace tonecost {

/// Byte-pair encoding table loaded from a rank file (one `base64(bytes) rank`
/// entry per line, tiktoken-style). Immutable after load; safe to share
/// across threads. A whitespace-split fallback table exists for tests that do
/// not assert absolute counts.
class EncodingTable {
 public:
  static EncodingTable load(const std::filesystem::path& rank_file, std::string encoding_id);
  static EncodingTable whitespace_fallback();

  /// Number of BPE tokens in `text`, excluding any chat-template wrapper.
  /// Deterministic; every UTF-8 (indeed, every byte) string is encodable.
  int count_tokens(std::string_view text) const;

  /// Token ranks of the encoded text, mostly for debugging and goldens.
  std::vector<int> encode(std::string_view text) const;

  const std::string& id() const { return encoding_id_; }
  std::size_t vocabulary_size() const { return ranks_.size(); }
  const std::map<std::string, int>& special_tokens() const { return special_; }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  void encode_piece(std::string_view piece, std::vector<int>& out) const;

  std::unordered_map<std::string, int, StringHash, std::equal_to<>> ranks_;
  std::map<std::string, int> special_;
  std::string encoding_id_;
  bool whitespace_mode_ = false;
};

/// count_tokens(a) - count_tokens(b). Antisymmetric by construction.
int token_diff(std::string_view a, std::string_view b, const EncodingTable& encoding);

/// Batch counting kernel. The serial policy is the reference implementation;
/// the parallel policy distributes texts across OpenMP threads and is
/// bit-identical to it.
std::vector<int> count_tokens_batch(const std::vector<std::string>& texts,
                                    const EncodingTable& encoding,
                                    ExecPolicy policy = ExecPolicy::parallel);

/// Splits text into pre-tokenization pieces: an optional single leading space
/// glued to a maximal run of letters (ASCII letters or any byte >= 0x80),
/// digits, or punctuation; whitespace runs form their own pieces.
std::vector<std::string_view> split_pieces(std::string_view text);

}  // namespace tonecost
