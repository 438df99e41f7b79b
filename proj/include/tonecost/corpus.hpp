#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tonecost {

struct Turn {
  std::string role;  // "user" or "assistant"
  std::string text;
};

struct ConversationRecord {
  std::string conversation_id;
  std::vector<Turn> turns;  // non-empty; consecutive same-role turns merged
  std::string language;     // ISO-639-1 tag or "unknown"
  std::string model_tag;
};

struct PromptRecord {
  std::string prompt_id;  // conversation_id + "#" + turn index
  std::string text;
  std::string language;
  int input_tokens = -1;  // -1 until tokencount fills it
  std::string source;
};

/// Maps the corpus file's field names onto the schema; every name is
/// overridable so WildChat-shaped dumps with drifted schemas still load.
struct FieldMapping {
  std::string conversation_id = "conversation_id";
  std::string language = "language";
  std::string turns = "turns";
  std::string role = "role";
  std::string content = "content";
  std::string model_tag = "model";
};

struct CorpusLoadStats {
  std::size_t lines = 0;
  std::size_t loaded = 0;
  std::size_t malformed = 0;  // unparseable or schema-violating lines
};

/// Streams ConversationRecords out of a JSONL corpus in file order.
/// Malformed lines are counted and skipped; more than 50% malformed is fatal.
CorpusLoadStats load_corpus(const std::filesystem::path& path, const FieldMapping& mapping,
                            const std::function<void(ConversationRecord&&)>& sink);

/// Convenience wrapper collecting the stream into a vector.
std::vector<ConversationRecord> load_corpus_all(const std::filesystem::path& path,
                                                const FieldMapping& mapping,
                                                CorpusLoadStats* stats = nullptr);

struct ExtractStats {
  std::size_t extracted = 0;
  std::size_t skipped_assistant_first = 0;
  std::size_t skipped_duplicate_id = 0;
};

/// One PromptRecord per conversation whose first turn is a user turn.
std::vector<PromptRecord> extract_first_turns(std::span<const ConversationRecord> conversations,
                                              ExtractStats* stats = nullptr);

/// Uniform sample of n records without replacement, optionally restricted to
/// one language tag. Reproducible: the generator is a seeded mt19937_64
/// driving a partial Fisher-Yates shuffle with rejection-sampled bounded
/// draws, so identical (records, n, seed) give identical output on every
/// platform.
std::vector<PromptRecord> sample(const std::vector<PromptRecord>& records, std::size_t n,
                                 std::uint64_t seed,
                                 const std::optional<std::string>& language = std::nullopt);

/// PromptRecord JSONL round-trip used by the pipeline stages.
void write_prompts(const std::filesystem::path& path, std::span<const PromptRecord> records);
std::vector<PromptRecord> read_prompts(const std::filesystem::path& path);

}  // namespace tonecost
