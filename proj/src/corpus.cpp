#include "tonecost/corpus.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"

namespace tonecost {

namespace {

std::string trimmed(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Parses one corpus line; returns false if the object violates the schema.
bool parse_conversation(const nlohmann::json& obj, const FieldMapping& mapping,
                        ConversationRecord& out) {
  if (!obj.contains(mapping.conversation_id) || !obj[mapping.conversation_id].is_string()) {
    return false;
  }
  if (!obj.contains(mapping.turns) || !obj[mapping.turns].is_array()) return false;
  out.conversation_id = obj[mapping.conversation_id].get<std::string>();
  out.language = obj.value(mapping.language, std::string("unknown"));
  if (out.language.empty()) out.language = "unknown";
  out.model_tag = obj.value(mapping.model_tag, std::string());
  out.turns.clear();
  for (const auto& t : obj[mapping.turns]) {
    if (!t.is_object() || !t.contains(mapping.role) || !t.contains(mapping.content)) return false;
    if (!t[mapping.role].is_string() || !t[mapping.content].is_string()) return false;
    std::string role = lower(t[mapping.role].get<std::string>());
    if (role != "user" && role != "assistant") return false;
    std::string text = t[mapping.content].get<std::string>();
    if (trimmed(text).empty()) continue;  // drop blank turns
    if (!out.turns.empty() && out.turns.back().role == role) {
      // normalization: merge consecutive same-role turns so roles alternate
      out.turns.back().text += "\n";
      out.turns.back().text += text;
    } else {
      out.turns.push_back({std::move(role), std::move(text)});
    }
  }
  return !out.turns.empty();
}

// Unbiased bounded draw: rejection-sampled modulo, fixed across platforms.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

}  // namespace

CorpusLoadStats load_corpus(const std::filesystem::path& path, const FieldMapping& mapping,
                            const std::function<void(ConversationRecord&&)>& sink) {
  CorpusLoadStats stats;
  JsonlStats raw = for_each_jsonl(path, [&](nlohmann::json&& obj) {
    ConversationRecord record;
    if (parse_conversation(obj, mapping, record)) {
      ++stats.loaded;
      sink(std::move(record));
    } else {
      ++stats.malformed;
    }
  });
  stats.lines = raw.lines;
  stats.malformed += raw.malformed;
  if (stats.lines > 0 && stats.malformed * 2 > stats.lines) {
    throw Error("corpus " + path.string() + ": " + std::to_string(stats.malformed) + " of " +
                std::to_string(stats.lines) +
                " lines are malformed (>50%); check the field mapping");
  }
  return stats;
}

std::vector<ConversationRecord> load_corpus_all(const std::filesystem::path& path,
                                                const FieldMapping& mapping,
                                                CorpusLoadStats* stats) {
  std::vector<ConversationRecord> out;
  CorpusLoadStats s = load_corpus(path, mapping,
                                  [&](ConversationRecord&& r) { out.push_back(std::move(r)); });
  if (stats) *stats = s;
  return out;
}

std::vector<PromptRecord> extract_first_turns(std::span<const ConversationRecord> conversations,
                                              ExtractStats* stats) {
  std::vector<PromptRecord> out;
  ExtractStats local;
  std::unordered_set<std::string> seen;
  for (const auto& conv : conversations) {
    if (conv.turns.empty() || conv.turns.front().role != "user") {
      ++local.skipped_assistant_first;
      continue;
    }
    PromptRecord record;
    record.prompt_id = conv.conversation_id + "#0";
    if (!seen.insert(record.prompt_id).second) {
      ++local.skipped_duplicate_id;
      continue;
    }
    record.text = conv.turns.front().text;
    record.language = conv.language;
    record.source = conv.model_tag;
    out.push_back(std::move(record));
    ++local.extracted;
  }
  if (stats) *stats = local;
  return out;
}

std::vector<PromptRecord> sample(const std::vector<PromptRecord>& records, std::size_t n,
                                 std::uint64_t seed, const std::optional<std::string>& language) {
  std::vector<std::size_t> eligible;
  eligible.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!language || lower(records[i].language) == lower(*language)) eligible.push_back(i);
  }
  if (n > eligible.size()) {
    throw Error("sample: requested " + std::to_string(n) + " records but only " +
                std::to_string(eligible.size()) + " are available" +
                (language ? " for language '" + *language + "'" : ""));
  }
  std::mt19937_64 rng(seed);
  std::vector<PromptRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(bounded_draw(rng, eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
    out.push_back(records[eligible[i]]);
  }
  return out;
}

void write_prompts(const std::filesystem::path& path, std::span<const PromptRecord> records) {
  JsonlWriter writer(path);
  for (const auto& r : records) {
    writer.write({{"prompt_id", r.prompt_id},
                  {"text", r.text},
                  {"language", r.language},
                  {"input_tokens", r.input_tokens},
                  {"source", r.source}});
  }
  writer.close();
}

std::vector<PromptRecord> read_prompts(const std::filesystem::path& path) {
  std::vector<PromptRecord> out;
  for_each_jsonl(path, [&](nlohmann::json&& obj) {
    PromptRecord r;
    r.prompt_id = obj.at("prompt_id").get<std::string>();
    r.text = obj.at("text").get<std::string>();
    r.language = obj.value("language", std::string("unknown"));
    r.input_tokens = obj.value("input_tokens", -1);
    r.source = obj.value("source", std::string());
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace tonecost
