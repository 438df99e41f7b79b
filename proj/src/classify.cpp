#include "tonecost/classify.hpp"

#include <algorithm>
#include <cctype>

#include "tonecost/digest.hpp"
#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"
#include "tonecost/textutil.hpp"

namespace tonecost {

namespace {

MarkerTag tag_from_string(const std::string& name) {
  if (name == "please") return MarkerTag::please;
  if (name == "thank_you") return MarkerTag::thank_you;
  if (name == "explicit_other") return MarkerTag::explicit_other;
  if (name == "implicit") return MarkerTag::implicit;
  throw ConfigError("lexicon: unknown marker tag '" + name + "'");
}

// Sentence segments: word token lists that multi-word patterns may not cross.
std::vector<std::vector<std::string>> sentence_segments(std::string_view text) {
  std::vector<std::vector<std::string>> segments;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    bool boundary = i == text.size() || text[i] == '.' || text[i] == '!' || text[i] == '?' ||
                    text[i] == ';' || text[i] == '\n';
    if (boundary) {
      auto tokens = word_tokens(text.substr(start, i - start));
      if (!tokens.empty()) segments.push_back(std::move(tokens));
      start = i + 1;
    }
  }
  return segments;
}

}  // namespace

const char* to_string(Treatment value) {
  return value == Treatment::polite ? "polite" : "non_polite";
}

const char* to_string(PolitenessForm form) {
  switch (form) {
    case PolitenessForm::please_and_thankyou: return "please_and_thankyou";
    case PolitenessForm::please_only: return "please_only";
    case PolitenessForm::implicit: return "implicit";
    case PolitenessForm::none: return "none";
  }
  return "none";
}

PolitenessForm politeness_form_from_string(const std::string& name) {
  if (name == "please_and_thankyou") return PolitenessForm::please_and_thankyou;
  if (name == "please_only") return PolitenessForm::please_only;
  if (name == "implicit") return PolitenessForm::implicit;
  if (name == "none") return PolitenessForm::none;
  throw ConfigError("unknown politeness form '" + name + "'");
}

PolitenessLexicon PolitenessLexicon::load(const std::filesystem::path& path) {
  PolitenessLexicon lexicon;
  lexicon.version = path.filename().string();
  for_each_jsonl(path, [&](nlohmann::json&& obj) {
    LexiconEntry entry;
    entry.pattern = to_lower(obj.at("pattern").get<std::string>());
    entry.weight = obj.value("weight", 1.0);
    entry.tag = tag_from_string(obj.value("form", std::string("implicit")));
    if (entry.pattern.empty()) throw ConfigError("lexicon: empty pattern in " + path.string());
    if (entry.weight <= 0) throw ConfigError("lexicon: weight must be positive in " + path.string());
    lexicon.entries.push_back(std::move(entry));
  });
  if (lexicon.entries.empty()) throw ConfigError("lexicon: no entries in " + path.string());
  for (std::size_t i = 0; i < lexicon.entries.size(); ++i) {
    for (std::size_t j = i + 1; j < lexicon.entries.size(); ++j) {
      if (lexicon.entries[i].pattern == lexicon.entries[j].pattern) {
        throw ConfigError("lexicon: duplicate pattern '" + lexicon.entries[i].pattern + "'");
      }
    }
  }
  return lexicon;
}

PolitenessLexicon PolitenessLexicon::default_lexicon() {
  PolitenessLexicon lexicon;
  lexicon.version = "builtin_v1";
  lexicon.entries = {
      {"please", 1.0, MarkerTag::please},
      {"thank you", 1.0, MarkerTag::thank_you},
      {"thanks", 1.0, MarkerTag::thank_you},
      {"kindly", 1.0, MarkerTag::explicit_other},
      {"can you", 0.5, MarkerTag::implicit},
      {"could you", 0.5, MarkerTag::implicit},
      {"would you", 0.5, MarkerTag::implicit},
      {"would you mind", 0.5, MarkerTag::implicit},
  };
  return lexicon;
}

MarkerHits scan_markers(std::string_view prompt, const PolitenessLexicon& lexicon) {
  MarkerHits hits;
  hits.word_count = whitespace_word_count(prompt);
  auto segments = sentence_segments(prompt);

  for (const auto& entry : lexicon.entries) {
    auto pattern_words = word_tokens(entry.pattern);
    if (pattern_words.empty()) continue;
    int occurrences = 0;
    for (const auto& segment : segments) {
      if (segment.size() < pattern_words.size()) continue;
      for (std::size_t i = 0; i + pattern_words.size() <= segment.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < pattern_words.size(); ++j) {
          if (segment[i + j] != pattern_words[j]) {
            match = false;
            break;
          }
        }
        if (match) ++occurrences;
      }
    }
    if (occurrences == 0) continue;
    hits.weighted_hits += entry.weight * occurrences;
    switch (entry.tag) {
      case MarkerTag::please: hits.has_please = true; break;
      case MarkerTag::thank_you: hits.has_thank_you = true; break;
      case MarkerTag::explicit_other: hits.has_explicit_other = true; break;
      case MarkerTag::implicit: hits.has_implicit = true; break;
    }
  }
  return hits;
}

double lexicon_score(std::string_view prompt, const PolitenessLexicon& lexicon) {
  MarkerHits hits = scan_markers(prompt, lexicon);
  if (hits.word_count == 0) return 0.0;  // empty prompt scores 0 by convention
  return 100.0 * hits.weighted_hits / static_cast<double>(hits.word_count);
}

TreatmentLabel lexicon_label(double score) {
  if (score < 0) throw Error("lexicon_label: score must be non-negative");
  TreatmentLabel label;
  label.method = ClassifyMethod::lexicon;
  label.value = score > 0 ? Treatment::polite : Treatment::non_polite;
  label.score = score;
  return label;
}

PolitenessForm politeness_form(std::string_view prompt, const PolitenessLexicon& lexicon) {
  MarkerHits hits = scan_markers(prompt, lexicon);
  if (hits.has_please || hits.has_thank_you) return PolitenessForm::please_and_thankyou;
  if (hits.has_implicit || hits.has_explicit_other) return PolitenessForm::implicit;
  return PolitenessForm::none;
}

std::vector<double> lexicon_score_batch(const std::vector<std::string>& prompts,
                                        const PolitenessLexicon& lexicon, ExecPolicy policy) {
  std::vector<double> scores(prompts.size(), 0.0);
  parallel_for(prompts.size(), policy,
               [&](std::size_t i) { scores[i] = lexicon_score(prompts[i], lexicon); });
  return scores;
}

JudgeTemplate JudgeTemplate::load(const std::filesystem::path& path, std::string version) {
  JudgeTemplate tmpl;
  tmpl.text = read_file(path);
  tmpl.version = std::move(version);
  tmpl.hash = sha256_hex(tmpl.text);
  if (tmpl.text.find("{prompt}") == std::string::npos) {
    throw ConfigError("judge template " + path.string() + " lacks the {prompt} placeholder");
  }
  return tmpl;
}

JudgeTemplate JudgeTemplate::default_template() {
  JudgeTemplate tmpl;
  tmpl.text =
      "You are a strict binary classifier of conversational tone.\n"
      "Classify the text between the markers as polite or non-polite.\n"
      "A text is polite if it softens its request explicitly (e.g. \"please\",\n"
      "\"thank you\") or implicitly (e.g. \"could you\", \"would you mind\").\n"
      "Answer with exactly one word: POLITE or NONPOLITE.\n"
      "<<<BEGIN TEXT>>>\n{prompt}\n<<<END TEXT>>>\n";
  tmpl.version = "builtin_v1";
  tmpl.hash = sha256_hex(tmpl.text);
  return tmpl;
}

std::string JudgeTemplate::render(std::string_view prompt) const {
  std::string out = text;
  auto pos = out.find("{prompt}");
  out.replace(pos, 8, prompt);
  return out;
}

namespace {

std::optional<Treatment> parse_judge_answer(const std::string& raw) {
  std::string upper;
  for (unsigned char c : raw) {
    if (std::isalpha(c)) upper.push_back(static_cast<char>(std::toupper(c)));
  }
  if (upper == "POLITE") return Treatment::polite;
  if (upper == "NONPOLITE") return Treatment::non_polite;
  return std::nullopt;
}

}  // namespace

TreatmentLabel judge_classify(const std::string& prompt, const JudgeTemplate& tmpl,
                              ChatProvider& provider, const ModelConfig& config,
                              int max_retries) {
  if (trim(prompt).empty()) throw Error("judge_classify: prompt must be non-empty");
  TreatmentLabel label;
  label.method = ClassifyMethod::judge;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    std::string rendered = tmpl.render(prompt);
    if (attempt > 0) {
      // vary the request so a fresh (uncached) answer is possible
      rendered += "\n(attempt " + std::to_string(attempt + 1) + ")";
    }
    ChatResult result = provider.chat(rendered, config);
    label.raw_judge_output = result.text;
    if (auto value = parse_judge_answer(result.text)) {
      label.value = *value;
      return label;
    }
  }
  label.unclassified = true;
  return label;
}

double alignment_rate(std::span<const TreatmentLabel> a, std::span<const TreatmentLabel> b) {
  if (a.size() != b.size()) {
    throw Error("alignment_rate: label lists differ in length (" + std::to_string(a.size()) +
                " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) return 0.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].value == b[i].value) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(a.size());
}

}  // namespace tonecost
