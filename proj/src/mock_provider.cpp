#include "tonecost/mock_provider.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <utility>

#include "tonecost/error.hpp"
#include "tonecost/textutil.hpp"

namespace tonecost {

namespace {

const char* kJudgeMarker = "POLITE or NONPOLITE";
const char* kRewriteMarker = "tone becomes";
const char* kBeginText = "<<<BEGIN TEXT>>>\n";
const char* kEndText = "\n<<<END TEXT>>>";
const char* kProbeMarker = "describe with ";

const std::array<const char*, 3> kMarkerUnigrams = {"please", "thanks", "kindly"};
const std::array<const char*, 4> kMarkerBigrams = {"thank you", "can you", "could you",
                                                   "would you"};

bool tokens_polite(const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const char* u : kMarkerUnigrams) {
      if (tokens[i] == u) return true;
    }
    if (i + 1 < tokens.size()) {
      std::string bigram = tokens[i] + " " + tokens[i + 1];
      for (const char* b : kMarkerBigrams) {
        if (bigram == b) return true;
      }
    }
  }
  return false;
}

// Words with all politeness markers (unigrams and bigrams) dropped.
std::vector<std::string> strip_marker_tokens(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i + 1 < tokens.size()) {
      std::string bigram = tokens[i] + " " + tokens[i + 1];
      bool is_bigram = std::any_of(kMarkerBigrams.begin(), kMarkerBigrams.end(),
                                   [&](const char* b) { return bigram == b; });
      if (is_bigram) {
        // "would you mind" rides along with "would you"
        if (bigram == "would you" && i + 2 < tokens.size() && tokens[i + 2] == "mind") ++i;
        ++i;
        continue;
      }
    }
    bool is_unigram = std::any_of(kMarkerUnigrams.begin(), kMarkerUnigrams.end(),
                                  [&](const char* u) { return tokens[i] == u; });
    if (!is_unigram) out.push_back(tokens[i]);
  }
  return out;
}

std::string extract_delimited(const std::string& prompt) {
  auto begin = prompt.find(kBeginText);
  auto end = prompt.rfind(kEndText);
  if (begin == std::string::npos || end == std::string::npos) return prompt;
  begin += std::string(kBeginText).size();
  if (end < begin) return prompt;
  return prompt.substr(begin, end - begin);
}

// Strips one leading politeness scaffold; returns whether one was removed.
bool strip_leading_scaffold(std::string& text) {
  static const std::array<const char*, 9> scaffolds = {
      "would you mind ", "could you please ", "can you please ", "would you please ",
      "could you ",      "can you ",          "would you ",      "please ",
      "kindly "};
  std::string lowered = to_lower(text);
  for (const char* s : scaffolds) {
    std::string_view scaffold(s);
    if (lowered.size() > scaffold.size() && lowered.compare(0, scaffold.size(), scaffold) == 0) {
      text.erase(0, scaffold.size());
      return true;
    }
  }
  return false;
}

void capitalize_first(std::string& text) {
  if (!text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
}

// Drops interior politeness words while keeping the remaining text intact.
std::string drop_marker_words(const std::string& text) {
  std::vector<std::string> raw;  // original whitespace tokens
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) raw.push_back(std::exchange(current, {}));
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) raw.push_back(current);

  auto norm = [](const std::string& w) {
    std::string out;
    for (unsigned char c : w) {
      if (std::isalnum(c) || c == '\'') out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
  };
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::string w = norm(raw[i]);
    if (i + 1 < raw.size()) {
      std::string bigram = w + " " + norm(raw[i + 1]);
      bool is_bigram = std::any_of(kMarkerBigrams.begin(), kMarkerBigrams.end(),
                                   [&](const char* b) { return bigram == b; });
      if (is_bigram) {
        if (bigram == "would you" && i + 2 < raw.size() && norm(raw[i + 2]) == "mind") ++i;
        ++i;
        continue;
      }
    }
    bool is_unigram = std::any_of(kMarkerUnigrams.begin(), kMarkerUnigrams.end(),
                                  [&](const char* u) { return w == u; });
    if (!is_unigram) kept.push_back(raw[i]);
  }
  std::string out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i) out.push_back(' ');
    out += kept[i];
  }
  return out;
}

double irwin_hall_normal(std::uint64_t& state) {
  // sum of 12 uniforms minus 6: mean 0, variance 1, no libm involved
  double sum = 0.0;
  for (int i = 0; i < 12; ++i) {
    sum += static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
  }
  return sum - 6.0;
}

}  // namespace

MockProvider::MockProvider(MockBehavior behavior) : behavior_(behavior) {}

bool MockProvider::is_polite(const std::string& text) {
  return tokens_polite(word_tokens(text));
}

std::string MockProvider::core_text(const std::string& text) {
  auto kept = strip_marker_tokens(word_tokens(text));
  std::string out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i) out.push_back(' ');
    out += kept[i];
  }
  return out;
}

std::string MockProvider::rewrite_tone(const std::string& text, bool to_polite) {
  std::string body = trim(text);
  if (to_polite) {
    body = drop_marker_words(body);
    while (!body.empty() && (body.back() == '.' || body.back() == '?' || body.back() == '!')) {
      body.pop_back();
    }
    if (!body.empty()) {
      body[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(body[0])));
    }
    return "Could you please " + body + "?";
  }
  bool stripped = strip_leading_scaffold(body);
  body = drop_marker_words(body);
  if (stripped && !body.empty() && body.back() == '?') body.back() = '.';
  capitalize_first(body);
  return body;
}

int MockProvider::planted_output_tokens(const std::string& prompt) const {
  std::string core = core_text(prompt);
  int core_words = whitespace_word_count(core);
  std::uint64_t jitter_state = fnv1a64(core) ^ behavior_.seed;
  int jitter = 0;
  if (behavior_.jitter_range > 0) {
    std::uint64_t span = 2ULL * static_cast<std::uint64_t>(behavior_.jitter_range) + 1;
    jitter = static_cast<int>(splitmix64(jitter_state) % span) - behavior_.jitter_range;
  }
  double delta = is_polite(prompt) ? behavior_.polite_delta : behavior_.nonpolite_delta;
  double noise = 0.0;
  if (behavior_.noise_sd > 0.0) {
    std::uint64_t noise_state = fnv1a64(prompt) ^ behavior_.seed ^ 0x9e3779b97f4a7c15ULL;
    noise = behavior_.noise_sd * irwin_hall_normal(noise_state);
  }
  double expected = behavior_.base_tokens + behavior_.tokens_per_word * core_words +
                    static_cast<double>(jitter) + delta + noise;
  long count = std::lround(expected);
  return static_cast<int>(std::max(1L, count));
}

std::string MockProvider::filler_text(const std::string& prompt, int token_count) const {
  static const std::array<const char*, 16> ring = {
      "alpha", "bravo", "delta",  "echo",  "fox",   "golf",  "hotel", "india",
      "juliet", "kilo",  "lima",  "mike",  "nova",  "oscar", "papa",  "quebec"};
  std::uint64_t state = fnv1a64(prompt) ^ behavior_.seed ^ 0x5bf03635ULL;
  std::string out;
  out.reserve(static_cast<std::size_t>(token_count) * 6);
  for (int i = 0; i < token_count; ++i) {
    if (i) out.push_back(' ');
    out += ring[splitmix64(state) & 15];
  }
  return out;
}

ChatResult MockProvider::chat(const std::string& prompt, const ModelConfig& config) {
  ChatResult result;
  result.config_hash = config.hash();
  result.provider_id = id() + ":" + config.model_name;
  result.attempt_count = 1;
  result.timestamp_ms = 0;  // the mock is a pure function; no wall clock

  std::string answer;
  if (prompt.find(kJudgeMarker) != std::string::npos) {
    answer = is_polite(extract_delimited(prompt)) ? "POLITE" : "NONPOLITE";
  } else if (prompt.find(kRewriteMarker) != std::string::npos) {
    auto pos = prompt.find(kRewriteMarker);
    std::string rest = to_lower(prompt.substr(pos, 40));
    bool to_polite = rest.find("non-polite") == std::string::npos &&
                     rest.find("nonpolite") == std::string::npos;
    answer = rewrite_tone(extract_delimited(prompt), to_polite);
  } else if (auto pos = prompt.find(kProbeMarker); pos != std::string::npos) {
    std::size_t i = pos + std::string(kProbeMarker).size();
    int z = 0;
    bool digits = false;
    while (i < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[i]))) {
      z = z * 10 + (prompt[i] - '0');
      digits = true;
      ++i;
    }
    if (digits && prompt.compare(i, 17, " number of tokens") == 0 && z > 0) {
      answer = filler_text(prompt, z);  // exact-compliance rule
    } else {
      answer = filler_text(prompt, planted_output_tokens(prompt));
    }
  } else {
    answer = filler_text(prompt, planted_output_tokens(prompt));
  }

  result.text = answer;
  result.prompt_tokens = whitespace_word_count(prompt);
  result.completion_tokens = whitespace_word_count(answer);
  result.usage_source = UsageSource::provider_reported;
  return result;
}

std::vector<double> MockProvider::embed(const std::string& text, const ModelConfig& config) {
  (void)config;
  if (text.empty()) throw Error("embed: text must be non-empty");
  int dim = std::max(behavior_.embedding_dim, 2);
  std::vector<double> vec(static_cast<std::size_t>(dim), 0.0);
  auto tokens = word_tokens(text);
  if (tokens.empty()) tokens.push_back("~");
  for (const auto& w : tokens) {
    vec[fnv1a64(w) % static_cast<std::uint64_t>(dim)] += 1.0;
    // shared-prefix feature gives morphological variants nearby embeddings
    std::string prefix = "p:" + w.substr(0, std::min<std::size_t>(5, w.size()));
    vec[fnv1a64(prefix) % static_cast<std::uint64_t>(dim)] += 0.5;
  }
  double norm = 0.0;
  for (double v : vec) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : vec) v /= norm;
  return vec;
}

}  // namespace tonecost
