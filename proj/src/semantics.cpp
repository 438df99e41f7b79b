#include "tonecost/semantics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"
#include "tonecost/textutil.hpp"

namespace tonecost {

namespace {

const std::array<const char*, 6> kCategoryNames = {
    "information_seeking", "text_generation", "editing_rewriting",
    "classification",      "summarization",   "technical_tasks"};

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                std::to_string(v.size()) + ")");
  }
  if (u.empty()) throw Error("cosine: empty vectors");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error("cosine: zero vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

std::vector<TaskCategory> load_task_categories(const std::filesystem::path& path) {
  std::vector<TaskCategory> out;
  for_each_jsonl(path, [&](nlohmann::json&& obj) {
    TaskCategory cat;
    cat.name = obj.at("name").get<std::string>();
    cat.description = obj.at("description").get<std::string>();
    if (cat.description.empty()) throw ConfigError("task category with empty description");
    out.push_back(std::move(cat));
  });
  if (out.size() != kCategoryNames.size()) {
    throw ConfigError("task categories: expected " + std::to_string(kCategoryNames.size()) +
                      " entries, got " + std::to_string(out.size()));
  }
  for (const auto& cat : out) {
    if (std::find_if(kCategoryNames.begin(), kCategoryNames.end(), [&](const char* n) {
          return cat.name == n;
        }) == kCategoryNames.end()) {
      throw ConfigError("task categories: unknown name '" + cat.name + "'");
    }
  }
  return out;
}

std::vector<TaskCategory> default_task_categories() {
  return {
      {"information_seeking",
       "Information seeking: asking for facts, explanations, advice, definitions, or "
       "recommendations about a topic.",
       {}},
      {"text_generation",
       "Text generation: producing new creative or functional writing such as stories, emails, "
       "essays, or marketing copy.",
       {}},
      {"editing_rewriting",
       "Editing and rewriting: revising, rephrasing, correcting, or improving an existing piece "
       "of text.",
       {}},
      {"classification",
       "Classification: assigning a label, category, or sentiment to a given input.",
       {}},
      {"summarization",
       "Summarization: condensing a longer text into a shorter summary that keeps the key "
       "points.",
       {}},
      {"technical_tasks",
       "Technical tasks: programming, debugging, system configuration, data processing, or "
       "mathematics.",
       {}},
  };
}

void embed_categories(std::vector<TaskCategory>& categories, Embedder& embedder,
                      const ModelConfig& config) {
  for (auto& cat : categories) {
    cat.embedding = embedder.embed(cat.description, config);
  }
}

TaskAssignment assign_task(std::span<const double> prompt_embedding,
                           const std::vector<TaskCategory>& categories) {
  if (categories.empty()) throw Error("assign_task: no categories");
  TaskAssignment best;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i].embedding.empty()) {
      throw Error("assign_task: category '" + categories[i].name + "' has no embedding");
    }
    double sim = cosine(prompt_embedding, categories[i].embedding);
    if (best.index < 0 || sim > best.similarity) {
      best.index = static_cast<int>(i);
      best.name = categories[i].name;
      best.similarity = sim;
      best.tie = false;
    } else if (sim == best.similarity) {
      best.tie = true;  // first category in canonical order keeps the slot
    }
  }
  return best;
}

TaskAssignment classify_task(const std::string& prompt,
                             const std::vector<TaskCategory>& categories, Embedder& embedder,
                             const ModelConfig& config) {
  std::vector<double> embedding;
  try {
    embedding = embedder.embed(prompt, config);
  } catch (const Error&) {
    return {};  // unclassified; excluded from task-controlled models upstream
  }
  return assign_task(embedding, categories);
}

OutputSimilarityReport output_similarity(std::span<const OutputPairText> pairs,
                                         Embedder& embedder, const ModelConfig& config,
                                         ExecPolicy policy) {
  OutputSimilarityReport report;
  std::vector<std::size_t> usable;
  std::vector<std::vector<double>> control_vecs, treated_vecs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].control_text.empty() || pairs[i].treated_text.empty()) {
      ++report.skipped;
      continue;
    }
    control_vecs.push_back(embedder.embed(pairs[i].control_text, config));
    treated_vecs.push_back(embedder.embed(pairs[i].treated_text, config));
    usable.push_back(i);
  }

  std::vector<double> sims(usable.size(), 0.0);
  parallel_for(usable.size(), policy,
               [&](std::size_t k) { sims[k] = cosine(control_vecs[k], treated_vecs[k]); });

  double sum = 0.0;
  for (std::size_t k = 0; k < usable.size(); ++k) {
    report.per_pair.emplace_back(pairs[usable[k]].pair_id, sims[k]);
    sum += sims[k];
  }
  report.mean = usable.empty() ? 0.0 : sum / static_cast<double>(usable.size());
  if (report.mean > 0.8) {
    report.band = "paraphrase (> 0.8)";
  } else if (report.mean >= 0.7) {
    report.band = "strong similarity (0.7-0.8)";
  } else {
    report.band = "below strong-similarity band (< 0.7)";
  }
  return report;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("stopwords: cannot open " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::string word = trim(line);
    if (word.empty() || word[0] == '#') continue;
    words.insert(to_lower(word));
  }
  return words;
}

namespace {

using PhraseCounts = std::map<std::string, std::size_t>;

// n-grams over maximal runs of control words missing from the treated output
void accumulate_removed(const std::vector<std::string>& control_words,
                        const std::unordered_set<std::string>& treated_set, int n_min, int n_max,
                        PhraseCounts& counts) {
  std::size_t i = 0;
  while (i < control_words.size()) {
    if (treated_set.count(control_words[i])) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < control_words.size() && !treated_set.count(control_words[run_end])) {
      ++run_end;
    }
    for (std::size_t start = i; start < run_end; ++start) {
      std::string phrase;
      for (int n = 1; n <= n_max && start + static_cast<std::size_t>(n) <= run_end; ++n) {
        if (n > 1) phrase += ' ';
        phrase += control_words[start + static_cast<std::size_t>(n) - 1];
        if (n >= n_min) ++counts[phrase];
      }
    }
    i = run_end;
  }
}

std::vector<std::pair<std::string, std::size_t>> ranked(const PhraseCounts& counts) {
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

std::vector<std::string> filtered(const std::vector<std::string>& words,
                                  const std::unordered_set<std::string>& stopwords) {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    if (!stopwords.count(w)) out.push_back(w);
  }
  return out;
}

}  // namespace

NgramDiffReport removed_ngram_analysis(std::span<const OutputPairText> pairs, int n_min,
                                       int n_max,
                                       const std::unordered_set<std::string>& stopwords,
                                       std::string stopword_list_version, ExecPolicy policy) {
  if (n_min < 1 || n_max < n_min) throw Error("removed_ngram_analysis: bad n range");
  NgramDiffReport report;
  report.n_min = n_min;
  report.n_max = n_max;
  report.stopword_list_version = std::move(stopword_list_version);

  std::vector<PhraseCounts> with_sw(pairs.size());
  std::vector<PhraseCounts> without_sw(pairs.size());
  parallel_for(pairs.size(), policy, [&](std::size_t i) {
    const auto& pair = pairs[i];
    if (pair.control_text.empty() || pair.treated_text.empty()) return;
    auto control_words = word_tokens(pair.control_text);
    auto treated_words = word_tokens(pair.treated_text);
    std::unordered_set<std::string> treated_set(treated_words.begin(), treated_words.end());
    accumulate_removed(control_words, treated_set, n_min, n_max, with_sw[i]);

    auto control_kept = filtered(control_words, stopwords);
    auto treated_kept = filtered(treated_words, stopwords);
    std::unordered_set<std::string> treated_kept_set(treated_kept.begin(), treated_kept.end());
    accumulate_removed(control_kept, treated_kept_set, n_min, n_max, without_sw[i]);
  });

  // ordered merge keeps the result independent of thread count
  PhraseCounts merged_with, merged_without;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (const auto& [phrase, count] : with_sw[i]) merged_with[phrase] += count;
    for (const auto& [phrase, count] : without_sw[i]) merged_without[phrase] += count;
  }
  report.with_stopwords = ranked(merged_with);
  report.without_stopwords = ranked(merged_without);
  return report;
}

std::string similarity_report_csv(const OutputSimilarityReport& report) {
  std::ostringstream out;
  out << "pair_id,cosine\n";
  out.precision(17);
  for (const auto& [pair_id, sim] : report.per_pair) {
    out << pair_id << "," << sim << "\n";
  }
  return out.str();
}

std::string ngram_report_csv(const NgramDiffReport& report) {
  std::ostringstream out;
  out << "pass,phrase,frequency\n";
  for (const auto& [phrase, count] : report.with_stopwords) {
    out << "with_stopwords," << phrase << "," << count << "\n";
  }
  for (const auto& [phrase, count] : report.without_stopwords) {
    out << "without_stopwords," << phrase << "," << count << "\n";
  }
  return out.str();
}

}  // namespace tonecost
