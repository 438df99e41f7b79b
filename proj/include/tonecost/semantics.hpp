#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tonecost/parallel.hpp"
#include "tonecost/provider.hpp"

namespace tonecost {

/// Standard cosine similarity. Throws Error on dimension mismatch or a zero
/// vector.
double cosine(std::span<const double> u, std::span<const double> v);

/// The six fixed prompt-task categories; canonical order is file order and
/// breaks argmax ties.
struct TaskCategory {
  std::string name;
  std::string description;
  std::vector<double> embedding;  // cached once per run
};

std::vector<TaskCategory> load_task_categories(const std::filesystem::path& path);
std::vector<TaskCategory> default_task_categories();

/// Fills category embeddings from their descriptions.
void embed_categories(std::vector<TaskCategory>& categories, Embedder& embedder,
                      const ModelConfig& config);

struct TaskAssignment {
  int index = -1;  // -1: unclassified (embedder failure)
  std::string name;
  double similarity = 0.0;
  bool tie = false;
};

/// Nearest category by cosine between the prompt embedding and each category
/// embedding; ties go to the first category in canonical order.
TaskAssignment classify_task(const std::string& prompt,
                             const std::vector<TaskCategory>& categories, Embedder& embedder,
                             const ModelConfig& config);

/// Pure-kernel variant on a precomputed prompt embedding.
TaskAssignment assign_task(std::span<const double> prompt_embedding,
                           const std::vector<TaskCategory>& categories);

/// One completed pair's two output texts, keyed for reports.
struct OutputPairText {
  std::string pair_id;
  std::string control_text;  // non-polite arm
  std::string treated_text;  // polite arm
};

struct OutputSimilarityReport {
  std::vector<std::pair<std::string, double>> per_pair;  // (pair_id, cosine)
  double mean = 0.0;
  std::size_t skipped = 0;  // pairs missing an arm
  std::string band;         // annotation against the 0.7/0.8 thresholds
};

/// Per-pair cosine of the two output embeddings plus the corpus mean,
/// annotated against the paraphrase (>0.8) and strong-similarity (0.7-0.8)
/// bands. Embedding happens through the provider; the pairwise cosine fold is
/// a serial/OpenMP kernel.
OutputSimilarityReport output_similarity(std::span<const OutputPairText> pairs,
                                         Embedder& embedder, const ModelConfig& config,
                                         ExecPolicy policy = ExecPolicy::parallel);

struct NgramDiffReport {
  int n_min = 1;
  int n_max = 4;
  std::string stopword_list_version;
  // phrases ranked by (frequency desc, phrase asc); one pass keeps stopwords,
  // the other removes them before forming n-grams
  std::vector<std::pair<std::string, std::size_t>> with_stopwords;
  std::vector<std::pair<std::string, std::size_t>> without_stopwords;
};

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

/// Accumulates n-grams (n in [n_min, n_max]) over maximal runs of control
/// words that are absent from the treated output. Words come lowercased and
/// punctuation-stripped. Empty whenever the treated output contains every
/// control word.
NgramDiffReport removed_ngram_analysis(std::span<const OutputPairText> pairs, int n_min,
                                       int n_max,
                                       const std::unordered_set<std::string>& stopwords,
                                       std::string stopword_list_version = "english_v1",
                                       ExecPolicy policy = ExecPolicy::parallel);

std::string similarity_report_csv(const OutputSimilarityReport& report);
std::string ngram_report_csv(const NgramDiffReport& report);

}  // namespace tonecost
