#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "tonecost/corpus.hpp"
#include "tonecost/mock_provider.hpp"
#include "tonecost/provider.hpp"

namespace tonecost {

/// Single JSON config file with per-stage sections; relative paths resolve
/// against the config file's directory. Every report embeds the hash of the
/// fully-defaulted canonical form.
struct PipelineConfig {
  std::filesystem::path config_dir;
  std::string config_hash;
  nlohmann::json canonical;

  std::filesystem::path output_dir = "out";
  bool deterministic = true;

  // corpus
  std::filesystem::path corpus_path;
  FieldMapping mapping;
  std::size_t sample_n = 0;  // 0: keep everything
  std::uint64_t seed = 42;
  std::optional<std::string> language;

  // tokenizer
  std::filesystem::path encoding_file;
  std::string encoding_id = "tonecost_bpe_v1";

  // classify
  std::optional<std::filesystem::path> lexicon_file;
  std::optional<std::filesystem::path> judge_template_file;
  int judge_retries = 2;

  // counterfactual
  std::optional<std::filesystem::path> rewrite_template_file;
  bool verify_flip = true;
  int max_regenerations = 2;

  // filter
  int sigma = 5;
  std::optional<double> min_prompt_similarity;
  bool compute_similarity = true;

  // provider
  std::string provider_kind = "mock";  // mock | http
  ModelConfig model;
  MockBehavior mock;
  std::filesystem::path cache_dir = "cache";

  // runner
  int concurrency = 4;

  // estimate / robustness
  bool robust_se = false;
  bool robustness_forms = true;
  bool robustness_liwc = true;
  bool robustness_tasks = true;
  bool robustness_similarity = true;
  bool robustness_ngrams = true;
  std::optional<std::filesystem::path> ratings_file;
  std::optional<std::filesystem::path> task_categories_file;
  std::optional<std::filesystem::path> stopwords_file;

  // cost
  std::string output_price_per_million = "12";
  std::string input_price_per_million = "12";
  std::int64_t daily_queries = 2200000000;
  int month_days = 30;

  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig from_json(const nlohmann::json& raw,
                                  const std::filesystem::path& config_dir);
};

}  // namespace tonecost
