#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tonecost/classify.hpp"
#include "tonecost/config.hpp"
#include "tonecost/runner.hpp"
#include "tonecost/stats.hpp"

namespace tonecost {

/// Per-prompt classification artifact written by the classify stage.
struct ClassificationRecord {
  std::string prompt_id;
  Treatment judge_value = Treatment::non_polite;
  bool unclassified = false;
  std::string raw_judge_output;
  double lexicon_score_value = 0.0;
  Treatment lexicon_value = Treatment::non_polite;
  PolitenessForm form = PolitenessForm::none;
  bool has_please = false;
  bool has_thank_you = false;
};

void write_classifications(const std::filesystem::path& path,
                           std::span<const ClassificationRecord> records);
std::vector<ClassificationRecord> read_classifications(const std::filesystem::path& path);

struct StageRecord {
  std::string name;
  std::string status = "pending";  // pending | complete | failed
  nlohmann::json counts = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> outputs;  // (relative path, digest)
  std::int64_t started_ms = 0;
  std::int64_t finished_ms = 0;
};

/// Stage-by-stage record of one pipeline run: config hash, per-stage counts,
/// and a digest for every produced artifact. Written atomically at each stage
/// boundary; in deterministic mode the timestamps stay zero so two identical
/// runs produce byte-identical manifests.
struct RunManifest {
  std::string config_hash;
  bool deterministic = true;
  std::vector<StageRecord> stages;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& obj);

  const StageRecord* find(const std::string& name) const;
};

struct PipelineResult {
  RunManifest manifest;
  std::filesystem::path manifest_path;
  std::size_t provider_network_calls = 0;
  std::size_t provider_cache_hits = 0;
};

/// Runs ingest -> classify -> counterfact -> filter -> run -> estimate ->
/// robustness -> cost. Stages whose outputs already exist with matching
/// digests are skipped, which is what makes an interrupted run resumable.
/// Before a stage runs, the recorded digests of every earlier artifact are
/// re-verified; a mismatch aborts the run. `until` limits execution to the
/// stages up to and including the named one.
PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::optional<std::string>& until = std::nullopt);

/// Assembles the estimation dataset from completions plus pair/classification
/// metadata: per-row continuous politeness scores, the polite member's form
/// and marker flags, judge/lexicon alignment, and optional task assignments.
EstimationDataset build_estimation_dataset(
    std::span<const CompletionRecord> completions, std::span<const PromptPair> pairs,
    const PolitenessLexicon& lexicon,
    const std::map<std::string, ClassificationRecord>* classifications = nullptr,
    const std::map<std::string, int>* task_by_pair = nullptr,
    std::vector<std::string> task_names = {});

/// Ratings CSV for the quality ANOVA: header then rating,factor_a,factor_b.
struct RatingsData {
  std::vector<double> ratings;
  std::vector<int> factor_a;  // politeness
  std::vector<int> factor_b;  // original vs counterfactual
};
RatingsData read_ratings_csv(const std::filesystem::path& path);

}  // namespace tonecost
