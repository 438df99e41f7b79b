#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tonecost/pairfilter.hpp"
#include "tonecost/provider.hpp"

namespace tonecost {

enum class Arm { treated_polite, control_nonpolite };

const char* to_string(Arm arm);

struct CompletionRecord {
  std::string pair_id;
  Arm arm = Arm::control_nonpolite;
  std::string prompt_text;
  int input_tokens = 0;   // provider-reported where available
  int output_tokens = 0;  // the outcome Y
  std::string output_text;
  std::string config_hash;
  std::string status = "ok";
  UsageSource usage_source = UsageSource::provider_reported;
};

struct RunReport {
  std::size_t pairs_in = 0;
  std::size_t pairs_completed = 0;
  std::size_t pairs_failed = 0;  // one-arm failures excluded whole (both-or-neither)
};

struct RunOptions {
  int concurrency = 4;
};

/// Runs both arms of every retained pair under one frozen config. The polite
/// member always runs as the treated arm regardless of whether it is the
/// original or the counterfactual. A failed arm drops the whole pair from the
/// dataset. Records come back sorted by (pair_id, arm) so the result does not
/// depend on completion order; with a caching provider a rerun replays from
/// the cache without network calls.
std::vector<CompletionRecord> run_experiment(std::span<const PromptPair> pairs,
                                             const ModelConfig& config, ChatProvider& provider,
                                             const RunOptions& options = {},
                                             RunReport* report = nullptr);

struct ProbeRow {
  int z = 0;
  int output_tokens = 0;
  int deviation = 0;  // output_tokens - z
  bool ok = true;
  std::string error;
};

/// Appends "describe with z number of tokens" for each z and measures actual
/// output length. Throws Error when z_values is empty or contains z <= 0.
std::vector<ProbeRow> length_adherence_probe(const std::string& base_prompt,
                                             std::span<const int> z_values,
                                             const ModelConfig& config, ChatProvider& provider);

std::string probe_table_csv(std::span<const ProbeRow> rows);

void write_completions(const std::filesystem::path& path,
                       std::span<const CompletionRecord> records);
std::vector<CompletionRecord> read_completions(const std::filesystem::path& path);

}  // namespace tonecost
