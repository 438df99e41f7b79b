#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tonecost/counterfactual.hpp"
#include "tonecost/parallel.hpp"
#include "tonecost/provider.hpp"
#include "tonecost/tokencount.hpp"

namespace tonecost {

enum class PairStatus { retained, dropped_length, dropped_flip, failed };

const char* to_string(PairStatus status);
PairStatus pair_status_from_string(const std::string& name);

struct PromptPair {
  std::string pair_id;
  PromptRecord original;
  std::string counterfactual_text;
  int counterfactual_tokens = 0;
  TreatmentLabel treatment_of_original;
  int token_delta = 0;  // tokens(original) - tokens(counterfactual)
  std::optional<double> prompt_similarity;
  PairStatus status = PairStatus::failed;
};

struct FilterConfig {
  int sigma = 5;  // max |token_delta|; sigma_unbounded() lifts the gate
  std::optional<double> min_prompt_similarity;  // unset: similarity is diagnostic only
  std::string encoding_id;

  static constexpr int sigma_unbounded() { return std::numeric_limits<int>::max(); }
};

struct FilterReport {
  std::size_t input = 0;
  std::size_t retained = 0;
  std::size_t dropped_length = 0;
  std::size_t dropped_flip = 0;
  std::size_t failed = 0;
  std::map<int, std::size_t> delta_histogram;  // over non-failed pairs
  std::size_t similarity_failures = 0;

  std::size_t total_by_status() const {
    return retained + dropped_length + dropped_flip + failed;
  }
};

/// Every draft becomes exactly one PromptPair with a status; the retained set
/// is the experiment input. Token deltas come from the pinned local encoder.
/// `accept_unchecked` admits drafts whose flip check never ran (for runs
/// configured with verification off); verified-no drafts always drop.
std::vector<PromptPair> build_pairs(std::span<const CounterfactualDraft> drafts,
                                    const FilterConfig& config, const EncodingTable& encoding,
                                    FilterReport* report = nullptr,
                                    bool accept_unchecked = false);

/// Fills prompt_similarity with the cosine of the two prompt embeddings.
/// Embedder failures leave the similarity unset and the pair retained (the
/// measure is a diagnostic, not a gate, unless min_prompt_similarity is set).
void compute_prompt_similarity(std::vector<PromptPair>& pairs, Embedder& embedder,
                               const ModelConfig& config, FilterReport* report = nullptr,
                               ExecPolicy policy = ExecPolicy::serial);

/// Pairs entering the experiment: status retained, and above the optional
/// similarity floor when one is configured. Status itself is never rewritten
/// by the similarity gate, so per-status counts keep summing to the input.
std::vector<PromptPair> select_retained(std::span<const PromptPair> pairs,
                                        const FilterConfig& config,
                                        std::size_t* similarity_gated = nullptr);

void write_pairs(const std::filesystem::path& path, std::span<const PromptPair> pairs);
std::vector<PromptPair> read_pairs(const std::filesystem::path& path);

/// Token-delta histogram as CSV ("delta,count" rows).
std::string delta_histogram_csv(const FilterReport& report);

}  // namespace tonecost
