#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tonecost/classify.hpp"
#include "tonecost/corpus.hpp"
#include "tonecost/provider.hpp"

namespace tonecost {

/// Rewrite instruction with {prompt} and {target_tone} placeholders, each
/// required exactly once. The wording is versioned config; the hash travels
/// with every draft for audit.
struct RewriteTemplate {
  std::string text;
  std::string version;
  std::string hash;

  static RewriteTemplate load(const std::filesystem::path& path, std::string version = "file");
  static RewriteTemplate default_template();
  std::string render(std::string_view prompt, std::string_view target_tone) const;
};

enum class FlipVerified { yes, no, unchecked };

const char* to_string(FlipVerified value);
FlipVerified flip_verified_from_string(const std::string& name);

struct CounterfactualDraft {
  std::string prompt_id;
  std::string original_text;
  std::string counterfactual_text;
  TreatmentLabel original_treatment;
  FlipVerified flip_verified = FlipVerified::unchecked;
  std::string quarantine_reason;
  bool failed = false;  // provider failure after the retry budget

  // audit trail
  std::string template_hash;
  std::string provider_id;
  std::string model_name;
  double temperature = 0.0;
};

/// Rewrites the prompt to the opposite tone (target 1-T) under frozen
/// decoding. Provider failures mark the draft failed rather than throwing.
CounterfactualDraft generate_counterfactual(const PromptRecord& prompt,
                                            const TreatmentLabel& treatment,
                                            const RewriteTemplate& tmpl, ChatProvider& provider,
                                            const ModelConfig& config);

struct VerifyOptions {
  int max_regenerations = 2;       // rewrite retries after a failed flip check
  bool quarantine_unparseable = false;
};

/// Re-judges the counterfactual text; flip_verified=yes iff the judged label
/// equals 1-T. Unparseable judge answers leave the draft unchecked (or
/// quarantine it, per options).
CounterfactualDraft verify_flip(CounterfactualDraft draft, const JudgeTemplate& judge,
                                ChatProvider& provider, const ModelConfig& config,
                                const VerifyOptions& options = {});

struct CounterfactBatchReport {
  std::size_t generated = 0;
  std::size_t verified = 0;
  std::size_t quarantined = 0;
  std::size_t unchecked = 0;
  std::size_t failed = 0;
};

/// Generate + verify for a whole prompt set, regenerating up to
/// options.max_regenerations times when the flip check fails.
std::vector<CounterfactualDraft> generate_verified_batch(
    std::span<const PromptRecord> prompts, std::span<const TreatmentLabel> treatments,
    const RewriteTemplate& rewrite, const JudgeTemplate& judge, ChatProvider& provider,
    const ModelConfig& config, const VerifyOptions& options, CounterfactBatchReport* report);

void write_drafts(const std::filesystem::path& path, std::span<const CounterfactualDraft> drafts);
std::vector<CounterfactualDraft> read_drafts(const std::filesystem::path& path);

}  // namespace tonecost
