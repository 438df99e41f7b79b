#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tonecost/parallel.hpp"
#include "tonecost/provider.hpp"

namespace tonecost {

enum class Treatment { non_polite = 0, polite = 1 };
enum class ClassifyMethod { judge, lexicon };

/// Politeness form buckets mirroring the explicit/implicit taxonomy.
/// `please_only` is a subset label (any prompt containing "please"); the
/// single-valued form classifier folds it into please_and_thankyou, and the
/// subset machinery in `stats` selects on the marker flags instead.
enum class PolitenessForm { please_and_thankyou, please_only, implicit, none };

struct TreatmentLabel {
  Treatment value = Treatment::non_polite;
  ClassifyMethod method = ClassifyMethod::lexicon;
  std::optional<double> score;          // continuous politeness (lexicon only)
  std::optional<PolitenessForm> form;
  std::string raw_judge_output;         // stored for audit (judge only)
  bool unclassified = false;            // judge answer unparseable after retries
};

const char* to_string(Treatment value);
const char* to_string(PolitenessForm form);
PolitenessForm politeness_form_from_string(const std::string& name);

/// Marker tag on a lexicon entry; drives form assignment and subsetting.
enum class MarkerTag { please, thank_you, explicit_other, implicit };

struct LexiconEntry {
  std::string pattern;  // case-insensitive phrase, matched on word boundaries
  double weight = 1.0;  // positive
  MarkerTag tag = MarkerTag::implicit;
};

struct PolitenessLexicon {
  std::vector<LexiconEntry> entries;
  std::string version = "default";

  static PolitenessLexicon load(const std::filesystem::path& path);
  static PolitenessLexicon default_lexicon();
};

struct MarkerHits {
  double weighted_hits = 0.0;
  int word_count = 0;  // whitespace-delimited words
  bool has_please = false;
  bool has_thank_you = false;
  bool has_explicit_other = false;
  bool has_implicit = false;

  bool any() const { return has_please || has_thank_you || has_explicit_other || has_implicit; }
};

/// Scans for lexicon patterns. Multi-word patterns must not span sentence
/// boundaries (. ! ? ; and newlines), so concatenating texts cannot invent
/// new matches at the seam.
MarkerHits scan_markers(std::string_view prompt, const PolitenessLexicon& lexicon);

/// 100 * (sum of matched weights) / (whitespace word count); 0 for empty text.
double lexicon_score(std::string_view prompt, const PolitenessLexicon& lexicon);

/// polite iff score > 0. Throws Error on negative input.
TreatmentLabel lexicon_label(double score);

PolitenessForm politeness_form(std::string_view prompt, const PolitenessLexicon& lexicon);

/// Batch scoring kernel (serial reference / OpenMP).
std::vector<double> lexicon_score_batch(const std::vector<std::string>& prompts,
                                        const PolitenessLexicon& lexicon,
                                        ExecPolicy policy = ExecPolicy::parallel);

/// Instruction template for the LLM judge; {prompt} placeholder required.
struct JudgeTemplate {
  std::string text;
  std::string version;
  std::string hash;  // sha256 of the template text

  static JudgeTemplate load(const std::filesystem::path& path, std::string version = "file");
  static JudgeTemplate default_template();
  std::string render(std::string_view prompt) const;
};

/// Classifies via the provider with up to `max_retries` extra attempts when
/// the answer does not parse to POLITE/NONPOLITE; after that the label comes
/// back with unclassified=true and must be excluded downstream.
TreatmentLabel judge_classify(const std::string& prompt, const JudgeTemplate& tmpl,
                              ChatProvider& provider, const ModelConfig& config,
                              int max_retries = 2);

/// Fraction of positions with equal treatment values. Symmetric; throws on
/// length mismatch.
double alignment_rate(std::span<const TreatmentLabel> a, std::span<const TreatmentLabel> b);

}  // namespace tonecost
