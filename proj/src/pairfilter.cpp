#include "tonecost/pairfilter.hpp"

#include <cmath>
#include <sstream>

#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"
#include "tonecost/semantics.hpp"

namespace tonecost {

const char* to_string(PairStatus status) {
  switch (status) {
    case PairStatus::retained: return "retained";
    case PairStatus::dropped_length: return "dropped_length";
    case PairStatus::dropped_flip: return "dropped_flip";
    case PairStatus::failed: return "failed";
  }
  return "failed";
}

PairStatus pair_status_from_string(const std::string& name) {
  if (name == "retained") return PairStatus::retained;
  if (name == "dropped_length") return PairStatus::dropped_length;
  if (name == "dropped_flip") return PairStatus::dropped_flip;
  return PairStatus::failed;
}

std::vector<PromptPair> build_pairs(std::span<const CounterfactualDraft> drafts,
                                    const FilterConfig& config, const EncodingTable& encoding,
                                    FilterReport* report, bool accept_unchecked) {
  if (config.sigma < 0) throw ConfigError("filter: sigma must be non-negative");
  FilterReport local;
  local.input = drafts.size();
  std::vector<PromptPair> pairs;
  pairs.reserve(drafts.size());

  for (const auto& draft : drafts) {
    PromptPair pair;
    pair.pair_id = draft.prompt_id;
    pair.original.prompt_id = draft.prompt_id;
    pair.original.text = draft.original_text;
    pair.counterfactual_text = draft.counterfactual_text;
    pair.treatment_of_original = draft.original_treatment;

    if (draft.failed) {
      pair.status = PairStatus::failed;
      ++local.failed;
      pairs.push_back(std::move(pair));
      continue;
    }

    pair.original.input_tokens = encoding.count_tokens(draft.original_text);
    pair.counterfactual_tokens = encoding.count_tokens(draft.counterfactual_text);
    pair.token_delta = pair.original.input_tokens - pair.counterfactual_tokens;
    ++local.delta_histogram[pair.token_delta];

    bool flip_ok = draft.flip_verified == FlipVerified::yes ||
                   (accept_unchecked && draft.flip_verified == FlipVerified::unchecked);
    if (!flip_ok) {
      pair.status = PairStatus::dropped_flip;
      ++local.dropped_flip;
    } else if (std::abs(pair.token_delta) > config.sigma) {
      pair.status = PairStatus::dropped_length;
      ++local.dropped_length;
    } else {
      pair.status = PairStatus::retained;
      ++local.retained;
    }
    pairs.push_back(std::move(pair));
  }

  if (report) *report = local;
  return pairs;
}

void compute_prompt_similarity(std::vector<PromptPair>& pairs, Embedder& embedder,
                               const ModelConfig& config, FilterReport* report,
                               ExecPolicy policy) {
  (void)policy;  // embedding goes through the provider; keep calls ordered
  std::size_t failures = 0;
  for (auto& pair : pairs) {
    if (pair.status == PairStatus::failed) continue;
    if (pair.original.text.empty() || pair.counterfactual_text.empty()) continue;
    try {
      auto a = embedder.embed(pair.original.text, config);
      auto b = embedder.embed(pair.counterfactual_text, config);
      pair.prompt_similarity = cosine(a, b);
    } catch (const Error&) {
      pair.prompt_similarity.reset();
      ++failures;
    }
  }
  if (report) report->similarity_failures = failures;
}

std::vector<PromptPair> select_retained(std::span<const PromptPair> pairs,
                                        const FilterConfig& config,
                                        std::size_t* similarity_gated) {
  std::vector<PromptPair> out;
  std::size_t gated = 0;
  for (const auto& pair : pairs) {
    if (pair.status != PairStatus::retained) continue;
    if (config.min_prompt_similarity && pair.prompt_similarity &&
        *pair.prompt_similarity < *config.min_prompt_similarity) {
      ++gated;
      continue;
    }
    out.push_back(pair);
  }
  if (similarity_gated) *similarity_gated = gated;
  return out;
}

void write_pairs(const std::filesystem::path& path, std::span<const PromptPair> pairs) {
  JsonlWriter writer(path);
  for (const auto& p : pairs) {
    nlohmann::json obj{{"pair_id", p.pair_id},
                       {"original_text", p.original.text},
                       {"counterfactual_text", p.counterfactual_text},
                       {"original_tokens", p.original.input_tokens},
                       {"counterfactual_tokens", p.counterfactual_tokens},
                       {"treatment_of_original", to_string(p.treatment_of_original.value)},
                       {"token_delta", p.token_delta},
                       {"status", to_string(p.status)}};
    if (p.prompt_similarity) obj["prompt_similarity"] = *p.prompt_similarity;
    if (p.treatment_of_original.form) obj["form"] = to_string(*p.treatment_of_original.form);
    if (p.treatment_of_original.score) obj["score"] = *p.treatment_of_original.score;
    writer.write(obj);
  }
  writer.close();
}

std::vector<PromptPair> read_pairs(const std::filesystem::path& path) {
  std::vector<PromptPair> out;
  for_each_jsonl(path, [&](nlohmann::json&& obj) {
    PromptPair p;
    p.pair_id = obj.at("pair_id").get<std::string>();
    p.original.prompt_id = p.pair_id;
    p.original.text = obj.at("original_text").get<std::string>();
    p.counterfactual_text = obj.at("counterfactual_text").get<std::string>();
    p.original.input_tokens = obj.value("original_tokens", -1);
    p.counterfactual_tokens = obj.value("counterfactual_tokens", -1);
    p.treatment_of_original.value = obj.at("treatment_of_original").get<std::string>() == "polite"
                                        ? Treatment::polite
                                        : Treatment::non_polite;
    p.token_delta = obj.value("token_delta", 0);
    p.status = pair_status_from_string(obj.value("status", "failed"));
    if (obj.contains("prompt_similarity")) {
      p.prompt_similarity = obj["prompt_similarity"].get<double>();
    }
    if (obj.contains("form")) {
      p.treatment_of_original.form =
          politeness_form_from_string(obj["form"].get<std::string>());
    }
    if (obj.contains("score")) p.treatment_of_original.score = obj["score"].get<double>();
    out.push_back(std::move(p));
  });
  return out;
}

std::string delta_histogram_csv(const FilterReport& report) {
  std::ostringstream out;
  out << "token_delta,count\n";
  for (const auto& [delta, count] : report.delta_histogram) {
    out << delta << "," << count << "\n";
  }
  return out.str();
}

}  // namespace tonecost
