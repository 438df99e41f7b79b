#include "tonecost/counterfactual.hpp"

#include "tonecost/digest.hpp"
#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"
#include "tonecost/textutil.hpp"

namespace tonecost {

namespace {

void require_placeholder_once(const std::string& text, const std::string& placeholder,
                              const std::string& what) {
  auto first = text.find(placeholder);
  if (first == std::string::npos) {
    throw ConfigError(what + " lacks the " + placeholder + " placeholder");
  }
  if (text.find(placeholder, first + 1) != std::string::npos) {
    throw ConfigError(what + " contains " + placeholder + " more than once");
  }
}

std::string target_tone_of(const TreatmentLabel& treatment) {
  // the rewrite always targets the complement 1-T
  return treatment.value == Treatment::polite ? "non-polite" : "polite";
}

}  // namespace

const char* to_string(FlipVerified value) {
  switch (value) {
    case FlipVerified::yes: return "yes";
    case FlipVerified::no: return "no";
    case FlipVerified::unchecked: return "unchecked";
  }
  return "unchecked";
}

FlipVerified flip_verified_from_string(const std::string& name) {
  if (name == "yes") return FlipVerified::yes;
  if (name == "no") return FlipVerified::no;
  return FlipVerified::unchecked;
}

RewriteTemplate RewriteTemplate::load(const std::filesystem::path& path, std::string version) {
  RewriteTemplate tmpl;
  tmpl.text = read_file(path);
  tmpl.version = std::move(version);
  tmpl.hash = sha256_hex(tmpl.text);
  require_placeholder_once(tmpl.text, "{prompt}", "rewrite template " + path.string());
  require_placeholder_once(tmpl.text, "{target_tone}", "rewrite template " + path.string());
  return tmpl;
}

RewriteTemplate RewriteTemplate::default_template() {
  RewriteTemplate tmpl;
  tmpl.text =
      "Rewrite the text between the markers so its tone becomes {target_tone}.\n"
      "Preserve the semantic meaning and minimize any other change.\n"
      "Output only the rewritten text, with no commentary.\n"
      "<<<BEGIN TEXT>>>\n{prompt}\n<<<END TEXT>>>\n";
  tmpl.version = "builtin_v1";
  tmpl.hash = sha256_hex(tmpl.text);
  return tmpl;
}

std::string RewriteTemplate::render(std::string_view prompt, std::string_view target_tone) const {
  std::string out = text;
  auto pos = out.find("{target_tone}");
  out.replace(pos, 13, target_tone);
  pos = out.find("{prompt}");
  out.replace(pos, 8, prompt);
  return out;
}

CounterfactualDraft generate_counterfactual(const PromptRecord& prompt,
                                            const TreatmentLabel& treatment,
                                            const RewriteTemplate& tmpl, ChatProvider& provider,
                                            const ModelConfig& config) {
  CounterfactualDraft draft;
  draft.prompt_id = prompt.prompt_id;
  draft.original_text = prompt.text;
  draft.original_treatment = treatment;
  draft.template_hash = tmpl.hash;
  draft.provider_id = provider.id();
  draft.model_name = config.model_name;
  draft.temperature = config.temperature;

  try {
    ChatResult result = provider.chat(tmpl.render(prompt.text, target_tone_of(treatment)), config);
    draft.counterfactual_text = trim(result.text);
  } catch (const ProviderError& ex) {
    draft.failed = true;
    draft.quarantine_reason = ex.what();
    return draft;
  }
  if (draft.counterfactual_text.empty() || draft.counterfactual_text == draft.original_text) {
    draft.failed = true;
    draft.quarantine_reason = draft.counterfactual_text.empty()
                                  ? "empty rewrite"
                                  : "rewrite identical to original";
  }
  return draft;
}

CounterfactualDraft verify_flip(CounterfactualDraft draft, const JudgeTemplate& judge,
                                ChatProvider& provider, const ModelConfig& config,
                                const VerifyOptions& options) {
  if (draft.failed) return draft;
  Treatment target = draft.original_treatment.value == Treatment::polite ? Treatment::non_polite
                                                                         : Treatment::polite;
  TreatmentLabel judged;
  try {
    judged = judge_classify(draft.counterfactual_text, judge, provider, config);
  } catch (const ProviderError& ex) {
    draft.flip_verified = FlipVerified::unchecked;
    draft.quarantine_reason = ex.what();
    return draft;
  }
  if (judged.unclassified) {
    draft.flip_verified = FlipVerified::unchecked;
    if (options.quarantine_unparseable) {
      draft.quarantine_reason = "judge answer unparseable";
    }
    return draft;
  }
  if (judged.value == target) {
    draft.flip_verified = FlipVerified::yes;
  } else {
    draft.flip_verified = FlipVerified::no;
    draft.quarantine_reason = "counterfactual judged " + std::string(to_string(judged.value)) +
                              ", expected " + to_string(target);
  }
  return draft;
}

std::vector<CounterfactualDraft> generate_verified_batch(
    std::span<const PromptRecord> prompts, std::span<const TreatmentLabel> treatments,
    const RewriteTemplate& rewrite, const JudgeTemplate& judge, ChatProvider& provider,
    const ModelConfig& config, const VerifyOptions& options, CounterfactBatchReport* report) {
  if (prompts.size() != treatments.size()) {
    throw Error("generate_verified_batch: prompts and treatments differ in length");
  }
  CounterfactBatchReport local;
  std::vector<CounterfactualDraft> drafts;
  drafts.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    CounterfactualDraft draft;
    for (int attempt = 0; attempt <= options.max_regenerations; ++attempt) {
      PromptRecord request = prompts[i];
      if (attempt > 0) {
        // nudge the request so a deterministic provider can answer afresh
        request.text += "\n(rewrite attempt " + std::to_string(attempt + 1) + ")";
        draft = generate_counterfactual(request, treatments[i], rewrite, provider, config);
        draft.original_text = prompts[i].text;
      } else {
        draft = generate_counterfactual(request, treatments[i], rewrite, provider, config);
      }
      draft.prompt_id = prompts[i].prompt_id;
      if (draft.failed) break;
      draft = verify_flip(std::move(draft), judge, provider, config, options);
      if (draft.flip_verified == FlipVerified::yes ||
          (draft.flip_verified == FlipVerified::unchecked && !options.quarantine_unparseable)) {
        break;
      }
    }
    ++local.generated;
    if (draft.failed) {
      ++local.failed;
    } else if (draft.flip_verified == FlipVerified::yes) {
      ++local.verified;
    } else if (draft.flip_verified == FlipVerified::no) {
      ++local.quarantined;
    } else {
      ++local.unchecked;
    }
    drafts.push_back(std::move(draft));
  }
  if (report) *report = local;
  return drafts;
}

void write_drafts(const std::filesystem::path& path,
                  std::span<const CounterfactualDraft> drafts) {
  JsonlWriter writer(path);
  for (const auto& d : drafts) {
    nlohmann::json obj{{"prompt_id", d.prompt_id},
                       {"original_text", d.original_text},
                       {"counterfactual_text", d.counterfactual_text},
                       {"original_treatment", to_string(d.original_treatment.value)},
                       {"flip_verified", to_string(d.flip_verified)},
                       {"template_hash", d.template_hash},
                       {"provider", d.provider_id},
                       {"model", d.model_name},
                       {"temperature", d.temperature}};
    if (d.failed) obj["failed"] = true;
    if (!d.quarantine_reason.empty()) obj["quarantine_reason"] = d.quarantine_reason;
    if (d.original_treatment.form) obj["form"] = to_string(*d.original_treatment.form);
    if (d.original_treatment.score) obj["score"] = *d.original_treatment.score;
    writer.write(obj);
  }
  writer.close();
}

std::vector<CounterfactualDraft> read_drafts(const std::filesystem::path& path) {
  std::vector<CounterfactualDraft> out;
  for_each_jsonl(path, [&](nlohmann::json&& obj) {
    CounterfactualDraft d;
    d.prompt_id = obj.at("prompt_id").get<std::string>();
    d.original_text = obj.at("original_text").get<std::string>();
    d.counterfactual_text = obj.at("counterfactual_text").get<std::string>();
    d.original_treatment.value = obj.at("original_treatment").get<std::string>() == "polite"
                                     ? Treatment::polite
                                     : Treatment::non_polite;
    d.flip_verified = flip_verified_from_string(obj.value("flip_verified", "unchecked"));
    d.template_hash = obj.value("template_hash", std::string());
    d.provider_id = obj.value("provider", std::string());
    d.model_name = obj.value("model", std::string());
    d.temperature = obj.value("temperature", 0.0);
    d.failed = obj.value("failed", false);
    d.quarantine_reason = obj.value("quarantine_reason", std::string());
    if (obj.contains("form")) {
      d.original_treatment.form = politeness_form_from_string(obj["form"].get<std::string>());
    }
    if (obj.contains("score")) d.original_treatment.score = obj["score"].get<double>();
    out.push_back(std::move(d));
  });
  return out;
}

}  // namespace tonecost
