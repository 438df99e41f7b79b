#include "tonecost/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "tonecost/cost.hpp"
#include "tonecost/counterfactual.hpp"
#include "tonecost/digest.hpp"
#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"
#include "tonecost/mock_provider.hpp"
#include "tonecost/report.hpp"
#include "tonecost/semantics.hpp"
#include "tonecost/textutil.hpp"
#include "tonecost/tokencount.hpp"

namespace tonecost {

// ---------------------------------------------------------------------------
// classification records
// ---------------------------------------------------------------------------

void write_classifications(const std::filesystem::path& path,
                           std::span<const ClassificationRecord> records) {
  JsonlWriter writer(path);
  for (const auto& r : records) {
    writer.write({{"prompt_id", r.prompt_id},
                  {"method", "judge"},
                  {"value", to_string(r.judge_value)},
                  {"unclassified", r.unclassified},
                  {"raw_judge_output", r.raw_judge_output},
                  {"score", r.lexicon_score_value},
                  {"lexicon_value", to_string(r.lexicon_value)},
                  {"form", to_string(r.form)},
                  {"has_please", r.has_please},
                  {"has_thank_you", r.has_thank_you}});
  }
  writer.close();
}

std::vector<ClassificationRecord> read_classifications(const std::filesystem::path& path) {
  std::vector<ClassificationRecord> out;
  for_each_jsonl(path, [&](nlohmann::json&& obj) {
    ClassificationRecord r;
    r.prompt_id = obj.at("prompt_id").get<std::string>();
    r.judge_value =
        obj.at("value").get<std::string>() == "polite" ? Treatment::polite : Treatment::non_polite;
    r.unclassified = obj.value("unclassified", false);
    r.raw_judge_output = obj.value("raw_judge_output", std::string());
    r.lexicon_score_value = obj.value("score", 0.0);
    r.lexicon_value = obj.value("lexicon_value", std::string("non_polite")) == "polite"
                          ? Treatment::polite
                          : Treatment::non_polite;
    r.form = politeness_form_from_string(obj.value("form", std::string("none")));
    r.has_please = obj.value("has_please", false);
    r.has_thank_you = obj.value("has_thank_you", false);
    out.push_back(std::move(r));
  });
  return out;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

nlohmann::json RunManifest::to_json() const {
  nlohmann::json stages_json = nlohmann::json::array();
  for (const auto& stage : stages) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& [path, digest] : stage.outputs) {
      outputs.push_back({{"path", path}, {"digest", digest}});
    }
    stages_json.push_back({{"name", stage.name},
                           {"status", stage.status},
                           {"counts", stage.counts},
                           {"outputs", outputs},
                           {"started_ms", stage.started_ms},
                           {"finished_ms", stage.finished_ms}});
  }
  return {{"config_hash", config_hash},
          {"deterministic", deterministic},
          {"stages", stages_json}};
}

RunManifest RunManifest::from_json(const nlohmann::json& obj) {
  RunManifest manifest;
  manifest.config_hash = obj.at("config_hash").get<std::string>();
  manifest.deterministic = obj.value("deterministic", true);
  for (const auto& stage_json : obj.at("stages")) {
    StageRecord stage;
    stage.name = stage_json.at("name").get<std::string>();
    stage.status = stage_json.value("status", "pending");
    stage.counts = stage_json.value("counts", nlohmann::json::object());
    for (const auto& output : stage_json.value("outputs", nlohmann::json::array())) {
      stage.outputs.emplace_back(output.at("path").get<std::string>(),
                                 output.at("digest").get<std::string>());
    }
    stage.started_ms = stage_json.value("started_ms", std::int64_t{0});
    stage.finished_ms = stage_json.value("finished_ms", std::int64_t{0});
    manifest.stages.push_back(std::move(stage));
  }
  return manifest;
}

const StageRecord* RunManifest::find(const std::string& name) const {
  for (const auto& stage : stages) {
    if (stage.name == name) return &stage;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// pipeline machinery
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kStageOrder = {"ingest", "classify",  "counterfact", "filter",
                                              "run",    "estimate",  "robustness",  "cost"};

// advisory lock: one pipeline instance per output directory
class PipelineLock {
 public:
  explicit PipelineLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    path_ = dir / "pipeline.lock";
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw Error("pipeline: cannot open lock file " + path_.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw Error("pipeline: another instance owns " + dir.string());
    }
  }
  ~PipelineLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  PipelineLock(const PipelineLock&) = delete;
  PipelineLock& operator=(const PipelineLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

struct ProviderBundle {
  std::unique_ptr<MockProvider> mock;
  std::unique_ptr<HttpChatClient> http;
  std::unique_ptr<ResponseCache> cache;
  std::unique_ptr<CachingChatProvider> caching;
};

ProviderBundle make_provider(const PipelineConfig& cfg, const EncodingTable* encoder) {
  ProviderBundle bundle;
  bundle.cache = std::make_unique<ResponseCache>(cfg.cache_dir);
  if (cfg.provider_kind == "mock") {
    bundle.mock = std::make_unique<MockProvider>(cfg.mock);
    bundle.caching =
        std::make_unique<CachingChatProvider>(*bundle.mock, *bundle.mock, *bundle.cache);
  } else {
    bundle.http = std::make_unique<HttpChatClient>(encoder);
    bundle.caching =
        std::make_unique<CachingChatProvider>(*bundle.http, *bundle.http, *bundle.cache);
  }
  return bundle;
}

std::int64_t stamp_ms(bool deterministic) {
  if (deterministic) return 0;
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// context shared by the stage bodies; assets load lazily and only once
struct StageContext {
  const PipelineConfig& cfg;
  std::filesystem::path out;
  EncodingTable encoding;
  PolitenessLexicon lexicon;
  JudgeTemplate judge;
  RewriteTemplate rewrite;
  ProviderBundle provider;

  explicit StageContext(const PipelineConfig& config) : cfg(config), out(config.output_dir) {
    encoding = config.encoding_file.empty()
                   ? EncodingTable::whitespace_fallback()
                   : EncodingTable::load(config.encoding_file, config.encoding_id);
    lexicon = config.lexicon_file ? PolitenessLexicon::load(*config.lexicon_file)
                                  : PolitenessLexicon::default_lexicon();
    judge = config.judge_template_file ? JudgeTemplate::load(*config.judge_template_file)
                                       : JudgeTemplate::default_template();
    rewrite = config.rewrite_template_file
                  ? RewriteTemplate::load(*config.rewrite_template_file)
                  : RewriteTemplate::default_template();
    provider = make_provider(config, &encoding);
  }

  ChatProvider& chat() { return *provider.caching; }
  Embedder& embedder() { return *provider.caching; }
};

using StageOutputs = std::vector<std::pair<std::string, std::string>>;

void record_output(StageContext& ctx, StageOutputs& outputs, const std::string& rel_path) {
  outputs.emplace_back(rel_path, sha256_file(ctx.out / rel_path));
}

void emit_text(StageContext& ctx, StageOutputs& outputs, const std::string& rel_path,
               const std::string& content) {
  atomic_write_file(ctx.out / rel_path, content);
  record_output(ctx, outputs, rel_path);
}

// ---- stage bodies ----------------------------------------------------------

nlohmann::json stage_ingest(StageContext& ctx, StageOutputs& outputs) {
  if (ctx.cfg.corpus_path.empty()) throw ConfigError("config: corpus.path is required");
  CorpusLoadStats load_stats;
  auto conversations = load_corpus_all(ctx.cfg.corpus_path, ctx.cfg.mapping, &load_stats);
  ExtractStats extract_stats;
  auto prompts = extract_first_turns(conversations, &extract_stats);
  std::vector<PromptRecord> chosen;
  if (ctx.cfg.sample_n > 0) {
    chosen = sample(prompts, ctx.cfg.sample_n, ctx.cfg.seed, ctx.cfg.language);
  } else if (ctx.cfg.language) {
    for (auto& p : prompts) {
      if (to_lower(p.language) == to_lower(*ctx.cfg.language)) chosen.push_back(p);
    }
  } else {
    chosen = std::move(prompts);
  }
  std::vector<std::string> texts;
  texts.reserve(chosen.size());
  for (const auto& p : chosen) texts.push_back(p.text);
  auto counts = count_tokens_batch(texts, ctx.encoding);
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i].input_tokens = counts[i];

  write_prompts(ctx.out / "prompts.jsonl", chosen);
  record_output(ctx, outputs, "prompts.jsonl");
  return {{"lines", load_stats.lines},
          {"loaded", load_stats.loaded},
          {"malformed", load_stats.malformed},
          {"extracted", extract_stats.extracted},
          {"skipped_assistant_first", extract_stats.skipped_assistant_first},
          {"sampled", chosen.size()}};
}

nlohmann::json stage_classify(StageContext& ctx, StageOutputs& outputs) {
  auto prompts = read_prompts(ctx.out / "prompts.jsonl");
  std::vector<ClassificationRecord> records;
  records.reserve(prompts.size());
  std::size_t unclassified = 0, judge_polite = 0, lexicon_polite = 0;
  for (const auto& prompt : prompts) {
    ClassificationRecord record;
    record.prompt_id = prompt.prompt_id;
    TreatmentLabel judged =
        judge_classify(prompt.text, ctx.judge, ctx.chat(), ctx.cfg.model, ctx.cfg.judge_retries);
    record.judge_value = judged.value;
    record.unclassified = judged.unclassified;
    record.raw_judge_output = judged.raw_judge_output;
    MarkerHits hits = scan_markers(prompt.text, ctx.lexicon);
    record.lexicon_score_value = lexicon_score(prompt.text, ctx.lexicon);
    record.lexicon_value = lexicon_label(record.lexicon_score_value).value;
    record.form = politeness_form(prompt.text, ctx.lexicon);
    record.has_please = hits.has_please;
    record.has_thank_you = hits.has_thank_you;
    if (record.unclassified) ++unclassified;
    if (!record.unclassified && record.judge_value == Treatment::polite) ++judge_polite;
    if (record.lexicon_value == Treatment::polite) ++lexicon_polite;
    records.push_back(std::move(record));
  }
  write_classifications(ctx.out / "classifications.jsonl", records);
  record_output(ctx, outputs, "classifications.jsonl");
  return {{"classified", records.size() - unclassified},
          {"unclassified", unclassified},
          {"judge_polite", judge_polite},
          {"lexicon_polite", lexicon_polite}};
}

nlohmann::json stage_counterfact(StageContext& ctx, StageOutputs& outputs) {
  auto prompts = read_prompts(ctx.out / "prompts.jsonl");
  auto classifications = read_classifications(ctx.out / "classifications.jsonl");
  std::map<std::string, const ClassificationRecord*> by_id;
  for (const auto& c : classifications) by_id[c.prompt_id] = &c;

  std::vector<PromptRecord> usable;
  std::vector<TreatmentLabel> treatments;
  std::size_t skipped_unclassified = 0;
  for (const auto& prompt : prompts) {
    auto it = by_id.find(prompt.prompt_id);
    if (it == by_id.end() || it->second->unclassified) {
      ++skipped_unclassified;
      continue;
    }
    TreatmentLabel label;
    label.method = ClassifyMethod::judge;
    label.value = it->second->judge_value;
    label.form = it->second->form;
    label.score = it->second->lexicon_score_value;
    usable.push_back(prompt);
    treatments.push_back(label);
  }

  CounterfactBatchReport report;
  VerifyOptions verify;
  verify.max_regenerations = ctx.cfg.max_regenerations;
  std::vector<CounterfactualDraft> drafts;
  if (ctx.cfg.verify_flip) {
    drafts = generate_verified_batch(usable, treatments, ctx.rewrite, ctx.judge, ctx.chat(),
                                     ctx.cfg.model, verify, &report);
  } else {
    for (std::size_t i = 0; i < usable.size(); ++i) {
      auto draft =
          generate_counterfactual(usable[i], treatments[i], ctx.rewrite, ctx.chat(), ctx.cfg.model);
      ++report.generated;
      if (draft.failed) {
        ++report.failed;
      } else {
        ++report.unchecked;
      }
      drafts.push_back(std::move(draft));
    }
  }
  write_drafts(ctx.out / "drafts.jsonl", drafts);
  record_output(ctx, outputs, "drafts.jsonl");
  return {{"generated", report.generated},
          {"verified", report.verified},
          {"quarantined", report.quarantined},
          {"unchecked", report.unchecked},
          {"failed", report.failed},
          {"skipped_unclassified", skipped_unclassified}};
}

nlohmann::json stage_filter(StageContext& ctx, StageOutputs& outputs) {
  auto drafts = read_drafts(ctx.out / "drafts.jsonl");
  FilterConfig filter;
  filter.sigma = ctx.cfg.sigma;
  filter.min_prompt_similarity = ctx.cfg.min_prompt_similarity;
  filter.encoding_id = ctx.encoding.id();
  FilterReport report;
  auto pairs = build_pairs(drafts, filter, ctx.encoding, &report, !ctx.cfg.verify_flip);
  if (ctx.cfg.compute_similarity) {
    compute_prompt_similarity(pairs, ctx.embedder(), ctx.cfg.model, &report);
  }
  write_pairs(ctx.out / "pairs.jsonl", pairs);
  record_output(ctx, outputs, "pairs.jsonl");
  emit_text(ctx, outputs, "filter_report.csv", delta_histogram_csv(report));

  double similarity_sum = 0.0;
  std::size_t similarity_n = 0;
  for (const auto& pair : pairs) {
    if (pair.prompt_similarity) {
      similarity_sum += *pair.prompt_similarity;
      ++similarity_n;
    }
  }
  nlohmann::json counts{{"input", report.input},
                        {"retained", report.retained},
                        {"dropped_length", report.dropped_length},
                        {"dropped_flip", report.dropped_flip},
                        {"failed", report.failed},
                        {"similarity_failures", report.similarity_failures}};
  if (similarity_n > 0) {
    counts["mean_prompt_similarity"] =
        format_double(similarity_sum / static_cast<double>(similarity_n));
  }
  return counts;
}

nlohmann::json stage_run(StageContext& ctx, StageOutputs& outputs) {
  auto pairs = read_pairs(ctx.out / "pairs.jsonl");
  FilterConfig filter;
  filter.sigma = ctx.cfg.sigma;
  filter.min_prompt_similarity = ctx.cfg.min_prompt_similarity;
  std::size_t similarity_gated = 0;
  auto retained = select_retained(pairs, filter, &similarity_gated);
  RunOptions options;
  options.concurrency = ctx.cfg.concurrency;
  RunReport report;
  auto records = run_experiment(retained, ctx.cfg.model, ctx.chat(), options, &report);
  write_completions(ctx.out / "completions.jsonl", records);
  record_output(ctx, outputs, "completions.jsonl");
  return {{"pairs_in", report.pairs_in},
          {"pairs_completed", report.pairs_completed},
          {"pairs_failed", report.pairs_failed},
          {"similarity_gated", similarity_gated},
          {"records", records.size()}};
}

nlohmann::json stage_estimate(StageContext& ctx, StageOutputs& outputs) {
  auto completions = read_completions(ctx.out / "completions.jsonl");
  auto pairs = read_pairs(ctx.out / "pairs.jsonl");
  auto classifications = read_classifications(ctx.out / "classifications.jsonl");
  std::map<std::string, ClassificationRecord> by_id;
  for (const auto& c : classifications) by_id[c.prompt_id] = c;

  EstimationDataset dataset =
      build_estimation_dataset(completions, pairs, ctx.lexicon, &by_id);
  DiffInMeansResult diff = diff_in_means(dataset);

  ModelSpec spec;
  spec.robust_se = ctx.cfg.robust_se;
  RegressionResult result = estimate_effect(dataset, spec);

  emit_text(ctx, outputs, "estimate.csv", regression_csv(result));
  std::string md = render_regression_markdown(
      result, "Impact of polite prompts on output length (config " +
                  ctx.cfg.config_hash.substr(0, 12) + ")");
  emit_text(ctx, outputs, "estimate.md", md);
  nlohmann::json diff_json{{"ate", format_double(diff.ate)},
                           {"n_pairs", diff.per_pair.size()},
                           {"config_hash", ctx.cfg.config_hash}};
  emit_text(ctx, outputs, "estimate_diff.json", diff_json.dump(2) + "\n");

  double polite_coef = 0.0;
  for (const auto& c : result.coefficients) {
    if (c.name == "Polite") polite_coef = c.estimate;
  }
  return {{"n_obs", result.n_obs},
          {"ate", format_double(diff.ate)},
          {"polite_coefficient", format_double(polite_coef)},
          {"estimated", 1}};
}

nlohmann::json stage_robustness(StageContext& ctx, StageOutputs& outputs) {
  auto completions = read_completions(ctx.out / "completions.jsonl");
  auto pairs = read_pairs(ctx.out / "pairs.jsonl");
  auto classifications = read_classifications(ctx.out / "classifications.jsonl");
  std::map<std::string, ClassificationRecord> by_id;
  for (const auto& c : classifications) by_id[c.prompt_id] = c;

  nlohmann::json counts = nlohmann::json::object();

  auto run_specs = [&](const std::vector<std::pair<std::string, ModelSpec>>& specs,
                       const EstimationDataset& dataset, const std::string& base_name) {
    std::string csv, md;
    for (const auto& [label, spec] : specs) {
      try {
        RegressionResult result = estimate_effect(dataset, spec);
        csv += "# " + label + "\n" + regression_csv(result);
        md += render_regression_markdown(result, label) + "\n";
      } catch (const Error& ex) {
        csv += "# " + label + "\nerror," + ex.what() + std::string("\n");
        md += "### " + label + "\n\nno data (" + ex.what() + ")\n\n";
      }
    }
    emit_text(ctx, outputs, base_name + ".csv", csv);
    emit_text(ctx, outputs, base_name + ".md", md);
  };

  if (ctx.cfg.robustness_forms) {
    EstimationDataset dataset = build_estimation_dataset(completions, pairs, ctx.lexicon, &by_id);
    std::vector<std::pair<std::string, ModelSpec>> specs;
    ModelSpec s1;
    s1.subset = "form_please_thankyou";
    specs.emplace_back("Politeness type: please and thank you", s1);
    ModelSpec s2;
    s2.subset = "form_please";
    specs.emplace_back("Politeness type: please", s2);
    ModelSpec s3;
    s3.subset = "form_implicit";
    specs.emplace_back("Politeness type: implicit", s3);
    run_specs(specs, dataset, "robustness_forms");
    counts["forms"] = 3;
  }

  if (ctx.cfg.robustness_liwc) {
    EstimationDataset dataset = build_estimation_dataset(completions, pairs, ctx.lexicon, &by_id);
    std::vector<std::pair<std::string, ModelSpec>> specs;
    ModelSpec binary;
    binary.subset = "liwc_aligned";
    specs.emplace_back("Lexicon-aligned subset: polite as binary", binary);
    ModelSpec continuous;
    continuous.subset = "liwc_aligned";
    continuous.treatment = TreatmentSpec::continuous;
    specs.emplace_back("Lexicon-aligned subset: polite as continuous", continuous);
    run_specs(specs, dataset, "robustness_liwc");

    // alignment rate between judge and lexicon labels over classified prompts
    std::vector<TreatmentLabel> judge_labels, lexicon_labels;
    for (const auto& c : classifications) {
      if (c.unclassified) continue;
      TreatmentLabel j;
      j.value = c.judge_value;
      judge_labels.push_back(j);
      TreatmentLabel l;
      l.value = c.lexicon_value;
      lexicon_labels.push_back(l);
    }
    double rate = alignment_rate(judge_labels, lexicon_labels);
    counts["alignment_rate"] = format_double(rate);
  }

  std::map<std::string, int> task_by_pair;
  std::vector<std::string> task_names;
  if (ctx.cfg.robustness_tasks) {
    auto categories = ctx.cfg.task_categories_file
                          ? load_task_categories(*ctx.cfg.task_categories_file)
                          : default_task_categories();
    embed_categories(categories, ctx.embedder(), ctx.cfg.model);
    for (const auto& cat : categories) task_names.push_back(cat.name);
    std::size_t unclassified_tasks = 0;
    for (const auto& pair : pairs) {
      if (pair.status != PairStatus::retained) continue;
      TaskAssignment assignment =
          classify_task(pair.original.text, categories, ctx.embedder(), ctx.cfg.model);
      if (assignment.index < 0) ++unclassified_tasks;
      task_by_pair[pair.pair_id] = assignment.index;
    }
    EstimationDataset dataset = build_estimation_dataset(completions, pairs, ctx.lexicon, &by_id,
                                                         &task_by_pair, task_names);
    std::vector<std::pair<std::string, ModelSpec>> specs;
    ModelSpec controls;
    controls.task_dummies = true;
    specs.emplace_back("Prompt task controls", controls);
    ModelSpec interactions;
    interactions.task_dummies = true;
    interactions.interactions = true;
    specs.emplace_back("Prompt task controls with interactions", interactions);
    run_specs(specs, dataset, "robustness_tasks");
    counts["task_unclassified"] = unclassified_tasks;
  }

  OutputSimilarityReport similarity;
  NgramDiffReport ngrams;
  bool have_similarity = false, have_ngrams = false;
  if (ctx.cfg.robustness_similarity || ctx.cfg.robustness_ngrams) {
    std::map<std::string, OutputPairText> grouped;
    for (const auto& record : completions) {
      auto& slot = grouped[record.pair_id];
      slot.pair_id = record.pair_id;
      if (record.arm == Arm::control_nonpolite) {
        slot.control_text = record.output_text;
      } else {
        slot.treated_text = record.output_text;
      }
    }
    std::vector<OutputPairText> output_pairs;
    output_pairs.reserve(grouped.size());
    for (auto& [id, slot] : grouped) output_pairs.push_back(std::move(slot));

    if (ctx.cfg.robustness_similarity) {
      similarity = output_similarity(output_pairs, ctx.embedder(), ctx.cfg.model);
      emit_text(ctx, outputs, "output_similarity.csv", similarity_report_csv(similarity));
      counts["output_similarity_mean"] = format_double(similarity.mean);
      have_similarity = true;
    }
    if (ctx.cfg.robustness_ngrams) {
      auto stopwords = ctx.cfg.stopwords_file
                           ? load_stopwords(*ctx.cfg.stopwords_file)
                           : std::unordered_set<std::string>{"a", "an",  "the", "and", "or",
                                                             "of", "to", "in",  "is",  "are"};
      std::string version =
          ctx.cfg.stopwords_file ? ctx.cfg.stopwords_file->filename().string() : "builtin_v1";
      ngrams = removed_ngram_analysis(output_pairs, 1, 4, stopwords, version);
      emit_text(ctx, outputs, "removed_ngrams.csv", ngram_report_csv(ngrams));
      counts["removed_phrases"] = ngrams.with_stopwords.size();
      have_ngrams = true;
    }
  }
  emit_text(ctx, outputs, "diagnostics.md",
            render_diagnostics_markdown(have_similarity ? &similarity : nullptr,
                                        have_ngrams ? &ngrams : nullptr));

  if (ctx.cfg.ratings_file) {
    RatingsData ratings = read_ratings_csv(*ctx.cfg.ratings_file);
    AnovaResult anova = anova_two_way(ratings.ratings, ratings.factor_a, ratings.factor_b,
                                      "Politeness", "Origin");
    emit_text(ctx, outputs, "anova.csv", anova_csv(anova));
    emit_text(ctx, outputs, "anova.md",
              render_anova_markdown(anova, "Two-way ANOVA on quality ratings"));
    counts["anova_effects"] = anova.effects.size();
  }
  return counts;
}

nlohmann::json stage_cost(StageContext& ctx, StageOutputs& outputs) {
  nlohmann::json diff_json =
      nlohmann::json::parse(read_file(ctx.out / "estimate_diff.json"));
  double ate = std::stod(diff_json.at("ate").get<std::string>());
  // the ATE heads into exact decimal arithmetic at a documented 6-dp grain
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", ate);
  Decimal delta = Decimal::parse(buf);

  PriceSchedule schedule;
  schedule.output_price_per_million = Decimal::parse(ctx.cfg.output_price_per_million);
  schedule.input_price_per_million = Decimal::parse(ctx.cfg.input_price_per_million);
  CostProjection proj = project_cost(delta, schedule, ctx.cfg.daily_queries, ctx.cfg.month_days);

  emit_text(ctx, outputs, "cost.csv", proj.to_csv());
  emit_text(ctx, outputs, "cost.json", proj.to_json().dump(2) + "\n");
  emit_text(ctx, outputs, "cost.md",
            render_cost_markdown(proj, "Cost projection of the measured token delta"));
  return {{"delta_tokens", delta.to_string()},
          {"extra_per_day", proj.extra_per_day.to_string()},
          {"extra_per_month", proj.extra_per_month.to_string()}};
}

using StageFn = std::function<nlohmann::json(StageContext&, StageOutputs&)>;

StageFn stage_fn(const std::string& name) {
  if (name == "ingest") return stage_ingest;
  if (name == "classify") return stage_classify;
  if (name == "counterfact") return stage_counterfact;
  if (name == "filter") return stage_filter;
  if (name == "run") return stage_run;
  if (name == "estimate") return stage_estimate;
  if (name == "robustness") return stage_robustness;
  if (name == "cost") return stage_cost;
  throw Error("pipeline: unknown stage '" + name + "'");
}

bool outputs_intact(const std::filesystem::path& out, const StageRecord& stage) {
  for (const auto& [rel, digest] : stage.outputs) {
    std::filesystem::path path = out / rel;
    if (!std::filesystem::exists(path)) return false;
    if (sha256_file(path) != digest) return false;
  }
  return true;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::optional<std::string>& until) {
  if (until && std::find(kStageOrder.begin(), kStageOrder.end(), *until) == kStageOrder.end()) {
    throw ConfigError("pipeline: unknown stage '" + *until + "'");
  }
  std::filesystem::create_directories(config.output_dir);
  PipelineLock lock(config.output_dir);

  std::filesystem::path manifest_path = config.output_dir / "manifest.json";
  RunManifest manifest;
  manifest.config_hash = config.config_hash;
  manifest.deterministic = config.deterministic;
  if (std::filesystem::exists(manifest_path)) {
    nlohmann::json parsed = nlohmann::json::parse(read_file(manifest_path), nullptr, false);
    if (!parsed.is_discarded()) {
      RunManifest previous = RunManifest::from_json(parsed);
      if (previous.config_hash == config.config_hash) manifest = std::move(previous);
    }
  }
  for (const auto& name : kStageOrder) {
    if (!manifest.find(name)) {
      StageRecord stage;
      stage.name = name;
      manifest.stages.push_back(std::move(stage));
    }
  }

  auto persist = [&] { atomic_write_file(manifest_path, manifest.to_json().dump(2) + "\n"); };

  StageContext ctx(config);
  for (std::size_t index = 0; index < kStageOrder.size(); ++index) {
    const std::string& name = kStageOrder[index];
    StageRecord* stage = nullptr;
    for (auto& s : manifest.stages) {
      if (s.name == name) stage = &s;
    }

    // tamper check: no stage consumes an artifact whose digest drifted
    for (std::size_t prior = 0; prior < index; ++prior) {
      const StageRecord* done = manifest.find(kStageOrder[prior]);
      if (done && done->status == "complete") {
        for (const auto& [rel, digest] : done->outputs) {
          std::filesystem::path path = config.output_dir / rel;
          if (!std::filesystem::exists(path) || sha256_file(path) != digest) {
            throw Error("pipeline: artifact '" + rel +
                        "' does not match the manifest digest; refusing to run stage '" + name +
                        "'");
          }
        }
      }
    }

    if (stage->status == "complete" && outputs_intact(config.output_dir, *stage)) {
      if (until && *until == name) break;
      continue;  // resumable: already done with intact outputs
    }

    stage->status = "pending";
    stage->outputs.clear();
    stage->counts = nlohmann::json::object();
    stage->started_ms = stamp_ms(config.deterministic);
    try {
      StageOutputs outputs;
      stage->counts = stage_fn(name)(ctx, outputs);
      stage->outputs = std::move(outputs);
      stage->status = "complete";
      stage->finished_ms = stamp_ms(config.deterministic);
      persist();
    } catch (...) {
      stage->status = "failed";
      stage->finished_ms = stamp_ms(config.deterministic);
      persist();
      throw;
    }
    if (until && *until == name) break;
  }

  PipelineResult result;
  result.manifest = std::move(manifest);
  result.manifest_path = manifest_path;
  result.provider_network_calls = ctx.provider.caching->network_calls();
  result.provider_cache_hits = ctx.provider.caching->cache_hits();
  return result;
}

EstimationDataset build_estimation_dataset(
    std::span<const CompletionRecord> completions, std::span<const PromptPair> pairs,
    const PolitenessLexicon& lexicon,
    const std::map<std::string, ClassificationRecord>* classifications,
    const std::map<std::string, int>* task_by_pair, std::vector<std::string> task_names) {
  std::map<std::string, const PromptPair*> pair_by_id;
  for (const auto& pair : pairs) pair_by_id[pair.pair_id] = &pair;

  EstimationDataset dataset;
  dataset.task_names = std::move(task_names);
  dataset.rows.reserve(completions.size());
  for (const auto& record : completions) {
    EstimationRow row;
    row.pair_id = record.pair_id;
    row.output_tokens = record.output_tokens;
    row.polite = record.arm == Arm::treated_polite ? 1 : 0;
    row.input_tokens = record.input_tokens;
    row.liwc_score = lexicon_score(record.prompt_text, lexicon);

    auto pit = pair_by_id.find(record.pair_id);
    if (pit != pair_by_id.end()) {
      const PromptPair& pair = *pit->second;
      bool original_is_polite = pair.treatment_of_original.value == Treatment::polite;
      const std::string& polite_text =
          original_is_polite ? pair.original.text : pair.counterfactual_text;
      MarkerHits hits = scan_markers(polite_text, lexicon);
      row.has_please = hits.has_please;
      row.has_thank_you = hits.has_thank_you;
      row.form = politeness_form(polite_text, lexicon);
      if (classifications) {
        auto cit = classifications->find(record.pair_id);
        if (cit != classifications->end() && !cit->second.unclassified) {
          row.liwc_aligned = cit->second.judge_value == cit->second.lexicon_value;
        }
      }
    }
    if (task_by_pair) {
      auto tit = task_by_pair->find(record.pair_id);
      row.task = tit == task_by_pair->end() ? -1 : tit->second;
    }
    dataset.rows.push_back(std::move(row));
  }
  return dataset;
}

RatingsData read_ratings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("ratings: cannot open " + path.string());
  RatingsData data;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream row(line);
    std::string rating, a, b;
    if (!std::getline(row, rating, ',') || !std::getline(row, a, ',') ||
        !std::getline(row, b, ',')) {
      throw Error("ratings: malformed line '" + line + "'");
    }
    data.ratings.push_back(std::stod(rating));
    data.factor_a.push_back(std::stoi(a));
    data.factor_b.push_back(std::stoi(b));
  }
  return data;
}

}  // namespace tonecost
