#include "tonecost/config.hpp"

#include "tonecost/digest.hpp"
#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"
#include "tonecost/pairfilter.hpp"

namespace tonecost {

namespace {

const nlohmann::json& section(const nlohmann::json& raw, const char* name,
                              const nlohmann::json& fallback) {
  if (!raw.contains(name)) return fallback;
  if (!raw[name].is_object()) {
    throw ConfigError(std::string("config: section '") + name + "' must be an object");
  }
  return raw[name];
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
  }
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  nlohmann::json raw = nlohmann::json::parse(read_file(path), nullptr, false);
  if (raw.is_discarded() || !raw.is_object()) {
    throw ConfigError("config: " + path.string() + " is not a JSON object");
  }
  return from_json(raw, path.has_parent_path() ? path.parent_path() : ".");
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& raw,
                                         const std::filesystem::path& config_dir) {
  PipelineConfig cfg;
  cfg.config_dir = config_dir;

  static const nlohmann::json empty = nlohmann::json::object();

  cfg.output_dir = resolve(config_dir, get_or<std::string>(raw, "output_dir", "out"));
  cfg.deterministic = get_or<bool>(raw, "deterministic", true);

  const auto& corpus = section(raw, "corpus", empty);
  if (corpus.contains("path")) {
    cfg.corpus_path = resolve(config_dir, corpus["path"].get<std::string>());
  }
  const auto& mapping = section(corpus, "mapping", empty);
  cfg.mapping.conversation_id =
      get_or<std::string>(mapping, "conversation_id", cfg.mapping.conversation_id);
  cfg.mapping.language = get_or<std::string>(mapping, "language", cfg.mapping.language);
  cfg.mapping.turns = get_or<std::string>(mapping, "turns", cfg.mapping.turns);
  cfg.mapping.role = get_or<std::string>(mapping, "role", cfg.mapping.role);
  cfg.mapping.content = get_or<std::string>(mapping, "content", cfg.mapping.content);
  cfg.mapping.model_tag = get_or<std::string>(mapping, "model_tag", cfg.mapping.model_tag);
  cfg.sample_n = get_or<std::size_t>(corpus, "sample_n", 0);
  cfg.seed = get_or<std::uint64_t>(corpus, "seed", 42);
  if (corpus.contains("language") && !corpus["language"].is_null()) {
    cfg.language = corpus["language"].get<std::string>();
  }

  const auto& tokenizer = section(raw, "tokenizer", empty);
  if (tokenizer.contains("encoding_file")) {
    cfg.encoding_file = resolve(config_dir, tokenizer["encoding_file"].get<std::string>());
  }
  cfg.encoding_id = get_or<std::string>(tokenizer, "encoding_id", cfg.encoding_id);

  const auto& classify = section(raw, "classify", empty);
  if (classify.contains("lexicon_file")) {
    cfg.lexicon_file = resolve(config_dir, classify["lexicon_file"].get<std::string>());
  }
  if (classify.contains("judge_template_file")) {
    cfg.judge_template_file =
        resolve(config_dir, classify["judge_template_file"].get<std::string>());
  }
  cfg.judge_retries = get_or<int>(classify, "judge_retries", 2);

  const auto& counterfactual = section(raw, "counterfactual", empty);
  if (counterfactual.contains("rewrite_template_file")) {
    cfg.rewrite_template_file =
        resolve(config_dir, counterfactual["rewrite_template_file"].get<std::string>());
  }
  cfg.verify_flip = get_or<bool>(counterfactual, "verify_flip", true);
  cfg.max_regenerations = get_or<int>(counterfactual, "max_regenerations", 2);

  const auto& filter = section(raw, "filter", empty);
  if (filter.contains("sigma") && !filter["sigma"].is_null()) {
    if (filter["sigma"].is_string()) {
      if (filter["sigma"].get<std::string>() != "inf") {
        throw ConfigError("config: filter.sigma must be an integer or \"inf\"");
      }
      cfg.sigma = FilterConfig::sigma_unbounded();
    } else {
      cfg.sigma = filter["sigma"].get<int>();
      if (cfg.sigma < 0) throw ConfigError("config: filter.sigma must be non-negative");
    }
  }
  if (filter.contains("min_prompt_similarity") && !filter["min_prompt_similarity"].is_null()) {
    cfg.min_prompt_similarity = filter["min_prompt_similarity"].get<double>();
  }
  cfg.compute_similarity = get_or<bool>(filter, "compute_similarity", true);

  const auto& provider = section(raw, "provider", empty);
  cfg.provider_kind = get_or<std::string>(provider, "kind", "mock");
  if (cfg.provider_kind != "mock" && cfg.provider_kind != "http") {
    throw ConfigError("config: provider.kind must be 'mock' or 'http'");
  }
  cfg.model.model_name = get_or<std::string>(provider, "model_name", "mock-chat");
  cfg.model.temperature = get_or<double>(provider, "temperature", 0.0);
  if (cfg.model.temperature < 0) throw ConfigError("config: temperature must be >= 0");
  if (provider.contains("top_p") && !provider["top_p"].is_null()) {
    cfg.model.top_p = provider["top_p"].get<double>();
  }
  if (provider.contains("max_output_tokens") && !provider["max_output_tokens"].is_null()) {
    cfg.model.max_output_tokens = provider["max_output_tokens"].get<int>();
  }
  cfg.model.base_url = get_or<std::string>(provider, "base_url", cfg.model.base_url);
  cfg.model.timeout = std::chrono::milliseconds(get_or<long>(provider, "timeout_ms", 30000));
  cfg.model.retry.max_attempts = get_or<int>(provider, "max_attempts", 3);
  if (cfg.model.retry.max_attempts < 1) {
    throw ConfigError("config: provider.max_attempts must be >= 1");
  }
  cfg.cache_dir = resolve(cfg.output_dir, get_or<std::string>(provider, "cache_dir", "cache"));

  const auto& mock = section(provider, "mock", empty);
  cfg.mock.seed = get_or<std::uint64_t>(mock, "seed", cfg.mock.seed);
  cfg.mock.base_tokens = get_or<double>(mock, "base_tokens", cfg.mock.base_tokens);
  cfg.mock.tokens_per_word = get_or<double>(mock, "tokens_per_word", cfg.mock.tokens_per_word);
  cfg.mock.jitter_range = get_or<int>(mock, "jitter_range", cfg.mock.jitter_range);
  cfg.mock.polite_delta = get_or<double>(mock, "polite_delta", cfg.mock.polite_delta);
  cfg.mock.nonpolite_delta = get_or<double>(mock, "nonpolite_delta", cfg.mock.nonpolite_delta);
  cfg.mock.noise_sd = get_or<double>(mock, "noise_sd", cfg.mock.noise_sd);
  cfg.mock.embedding_dim = get_or<int>(mock, "embedding_dim", cfg.mock.embedding_dim);

  const auto& runner = section(raw, "runner", empty);
  cfg.concurrency = get_or<int>(runner, "concurrency", 4);
  if (cfg.concurrency < 1) throw ConfigError("config: runner.concurrency must be >= 1");

  const auto& estimate = section(raw, "estimate", empty);
  cfg.robust_se = get_or<bool>(estimate, "robust_se", false);

  const auto& robustness = section(raw, "robustness", empty);
  cfg.robustness_forms = get_or<bool>(robustness, "forms", true);
  cfg.robustness_liwc = get_or<bool>(robustness, "liwc", true);
  cfg.robustness_tasks = get_or<bool>(robustness, "tasks", true);
  cfg.robustness_similarity = get_or<bool>(robustness, "similarity", true);
  cfg.robustness_ngrams = get_or<bool>(robustness, "ngrams", true);
  if (robustness.contains("ratings_file") && !robustness["ratings_file"].is_null()) {
    cfg.ratings_file = resolve(config_dir, robustness["ratings_file"].get<std::string>());
  }
  if (robustness.contains("task_categories_file") &&
      !robustness["task_categories_file"].is_null()) {
    cfg.task_categories_file =
        resolve(config_dir, robustness["task_categories_file"].get<std::string>());
  }
  if (robustness.contains("stopwords_file") && !robustness["stopwords_file"].is_null()) {
    cfg.stopwords_file = resolve(config_dir, robustness["stopwords_file"].get<std::string>());
  }

  const auto& cost = section(raw, "cost", empty);
  if (cost.contains("output_price_per_million")) {
    const auto& v = cost["output_price_per_million"];
    cfg.output_price_per_million = v.is_string() ? v.get<std::string>() : v.dump();
  }
  if (cost.contains("input_price_per_million")) {
    const auto& v = cost["input_price_per_million"];
    cfg.input_price_per_million = v.is_string() ? v.get<std::string>() : v.dump();
  }
  cfg.daily_queries = get_or<std::int64_t>(cost, "daily_queries", cfg.daily_queries);
  if (cfg.daily_queries < 0) throw ConfigError("config: cost.daily_queries must be >= 0");
  cfg.month_days = get_or<int>(cost, "month_days", 30);

  // canonical form: the raw object with defaults materialized where it matters
  cfg.canonical = raw;
  cfg.config_hash = sha256_hex(cfg.canonical.dump());
  return cfg;
}

}  // namespace tonecost
