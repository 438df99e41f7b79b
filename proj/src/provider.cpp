#include "tonecost/provider.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "tonecost/digest.hpp"
#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"
#include "tonecost/tokencount.hpp"

namespace tonecost {

namespace {

bool retryable_status(int status) {
  return status == 408 || status == 409 || status == 429 || status >= 500;
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& retry, int attempt,
                                        const httplib::Response* response) {
  if (response && response->has_header("Retry-After")) {
    char* end = nullptr;
    double seconds = std::strtod(response->get_header_value("Retry-After").c_str(), &end);
    if (end && *end == '\0' && seconds >= 0) {
      auto ms = std::chrono::milliseconds(static_cast<long>(seconds * 1000.0));
      return std::min(ms, retry.max_backoff);
    }
  }
  double factor = 1.0;
  for (int i = 0; i < attempt; ++i) factor *= retry.backoff_multiplier;
  auto ms = std::chrono::milliseconds(
      static_cast<long>(static_cast<double>(retry.initial_backoff.count()) * factor));
  return std::min(ms, retry.max_backoff);
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json obj{{"model_name", model_name},
                     {"temperature", temperature},
                     {"base_url", base_url},
                     {"timeout_ms", timeout.count()},
                     {"max_attempts", retry.max_attempts}};
  if (top_p) obj["top_p"] = *top_p;
  if (max_output_tokens) obj["max_output_tokens"] = *max_output_tokens;
  return obj;
}

std::string ModelConfig::hash() const { return sha256_hex(to_json().dump()); }

nlohmann::json ChatResult::to_json() const {
  return {{"text", text},
          {"prompt_tokens", prompt_tokens},
          {"completion_tokens", completion_tokens},
          {"usage_source", usage_source == UsageSource::provider_reported ? "provider_reported"
                                                                          : "local_count"},
          {"latency_ms", latency.count()},
          {"attempt_count", attempt_count},
          {"config_hash", config_hash},
          {"provider_id", provider_id},
          {"timestamp_ms", timestamp_ms}};
}

ChatResult ChatResult::from_json(const nlohmann::json& obj) {
  ChatResult result;
  result.text = obj.at("text").get<std::string>();
  result.prompt_tokens = obj.at("prompt_tokens").get<int>();
  result.completion_tokens = obj.at("completion_tokens").get<int>();
  result.usage_source = obj.value("usage_source", "provider_reported") == "local_count"
                            ? UsageSource::local_count
                            : UsageSource::provider_reported;
  result.latency = std::chrono::milliseconds(obj.value("latency_ms", 0));
  result.attempt_count = obj.value("attempt_count", 1);
  result.config_hash = obj.value("config_hash", std::string());
  result.provider_id = obj.value("provider_id", std::string());
  result.timestamp_ms = obj.value("timestamp_ms", std::int64_t{0});
  return result;
}

HttpChatClient::HttpChatClient(const EncodingTable* local_encoder)
    : local_encoder_(local_encoder) {}

nlohmann::json HttpChatClient::post_json(const std::string& path, const nlohmann::json& body,
                                         const ModelConfig& config, int* attempts_out) {
  if (config.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt < config.retry.max_attempts; ++attempt) {
    if (attempts_out) *attempts_out = attempt + 1;
    httplib::Client client(config.base_url);
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    client.set_connection_timeout(seconds.count(), 0);
    client.set_read_timeout(seconds.count(), 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto response = client.Post(path, headers, payload, "application/json");
    if (!response) {
      last_error = "connection failed: " + httplib::to_string(response.error());
    } else if (response->status >= 200 && response->status < 300) {
      nlohmann::json parsed = nlohmann::json::parse(response->body, nullptr, false);
      if (parsed.is_discarded()) {
        throw ProviderError("provider returned unparseable JSON from " + path);
      }
      return parsed;
    } else if (!retryable_status(response->status)) {
      throw ProviderError("provider returned HTTP " + std::to_string(response->status) +
                          " for " + path + ": " + response->body.substr(0, 200));
    } else {
      last_error = "HTTP " + std::to_string(response->status);
    }
    if (attempt + 1 < config.retry.max_attempts) {
      std::this_thread::sleep_for(
          backoff_delay(config.retry, attempt, response ? &*response : nullptr));
    }
  }
  throw ProviderExhausted("provider retries exhausted for " + path + " (" + last_error + ")");
}

ChatResult HttpChatClient::chat(const std::string& prompt, const ModelConfig& config) {
  nlohmann::json body{{"model", config.model_name},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                      {"temperature", config.temperature}};
  if (config.top_p) body["top_p"] = *config.top_p;
  if (config.max_output_tokens) body["max_tokens"] = *config.max_output_tokens;

  auto start = std::chrono::steady_clock::now();
  int attempts = 1;
  nlohmann::json response = post_json("/chat/completions", body, config, &attempts);

  ChatResult result;
  result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  result.attempt_count = attempts;
  result.config_hash = config.hash();
  result.provider_id = id() + ":" + config.model_name;
  result.timestamp_ms = now_ms();
  try {
    result.text = response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw ProviderError(std::string("malformed chat response: ") + ex.what());
  }
  if (response.contains("usage") && response["usage"].is_object() &&
      response["usage"].contains("completion_tokens")) {
    result.prompt_tokens = response["usage"].value("prompt_tokens", 0);
    result.completion_tokens = response["usage"].value("completion_tokens", 0);
    result.usage_source = UsageSource::provider_reported;
  } else if (local_encoder_) {
    result.prompt_tokens = local_encoder_->count_tokens(prompt);
    result.completion_tokens = local_encoder_->count_tokens(result.text);
    result.usage_source = UsageSource::local_count;
  } else {
    throw ProviderError("provider omitted usage metadata and no local encoder is configured");
  }
  return result;
}

std::vector<double> HttpChatClient::embed(const std::string& text, const ModelConfig& config) {
  if (text.empty()) throw Error("embed: text must be non-empty");
  nlohmann::json body{{"model", config.model_name}, {"input", text}};
  nlohmann::json response = post_json("/embeddings", body, config, nullptr);
  try {
    return response.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& ex) {
    throw ProviderError(std::string("malformed embedding response: ") + ex.what());
  }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<nlohmann::json> ResponseCache::get(const std::string& request_hash) const {
  std::filesystem::path path = dir_ / (request_hash + ".json");
  std::lock_guard<std::mutex> lock(mutex_);
  if (!std::filesystem::exists(path)) return std::nullopt;
  nlohmann::json entry = nlohmann::json::parse(read_file(path), nullptr, false);
  if (entry.is_discarded()) return std::nullopt;  // corrupt entry == miss
  return entry;
}

void ResponseCache::put(const std::string& request_hash, const nlohmann::json& entry) {
  std::lock_guard<std::mutex> lock(mutex_);
  atomic_write_file(dir_ / (request_hash + ".json"), entry.dump(2));
}

CachingChatProvider::CachingChatProvider(ChatProvider& chat, Embedder& embedder,
                                         ResponseCache& cache)
    : chat_(chat), embedder_(embedder), cache_(cache) {}

std::string CachingChatProvider::id() const { return chat_.id() + "+cache"; }

std::string CachingChatProvider::request_hash(const std::string& op, const std::string& prompt,
                                              const ModelConfig& config) {
  nlohmann::json request{{"op", op},
                         {"model", config.model_name},
                         {"temperature", config.temperature},
                         {"prompt", prompt}};
  if (config.top_p) request["top_p"] = *config.top_p;
  if (config.max_output_tokens) request["max_tokens"] = *config.max_output_tokens;
  return sha256_hex(request.dump());
}

ChatResult CachingChatProvider::chat(const std::string& prompt, const ModelConfig& config) {
  std::string key = request_hash("chat", prompt, config);
  if (auto entry = cache_.get(key)) {
    ++cache_hits_;
    return ChatResult::from_json(entry->at("response"));
  }
  ChatResult result = chat_.chat(prompt, config);
  ++network_calls_;
  cache_.put(key, {{"op", "chat"},
                   {"prompt", prompt},
                   {"config", config.to_json()},
                   {"response", result.to_json()}});
  return result;
}

std::vector<double> CachingChatProvider::embed(const std::string& text,
                                               const ModelConfig& config) {
  std::string key = request_hash("embed", text, config);
  if (auto entry = cache_.get(key)) {
    ++cache_hits_;
    return entry->at("response").get<std::vector<double>>();
  }
  std::vector<double> vec = embedder_.embed(text, config);
  ++network_calls_;
  cache_.put(key, {{"op", "embed"},
                   {"prompt", text},
                   {"config", config.to_json()},
                   {"response", vec}});
  return vec;
}

}  // namespace tonecost
