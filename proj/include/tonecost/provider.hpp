#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tonecost {

class EncodingTable;

struct RetryPolicy {
  int max_attempts = 3;  // >= 1
  std::chrono::milliseconds initial_backoff{250};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
};

struct ModelConfig {
  std::string model_name = "mock-chat";
  double temperature = 0.0;
  std::optional<double> top_p;           // unset: provider default
  std::optional<int> max_output_tokens;  // unset: the model governs length
  std::string base_url = "http://127.0.0.1:8080";
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
  std::string api_key_env = "TONECOST_API_KEY";  // credentials only via env

  nlohmann::json to_json() const;
  /// sha256 of the canonical JSON; stamped onto every result for audit.
  std::string hash() const;
};

enum class UsageSource { provider_reported, local_count };

struct ChatResult {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  UsageSource usage_source = UsageSource::provider_reported;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
  std::string config_hash;
  std::string provider_id;
  std::int64_t timestamp_ms = 0;

  bool flagged_empty() const { return text.empty(); }

  nlohmann::json to_json() const;
  static ChatResult from_json(const nlohmann::json& obj);
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResult chat(const std::string& prompt, const ModelConfig& config) = 0;
  virtual std::string id() const = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::string& text, const ModelConfig& config) = 0;
  virtual std::string id() const = 0;
};

/// JSON-over-HTTP chat-completions client: POST {base_url}/chat/completions
/// with {model, messages, temperature, top_p?, max_tokens?}, response read at
/// choices[0].message.content and usage.{prompt_tokens, completion_tokens}.
/// Embeddings: POST {base_url}/embeddings, vector at data[0].embedding.
/// Retries on connect errors, 408/409/429 and 5xx with exponential backoff,
/// honoring Retry-After; throws ProviderExhausted once the budget is spent.
class HttpChatClient : public ChatProvider, public Embedder {
 public:
  /// `local_encoder` backs completion-token counting when the provider omits
  /// usage metadata; such results are flagged UsageSource::local_count.
  explicit HttpChatClient(const EncodingTable* local_encoder = nullptr);

  ChatResult chat(const std::string& prompt, const ModelConfig& config) override;
  std::vector<double> embed(const std::string& text, const ModelConfig& config) override;
  std::string id() const override { return "http"; }

 private:
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body,
                           const ModelConfig& config, int* attempts_out);
  const EncodingTable* local_encoder_;
};

/// Content-addressed request/response cache: one JSON file per request hash.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<nlohmann::json> get(const std::string& request_hash) const;
  void put(const std::string& request_hash, const nlohmann::json& entry);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

/// Wraps a provider with the cache: a replayed request returns the cached
/// result and performs no network call, which is what makes runs resumable
/// and retries side-effect free.
class CachingChatProvider : public ChatProvider, public Embedder {
 public:
  CachingChatProvider(ChatProvider& chat, Embedder& embedder, ResponseCache& cache);

  ChatResult chat(const std::string& prompt, const ModelConfig& config) override;
  std::vector<double> embed(const std::string& text, const ModelConfig& config) override;
  std::string id() const override;

  std::size_t network_calls() const { return network_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

  static std::string request_hash(const std::string& op, const std::string& prompt,
                                  const ModelConfig& config);

 private:
  ChatProvider& chat_;
  Embedder& embedder_;
  ResponseCache& cache_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace tonecost
