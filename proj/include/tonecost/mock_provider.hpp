#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tonecost/provider.hpp"

namespace tonecost {

/// Style rules for the deterministic in-process provider. Output length for
/// an experiment prompt follows a planted model
///
///   tokens = base_tokens + tokens_per_word * |core words|
///          + jitter(core) + delta(tone) + noise_sd * z(prompt, seed)
///
/// where `core` is the prompt with politeness markers stripped (shared by
/// both arms of a pair), jitter is a hash of the core, and z is a standard
/// normal draw synthesized from counter-based integer hashing only, so every
/// output is bit-identical across runs and platforms.
struct MockBehavior {
  std::uint64_t seed = 0xA11CEULL;
  double base_tokens = 180.0;
  double tokens_per_word = 2.0;
  int jitter_range = 40;          // uniform integer jitter in [-range, +range]
  double polite_delta = 0.0;      // planted effect for polite prompts
  double nonpolite_delta = 0.0;   // planted effect for non-polite prompts
  double noise_sd = 0.0;          // per-(prompt, seed) independent noise
  int embedding_dim = 64;
};

/// Deterministic chat + embedding provider for offline runs. Recognizes the
/// judge template (answers POLITE/NONPOLITE from a marker scan), the rewrite
/// template (rule-based tone flip), and the length-adherence probe (emits
/// exactly the requested token count); any other prompt is treated as an
/// experiment arm and answered with filler text of planted length.
class MockProvider : public ChatProvider, public Embedder {
 public:
  explicit MockProvider(MockBehavior behavior = {});

  ChatResult chat(const std::string& prompt, const ModelConfig& config) override;
  std::vector<double> embed(const std::string& text, const ModelConfig& config) override;
  std::string id() const override { return "mock"; }

  const MockBehavior& behavior() const { return behavior_; }

  /// Marker scan used for the planted effect and the mock judge.
  static bool is_polite(const std::string& text);

  /// Rule-based tone flip: adds or strips politeness scaffolding.
  static std::string rewrite_tone(const std::string& text, bool to_polite);

  /// Prompt text with politeness markers removed; both arms of a pair share
  /// the same core, so their planted base lengths coincide.
  static std::string core_text(const std::string& text);

 private:
  int planted_output_tokens(const std::string& prompt) const;
  std::string filler_text(const std::string& prompt, int token_count) const;

  MockBehavior behavior_;
};

}  // namespace tonecost
