#include "tonecost/runner.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include "tonecost/error.hpp"
#include "tonecost/jsonl.hpp"

namespace tonecost {

const char* to_string(Arm arm) {
  return arm == Arm::treated_polite ? "treated_polite" : "control_nonpolite";
}

namespace {

struct PairOutcome {
  CompletionRecord treated;
  CompletionRecord control;
  bool ok = false;
};

CompletionRecord make_record(const std::string& pair_id, Arm arm, const std::string& prompt,
                             const ChatResult& result) {
  CompletionRecord record;
  record.pair_id = pair_id;
  record.arm = arm;
  record.prompt_text = prompt;
  record.input_tokens = result.prompt_tokens;
  record.output_tokens = result.completion_tokens;
  record.output_text = result.text;
  record.config_hash = result.config_hash;
  record.usage_source = result.usage_source;
  record.status = result.flagged_empty() ? "empty_output" : "ok";
  return record;
}

}  // namespace

std::vector<CompletionRecord> run_experiment(std::span<const PromptPair> pairs,
                                             const ModelConfig& config, ChatProvider& provider,
                                             const RunOptions& options, RunReport* report) {
  RunReport local;
  std::vector<const PromptPair*> retained;
  for (const auto& pair : pairs) {
    if (pair.status == PairStatus::retained) retained.push_back(&pair);
  }
  local.pairs_in = retained.size();

  std::vector<PairOutcome> outcomes(retained.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};

  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= retained.size()) return;
      const PromptPair& pair = *retained[i];
      // the polite member is the treated arm whichever side it came from
      bool original_is_polite = pair.treatment_of_original.value == Treatment::polite;
      const std::string& polite_text =
          original_is_polite ? pair.original.text : pair.counterfactual_text;
      const std::string& nonpolite_text =
          original_is_polite ? pair.counterfactual_text : pair.original.text;
      try {
        // both arms submitted back to back in the same scheduling window
        ChatResult treated = provider.chat(polite_text, config);
        ChatResult control = provider.chat(nonpolite_text, config);
        outcomes[i].treated =
            make_record(pair.pair_id, Arm::treated_polite, polite_text, treated);
        outcomes[i].control =
            make_record(pair.pair_id, Arm::control_nonpolite, nonpolite_text, control);
        outcomes[i].ok = true;
      } catch (const ProviderError&) {
        outcomes[i].ok = false;  // both-or-neither: the whole pair is out
        failed.fetch_add(1);
      }
    }
  };

  int threads = std::max(1, options.concurrency);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<CompletionRecord> records;
  records.reserve(retained.size() * 2);
  for (auto& outcome : outcomes) {
    if (!outcome.ok) continue;
    records.push_back(std::move(outcome.control));
    records.push_back(std::move(outcome.treated));
    ++local.pairs_completed;
  }
  local.pairs_failed = failed.load();
  std::sort(records.begin(), records.end(), [](const CompletionRecord& a, const CompletionRecord& b) {
    if (a.pair_id != b.pair_id) return a.pair_id < b.pair_id;
    return static_cast<int>(a.arm) < static_cast<int>(b.arm);
  });

  if (local.pairs_in > 0 && local.pairs_completed == 0) {
    throw ProviderExhausted("run_experiment: every pair failed (" +
                            std::to_string(local.pairs_failed) + " provider failures)");
  }
  if (report) *report = local;
  return records;
}

std::vector<ProbeRow> length_adherence_probe(const std::string& base_prompt,
                                             std::span<const int> z_values,
                                             const ModelConfig& config, ChatProvider& provider) {
  if (z_values.empty()) throw Error("length_adherence_probe: z_values must be non-empty");
  for (int z : z_values) {
    if (z <= 0) throw Error("length_adherence_probe: z must be positive, got " +
                            std::to_string(z));
  }
  std::vector<ProbeRow> rows;
  rows.reserve(z_values.size());
  for (int z : z_values) {
    ProbeRow row;
    row.z = z;
    std::string prompt =
        base_prompt + " describe with " + std::to_string(z) + " number of tokens";
    try {
      ChatResult result = provider.chat(prompt, config);
      row.output_tokens = result.completion_tokens;
      row.deviation = row.output_tokens - z;
    } catch (const ProviderError& ex) {
      row.ok = false;
      row.error = ex.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string probe_table_csv(std::span<const ProbeRow> rows) {
  std::ostringstream out;
  out << "z,output_tokens,deviation,status\n";
  for (const auto& row : rows) {
    if (row.ok) {
      out << row.z << "," << row.output_tokens << "," << row.deviation << ",ok\n";
    } else {
      out << row.z << ",,,failed\n";
    }
  }
  return out.str();
}

void write_completions(const std::filesystem::path& path,
                       std::span<const CompletionRecord> records) {
  JsonlWriter writer(path);
  for (const auto& r : records) {
    writer.write({{"pair_id", r.pair_id},
                  {"arm", to_string(r.arm)},
                  {"prompt_text", r.prompt_text},
                  {"input_tokens", r.input_tokens},
                  {"output_tokens", r.output_tokens},
                  {"output_text", r.output_text},
                  {"config_hash", r.config_hash},
                  {"status", r.status},
                  {"usage_source", r.usage_source == UsageSource::provider_reported
                                       ? "provider_reported"
                                       : "local_count"}});
  }
  writer.close();
}

std::vector<CompletionRecord> read_completions(const std::filesystem::path& path) {
  std::vector<CompletionRecord> out;
  for_each_jsonl(path, [&](nlohmann::json&& obj) {
    CompletionRecord r;
    r.pair_id = obj.at("pair_id").get<std::string>();
    r.arm = obj.at("arm").get<std::string>() == "treated_polite" ? Arm::treated_polite
                                                                 : Arm::control_nonpolite;
    r.prompt_text = obj.value("prompt_text", std::string());
    r.input_tokens = obj.at("input_tokens").get<int>();
    r.output_tokens = obj.at("output_tokens").get<int>();
    r.output_text = obj.value("output_text", std::string());
    r.config_hash = obj.value("config_hash", std::string());
    r.status = obj.value("status", std::string("ok"));
    r.usage_source = obj.value("usage_source", "provider_reported") == "local_count"
                         ? UsageSource::local_count
                         : UsageSource::provider_reported;
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace tonecost
