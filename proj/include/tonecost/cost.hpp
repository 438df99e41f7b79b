#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "tonecost/decimal.hpp"

namespace tonecost {

struct PriceSchedule {
  Decimal output_price_per_million;  // currency per 1M output tokens
  Decimal input_price_per_million;   // currency per 1M input tokens
  std::string currency = "USD";
};

struct CostProjection {
  Decimal delta_tokens_per_prompt;
  Decimal extra_cost_per_prompt;
  std::int64_t daily_queries = 0;
  Decimal extra_per_day;
  Decimal extra_per_month;
  int month_days = 30;
  std::string currency = "USD";

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// delta_tokens * output_price_per_million / 1e6, exact.
Decimal per_prompt_cost(const Decimal& delta_tokens, const PriceSchedule& schedule);

/// per_day = per_prompt * daily_queries; per_month = per_day * month_days.
CostProjection projection(const Decimal& per_prompt, std::int64_t daily_queries,
                          int month_days = 30);

/// Full chain from a token delta.
CostProjection project_cost(const Decimal& delta_tokens, const PriceSchedule& schedule,
                            std::int64_t daily_queries, int month_days = 30);

}  // namespace tonecost
