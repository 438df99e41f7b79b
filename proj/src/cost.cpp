#include "tonecost/cost.hpp"

#include <sstream>

#include "tonecost/error.hpp"

namespace tonecost {

Decimal per_prompt_cost(const Decimal& delta_tokens, const PriceSchedule& schedule) {
  // price is per 1M tokens: shift the exponent down by six, exactly
  return delta_tokens * schedule.output_price_per_million * Decimal(1, -6);
}

CostProjection projection(const Decimal& per_prompt, std::int64_t daily_queries,
                          int month_days) {
  if (daily_queries < 0) throw Error("projection: daily_queries must be non-negative");
  if (month_days <= 0) throw Error("projection: month_days must be positive");
  CostProjection out;
  out.extra_cost_per_prompt = per_prompt;
  out.daily_queries = daily_queries;
  out.month_days = month_days;
  out.extra_per_day = per_prompt * Decimal(daily_queries);
  out.extra_per_month = out.extra_per_day * Decimal(month_days);
  return out;
}

CostProjection project_cost(const Decimal& delta_tokens, const PriceSchedule& schedule,
                            std::int64_t daily_queries, int month_days) {
  CostProjection out = projection(per_prompt_cost(delta_tokens, schedule), daily_queries,
                                  month_days);
  out.delta_tokens_per_prompt = delta_tokens;
  out.currency = schedule.currency;
  return out;
}

nlohmann::json CostProjection::to_json() const {
  return {{"delta_tokens_per_prompt", delta_tokens_per_prompt.to_string()},
          {"extra_cost_per_prompt", extra_cost_per_prompt.to_string()},
          {"daily_queries", daily_queries},
          {"extra_per_day", extra_per_day.to_string()},
          {"extra_per_month", extra_per_month.to_string()},
          {"month_days", month_days},
          {"currency", currency}};
}

std::string CostProjection::to_csv() const {
  std::ostringstream out;
  out << "field,value\n";
  out << "delta_tokens_per_prompt," << delta_tokens_per_prompt.to_string() << "\n";
  out << "extra_cost_per_prompt," << extra_cost_per_prompt.to_string() << "\n";
  out << "daily_queries," << daily_queries << "\n";
  out << "extra_per_day," << extra_per_day.to_string() << "\n";
  out << "extra_per_month," << extra_per_month.to_string() << "\n";
  out << "month_days," << month_days << "\n";
  out << "currency," << currency << "\n";
  return out.str();
}

}  // namespace tonecost
