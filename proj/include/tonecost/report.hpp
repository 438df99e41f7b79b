#pragma once

#include <string>

#include "tonecost/cost.hpp"
#include "tonecost/semantics.hpp"
#include "tonecost/stats.hpp"

namespace tonecost {

/// Markdown table in the papers' layout: estimate with significance stars,
/// standard error in parentheses, adjusted R^2 and N footer rows. Negative
/// numbers use the typographic minus sign.
std::string render_regression_markdown(const RegressionResult& result,
                                       const std::string& title);

/// Full-precision CSV twin (ASCII, %.17g).
std::string regression_csv(const RegressionResult& result);

/// Parses regression_csv output back; the round trip preserves every value
/// bit for bit.
RegressionResult parse_regression_csv(const std::string& csv);

/// "F(df1, df2) = .651, p = .420, η_p² = .002" per effect, leading zeros
/// dropped the way the tables print them.
std::string render_anova_markdown(const AnovaResult& result, const std::string& title);
std::string anova_csv(const AnovaResult& result);

std::string render_cost_markdown(const CostProjection& projection, const std::string& title);

/// Similarity and n-gram diagnostics; prints "no data" when empty.
std::string render_diagnostics_markdown(const OutputSimilarityReport* similarity,
                                        const NgramDiffReport* ngrams);

/// Formatting helpers shared by the renderers.
std::string format_signed(double value, int decimals);     // U+2212 for negatives
std::string significance_stars(double p);                  // *** / ** / * / ""
std::string thousands(std::size_t n);                      // 31922 -> "31,922"
std::string bare_decimal(double value, int decimals);      // .651 style, no leading 0

}  // namespace tonecost
