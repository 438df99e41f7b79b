#include "tonecost/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "tonecost/error.hpp"

namespace tonecost {

namespace {

const char* kMinus = "−";  // U+2212, the minus the tables use

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string full_precision(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

std::string format_signed(double value, int decimals) {
  if (std::signbit(value) && value != 0.0) {
    return kMinus + fixed(-value, decimals);
  }
  return fixed(value, decimals);
}

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

std::string thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  int count = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (count && count % 3 == 0) out.insert(out.begin(), ',');
    out.insert(out.begin(), *it);
    ++count;
  }
  return out;
}

std::string bare_decimal(double value, int decimals) {
  std::string s = fixed(value, decimals);
  if (s.rfind("0.", 0) == 0) return s.substr(1);
  if (s.rfind("-0.", 0) == 0) return "-" + s.substr(2);
  return s;
}

std::string render_regression_markdown(const RegressionResult& result,
                                       const std::string& title) {
  std::ostringstream out;
  out << "### " << title << "\n\n";
  out << "| Variable | Coef. | Std. Err. |\n";
  out << "|---|---|---|\n";
  for (const auto& c : result.coefficients) {
    out << "| " << c.name << " | " << format_signed(c.estimate, 3) << significance_stars(c.p)
        << " | (" << format_signed(c.std_error, 3) << ") |\n";
  }
  out << "| Adjusted R-squared | " << fixed(result.adjusted_r2, 4) << " | |\n";
  out << "| Number of Observations | " << thousands(result.n_obs) << " | |\n\n";
  out << "*Note:* \\*\\*\\* p<0.01, \\*\\* p<0.05, \\* p<0.1 (" << result.cov_estimator
      << " standard errors)\n";
  for (const auto& note : result.notes) out << "\n- " << note << "\n";
  return out.str();
}

std::string regression_csv(const RegressionResult& result) {
  std::ostringstream out;
  out << "name,estimate,std_error,t,p\n";
  for (const auto& c : result.coefficients) {
    out << c.name << "," << full_precision(c.estimate) << "," << full_precision(c.std_error)
        << "," << full_precision(c.t) << "," << full_precision(c.p) << "\n";
  }
  out << "_r2," << full_precision(result.r2) << ",,,\n";
  out << "_adjusted_r2," << full_precision(result.adjusted_r2) << ",,,\n";
  out << "_n_obs," << result.n_obs << ",,,\n";
  out << "_cov_estimator," << result.cov_estimator << ",,,\n";
  return out.str();
}

RegressionResult parse_regression_csv(const std::string& csv) {
  RegressionResult result;
  std::istringstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() < 2) throw Error("regression csv: malformed line '" + line + "'");
    if (fields[0] == "_r2") {
      result.r2 = std::stod(fields[1]);
    } else if (fields[0] == "_adjusted_r2") {
      result.adjusted_r2 = std::stod(fields[1]);
    } else if (fields[0] == "_n_obs") {
      result.n_obs = static_cast<std::size_t>(std::stoull(fields[1]));
    } else if (fields[0] == "_cov_estimator") {
      result.cov_estimator = fields[1];
    } else {
      if (fields.size() != 5) throw Error("regression csv: malformed line '" + line + "'");
      Coefficient c;
      c.name = fields[0];
      c.estimate = std::stod(fields[1]);
      c.std_error = std::stod(fields[2]);
      c.t = std::stod(fields[3]);
      c.p = std::stod(fields[4]);
      result.coefficients.push_back(std::move(c));
    }
  }
  return result;
}

std::string render_anova_markdown(const AnovaResult& result, const std::string& title) {
  std::ostringstream out;
  out << "### " << title << "\n\n";
  for (const auto& e : result.effects) {
    out << "- " << e.name << ": F(" << static_cast<long>(e.df1) << ", "
        << static_cast<long>(e.df2) << ") = " << bare_decimal(e.f, 3) << ", p = "
        << bare_decimal(e.p, 3) << ", η_p² = " << bare_decimal(e.partial_eta_sq, 3) << "\n";
  }
  out << "\nGrand mean " << fixed(result.grand_mean, 3) << ", residual df "
      << static_cast<long>(result.residual_df) << "\n";
  return out.str();
}

std::string anova_csv(const AnovaResult& result) {
  std::ostringstream out;
  out << "effect,ss,f,df1,df2,p,partial_eta_sq\n";
  for (const auto& e : result.effects) {
    out << e.name << "," << full_precision(e.ss) << "," << full_precision(e.f) << ","
        << full_precision(e.df1) << "," << full_precision(e.df2) << "," << full_precision(e.p)
        << "," << full_precision(e.partial_eta_sq) << "\n";
  }
  out << "_ss_error," << full_precision(result.ss_error) << ",,,,,\n";
  out << "_ss_total," << full_precision(result.ss_total) << ",,,,,\n";
  out << "_grand_mean," << full_precision(result.grand_mean) << ",,,,,\n";
  return out.str();
}

std::string render_cost_markdown(const CostProjection& projection, const std::string& title) {
  std::ostringstream out;
  out << "### " << title << "\n\n";
  out << "| Quantity | Value |\n|---|---|\n";
  out << "| Token delta per prompt | " << projection.delta_tokens_per_prompt.to_string()
      << " |\n";
  out << "| Extra cost per prompt | " << projection.extra_cost_per_prompt.to_string() << " "
      << projection.currency << " |\n";
  out << "| Daily queries | " << projection.daily_queries << " |\n";
  out << "| Extra per day | " << projection.extra_per_day.to_string() << " "
      << projection.currency << " |\n";
  out << "| Extra per month (" << projection.month_days << " days) | "
      << projection.extra_per_month.to_string() << " " << projection.currency << " |\n";
  return out.str();
}

std::string render_diagnostics_markdown(const OutputSimilarityReport* similarity,
                                        const NgramDiffReport* ngrams) {
  std::ostringstream out;
  out << "### Output diagnostics\n\n";
  if (similarity && !similarity->per_pair.empty()) {
    out << "Mean output cosine similarity " << fixed(similarity->mean, 3) << " over "
        << similarity->per_pair.size() << " pairs: " << similarity->band << ".";
    if (similarity->skipped > 0) out << " Skipped " << similarity->skipped << " incomplete pairs.";
    out << "\n\n";
  } else {
    out << "Similarity: no data\n\n";
  }
  if (ngrams && (!ngrams->with_stopwords.empty() || !ngrams->without_stopwords.empty())) {
    out << "Top removed phrases (stopwords kept):\n\n";
    std::size_t shown = 0;
    for (const auto& [phrase, count] : ngrams->with_stopwords) {
      out << "- " << phrase << " (" << count << ")\n";
      if (++shown >= 10) break;
    }
    out << "\nTop removed phrases (stopwords filtered, list " << ngrams->stopword_list_version
        << "):\n\n";
    shown = 0;
    for (const auto& [phrase, count] : ngrams->without_stopwords) {
      out << "- " << phrase << " (" << count << ")\n";
      if (++shown >= 10) break;
    }
  } else {
    out << "Removed n-grams: no data\n";
  }
  return out.str();
}

}  // namespace tonecost
