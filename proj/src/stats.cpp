#include "tonecost/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "tonecost/error.hpp"

namespace tonecost {

// ---------------------------------------------------------------------------
// distribution tails (Numerical Recipes-style incomplete beta)
// ---------------------------------------------------------------------------

namespace {

constexpr int kBetaMaxIterations = 200;
constexpr double kBetaEps = 3e-12;
constexpr double kBetaFpMin = 1e-300;

double betacf(double a, double b, double x) {
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kBetaFpMin) d = kBetaFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIterations; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kBetaFpMin) d = kBetaFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kBetaFpMin) c = kBetaFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kBetaFpMin) d = kBetaFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kBetaFpMin) c = kBetaFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kBetaEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw Error("incomplete_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log(1.0 - x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * betacf(a, b, x) / a;
  }
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double t_two_sided_p(double t, double df) {
  if (df <= 0) throw Error("t_two_sided_p: df must be positive");
  if (!std::isfinite(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double f_upper_p(double f, double df1, double df2) {
  if (df1 <= 0 || df2 <= 0) throw Error("f_upper_p: degrees of freedom must be positive");
  if (!std::isfinite(f)) return 0.0;
  if (f <= 0) return 1.0;
  return incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f));
}

// ---------------------------------------------------------------------------
// least squares core: Householder QR with column pivoting
// ---------------------------------------------------------------------------

void DesignMatrix::add(std::string name, std::vector<double> col) {
  if (!cols.empty() && col.size() != rows) {
    throw EstimationError("design matrix: column '" + name + "' has " +
                          std::to_string(col.size()) + " rows, expected " +
                          std::to_string(rows));
  }
  rows = col.size();
  names.push_back(std::move(name));
  cols.push_back(std::move(col));
}

namespace {

struct QrFit {
  std::vector<double> coef;       // in original column order
  std::vector<double> qty_tail;   // Q^T y beyond the first k entries
  std::vector<std::vector<double>> r_inverse;  // upper triangular, permuted order
  std::vector<std::size_t> perm;  // pivot permutation (position -> original col)
  double rss = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
};

QrFit qr_least_squares(std::span<const double> y, const DesignMatrix& X, ExecPolicy policy) {
  const std::size_t n = X.rows;
  const std::size_t k = X.cols.size();
  if (k == 0) throw EstimationError("ols: design matrix has no columns");
  if (y.size() != n) throw EstimationError("ols: y length does not match design rows");
  if (n <= k) {
    throw EstimationError("ols: need more observations (" + std::to_string(n) +
                          ") than columns (" + std::to_string(k) + ")");
  }

  std::vector<std::vector<double>> a = X.cols;  // working copy, column major
  std::vector<double> qty(y.begin(), y.end());
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> rdiag(k, 0.0);

  for (std::size_t j = 0; j < k; ++j) {
    // pivot: bring the remaining column with the largest tail norm forward
    std::size_t pivot = j;
    double best = -1.0;
    for (std::size_t c = j; c < k; ++c) {
      double norm2 = 0.0;
      for (std::size_t i = j; i < n; ++i) norm2 += a[c][i] * a[c][i];
      if (norm2 > best) {
        best = norm2;
        pivot = c;
      }
    }
    if (pivot != j) {
      std::swap(a[pivot], a[j]);
      std::swap(perm[pivot], perm[j]);
    }

    double norm = std::sqrt(best < 0 ? 0.0 : best);
    if (norm == 0.0) {
      rdiag[j] = 0.0;
      continue;  // exactly dependent column; rank check reports it below
    }
    double alpha = a[j][j] >= 0 ? -norm : norm;
    std::vector<double> v(n - j);
    v[0] = a[j][j] - alpha;
    for (std::size_t i = j + 1; i < n; ++i) v[i - j] = a[j][i];
    double vnorm2 = 0.0;
    for (double vi : v) vnorm2 += vi * vi;
    a[j][j] = alpha;
    rdiag[j] = alpha;
    for (std::size_t i = j + 1; i < n; ++i) a[j][i] = 0.0;
    if (vnorm2 == 0.0) continue;
    double beta = 2.0 / vnorm2;

    // reflect the trailing columns; each column is independent, so the
    // parallel path is bit-identical to the serial reference
    parallel_for(k - j - 1, policy, [&](std::size_t offset) {
      std::size_t c = j + 1 + offset;
      double dot = 0.0;
      for (std::size_t i = j; i < n; ++i) dot += v[i - j] * a[c][i];
      dot *= beta;
      for (std::size_t i = j; i < n; ++i) a[c][i] -= dot * v[i - j];
    });
    double ydot = 0.0;
    for (std::size_t i = j; i < n; ++i) ydot += v[i - j] * qty[i];
    ydot *= beta;
    for (std::size_t i = j; i < n; ++i) qty[i] -= ydot * v[i - j];
  }

  // rank check against the leading diagonal magnitude
  double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(n, k)) *
               std::fabs(rdiag[0]);
  std::vector<std::string> collinear;
  for (std::size_t j = 0; j < k; ++j) {
    if (std::fabs(rdiag[j]) <= tol) collinear.push_back(X.names[perm[j]]);
  }
  if (!collinear.empty()) {
    std::string msg = "ols: design matrix is rank deficient; collinear columns:";
    for (const auto& name : collinear) msg += " " + name;
    throw EstimationError(msg);
  }

  // back substitution: R b_perm = (Q^T y)[0..k)
  std::vector<double> b_perm(k, 0.0);
  for (std::size_t jj = k; jj-- > 0;) {
    double sum = qty[jj];
    for (std::size_t c = jj + 1; c < k; ++c) sum -= a[c][jj] * b_perm[c];
    b_perm[jj] = sum / a[jj][jj];
  }

  QrFit fit;
  fit.n = n;
  fit.k = k;
  fit.perm = perm;
  fit.coef.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) fit.coef[perm[j]] = b_perm[j];
  fit.qty_tail.assign(qty.begin() + static_cast<std::ptrdiff_t>(k), qty.end());
  for (double q : fit.qty_tail) fit.rss += q * q;

  // R^{-1} by solving R u = e_j for each unit vector
  fit.r_inverse.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t col = 0; col < k; ++col) {
    std::vector<double>& u = fit.r_inverse[col];
    for (std::size_t jj = col + 1; jj-- > 0;) {
      double sum = (jj == col) ? 1.0 : 0.0;
      for (std::size_t c = jj + 1; c <= col; ++c) sum -= a[c][jj] * u[c];
      u[jj] = sum / a[jj][jj];
    }
  }
  return fit;
}

bool has_constant_column(const DesignMatrix& X) {
  for (const auto& col : X.cols) {
    if (col.empty()) continue;
    bool constant = std::all_of(col.begin(), col.end(),
                                [&](double v) { return v == col.front(); });
    if (constant && col.front() != 0.0) return true;
  }
  return false;
}

}  // namespace

RegressionResult ols(std::span<const double> y, const DesignMatrix& X,
                     const OlsOptions& options) {
  QrFit fit = qr_least_squares(y, X, options.policy);
  const std::size_t n = fit.n;
  const std::size_t k = fit.k;
  const double df = static_cast<double>(n - k);

  // residuals against the original design
  std::vector<double> residuals(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < k; ++j) pred += X.cols[j][i] * fit.coef[j];
    residuals[i] = y[i] - pred;
  }
  double rss = 0.0;
  for (double r : residuals) rss += r * r;

  // variance of the permuted coefficients: sigma^2 (R^T R)^{-1} = sigma^2 U U^T
  std::vector<double> var_perm(k, 0.0);
  if (!options.robust_se) {
    double sigma2 = rss / df;
    for (std::size_t j = 0; j < k; ++j) {
      double sum = 0.0;
      for (std::size_t c = j; c < k; ++c) {
        double u = fit.r_inverse[c][j];
        sum += u * u;
      }
      var_perm[j] = sigma2 * sum;
    }
  } else {
    // HC1 sandwich: (X'X)^{-1} X' diag(r^2) X (X'X)^{-1} * n/(n-k)
    std::vector<std::vector<double>> cinv(k, std::vector<double>(k, 0.0));  // permuted order
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = 0; q < k; ++q) {
        double sum = 0.0;
        for (std::size_t c = std::max(p, q); c < k; ++c) {
          sum += fit.r_inverse[c][p] * fit.r_inverse[c][q];
        }
        cinv[p][q] = sum;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double w = residuals[i] * residuals[i];
      std::vector<double> xi(k);
      for (std::size_t j = 0; j < k; ++j) xi[j] = X.cols[fit.perm[j]][i];
      std::vector<double> cx(k, 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        double sum = 0.0;
        for (std::size_t q = 0; q < k; ++q) sum += cinv[p][q] * xi[q];
        cx[p] = sum;
      }
      for (std::size_t p = 0; p < k; ++p) var_perm[p] += w * cx[p] * cx[p];
    }
    double adjust = static_cast<double>(n) / df;
    for (double& v : var_perm) v *= adjust;
  }

  RegressionResult result;
  result.n_obs = n;
  result.cov_estimator = options.robust_se ? "hc1" : "classical";
  result.coefficients.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    Coefficient& c = result.coefficients[fit.perm[j]];
    c.name = X.names[fit.perm[j]];
    c.estimate = fit.coef[fit.perm[j]];
    c.std_error = std::sqrt(var_perm[j]);
    c.t = c.std_error > 0 ? c.estimate / c.std_error : 0.0;
    c.p = t_two_sided_p(c.t, df);
  }

  double tss = 0.0;
  if (has_constant_column(X)) {
    double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    for (double v : y) tss += (v - mean) * (v - mean);
  } else {
    for (double v : y) tss += v * v;
  }
  result.r2 = tss > 0 ? 1.0 - rss / tss : 0.0;
  result.adjusted_r2 =
      1.0 - (1.0 - result.r2) * (static_cast<double>(n) - 1.0) / df;
  return result;
}

// ---------------------------------------------------------------------------
// paired difference in means
// ---------------------------------------------------------------------------

DiffInMeansResult diff_in_means(const EstimationDataset& dataset) {
  struct PairSlot {
    std::optional<double> treated;
    std::optional<double> control;
    int rows = 0;
  };
  std::unordered_map<std::string, PairSlot> slots;
  std::vector<std::string> order;
  for (const auto& row : dataset.rows) {
    auto [it, inserted] = slots.try_emplace(row.pair_id);
    if (inserted) order.push_back(row.pair_id);
    PairSlot& slot = it->second;
    ++slot.rows;
    if (row.polite == 1) {
      slot.treated = row.output_tokens;
    } else {
      slot.control = row.output_tokens;
    }
  }
  std::vector<std::string> broken;
  for (const auto& id : order) {
    const PairSlot& slot = slots[id];
    if (slot.rows != 2 || !slot.treated || !slot.control) broken.push_back(id);
  }
  if (!broken.empty()) {
    std::string msg = "diff_in_means: unpaired rows for pair_ids:";
    for (std::size_t i = 0; i < broken.size() && i < 8; ++i) msg += " " + broken[i];
    if (broken.size() > 8) msg += " (+" + std::to_string(broken.size() - 8) + " more)";
    throw EstimationError(msg);
  }

  DiffInMeansResult result;
  double sum = 0.0;
  for (const auto& id : order) {
    const PairSlot& slot = slots[id];
    double tau = *slot.control - *slot.treated;  // control minus treated
    result.per_pair.emplace_back(id, tau);
    sum += tau;
  }
  if (!order.empty()) result.ate = sum / static_cast<double>(order.size());
  return result;
}

Decimal diff_in_means_exact(std::span<const Decimal> control_outputs,
                            std::span<const Decimal> treated_outputs) {
  if (control_outputs.size() != treated_outputs.size() || control_outputs.empty()) {
    throw EstimationError("diff_in_means_exact: arms must be non-empty and equal-sized");
  }
  Decimal diff_sum;
  for (std::size_t i = 0; i < control_outputs.size(); ++i) {
    diff_sum = diff_sum + (control_outputs[i] - treated_outputs[i]);
  }
  return diff_sum.divide_exact(static_cast<std::int64_t>(control_outputs.size()));
}

// ---------------------------------------------------------------------------
// model specification
// ---------------------------------------------------------------------------

namespace {

std::string display_task_name(const std::string& canonical) {
  if (canonical == "information_seeking") return "Information Seeking";
  if (canonical == "text_generation") return "Text Generation";
  if (canonical == "editing_rewriting") return "Editing & Rewriting";
  if (canonical == "classification") return "Classification";
  if (canonical == "summarization") return "Summarization";
  if (canonical == "technical_tasks") return "Technical Tasks";
  return canonical;
}

bool subset_keeps(const EstimationRow& row, const std::string& subset) {
  if (subset == "all") return true;
  if (subset == "form_please_thankyou") return row.has_please || row.has_thank_you;
  if (subset == "form_please") return row.has_please;
  if (subset == "form_implicit") {
    return row.form && *row.form == PolitenessForm::implicit;
  }
  if (subset == "liwc_aligned") return row.liwc_aligned;
  throw ConfigError("estimate: unknown subset '" + subset + "'");
}

}  // namespace

DesignMatrix build_design(const EstimationDataset& dataset, const ModelSpec& spec,
                          std::vector<double>& y_out, std::vector<std::string>* notes) {
  std::vector<const EstimationRow*> rows;
  std::size_t dropped_unclassified = 0;
  for (const auto& row : dataset.rows) {
    if (!subset_keeps(row, spec.subset)) continue;
    if (spec.task_dummies && row.task < 0) {
      ++dropped_unclassified;
      continue;  // unclassified prompts leave task-controlled models
    }
    rows.push_back(&row);
  }
  if (rows.empty()) {
    throw EstimationError("estimate: subset '" + spec.subset + "' selects no rows");
  }
  if (notes && dropped_unclassified > 0) {
    notes->push_back("dropped " + std::to_string(dropped_unclassified) +
                     " rows without a task category");
  }
  const std::size_t n = rows.size();

  y_out.clear();
  y_out.reserve(n);
  for (const auto* row : rows) y_out.push_back(row->output_tokens);

  DesignMatrix X;
  X.add("Intercept", std::vector<double>(n, 1.0));

  std::vector<double> treatment_col(n, 0.0);
  if (spec.treatment == TreatmentSpec::binary) {
    for (std::size_t i = 0; i < n; ++i) treatment_col[i] = rows[i]->polite;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!rows[i]->liwc_score) {
        throw EstimationError("estimate: continuous treatment requires a liwc_score on every row");
      }
      treatment_col[i] = *rows[i]->liwc_score;
    }
  }
  X.add("Polite", treatment_col);

  if (spec.task_dummies) {
    std::vector<std::pair<std::string, std::vector<double>>> dummies;
    for (std::size_t t = 0; t < dataset.task_names.size(); ++t) {
      const std::string& name = dataset.task_names[t];
      if (name == spec.baseline_task) continue;  // omitted baseline level
      std::vector<double> dummy(n, 0.0);
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (rows[i]->task == static_cast<int>(t)) {
          dummy[i] = 1.0;
          any = true;
        }
      }
      if (!any) {
        if (notes) notes->push_back("dropped dummy '" + display_task_name(name) +
                                    "' (level absent in subset)");
        continue;
      }
      dummies.emplace_back(display_task_name(name), std::move(dummy));
    }
    for (auto& [display, dummy] : dummies) X.add(display, dummy);
    if (spec.interactions) {
      for (auto& [display, dummy] : dummies) {
        std::vector<double> inter(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) inter[i] = dummy[i] * treatment_col[i];
        X.add("Polite × " + display, std::move(inter));
      }
    }
  }

  if (spec.input_tokens) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = rows[i]->input_tokens;
    X.add("Input Tokens", std::move(col));
  }
  return X;
}

RegressionResult estimate_effect(const EstimationDataset& dataset, const ModelSpec& spec) {
  std::vector<double> y;
  std::vector<std::string> notes;
  DesignMatrix X = build_design(dataset, spec, y, &notes);
  OlsOptions options;
  options.robust_se = spec.robust_se;
  RegressionResult result = ols(y, X, options);
  result.notes = std::move(notes);
  return result;
}

// ---------------------------------------------------------------------------
// two-way ANOVA (2x2, Type II sums of squares)
// ---------------------------------------------------------------------------

namespace {

double fit_rss(std::span<const double> y, const DesignMatrix& X) {
  return qr_least_squares(y, X, ExecPolicy::serial).rss;
}

}  // namespace

AnovaResult anova_two_way(std::span<const double> ratings, std::span<const int> factor_a,
                          std::span<const int> factor_b, const std::string& a_name,
                          const std::string& b_name) {
  const std::size_t n = ratings.size();
  if (factor_a.size() != n || factor_b.size() != n) {
    throw EstimationError("anova_two_way: factor lengths do not match ratings");
  }
  std::size_t cell_counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i) {
    if ((factor_a[i] != 0 && factor_a[i] != 1) || (factor_b[i] != 0 && factor_b[i] != 1)) {
      throw EstimationError("anova_two_way: factors must be binary 0/1");
    }
    ++cell_counts[factor_a[i]][factor_b[i]];
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      if (cell_counts[a][b] == 0) {
        throw EstimationError("anova_two_way: empty cell (a=" + std::to_string(a) +
                              ", b=" + std::to_string(b) + ")");
      }
    }
  }
  if (n <= 4) throw EstimationError("anova_two_way: need more than 4 observations");

  std::vector<double> ones(n, 1.0), av(n), bv(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    av[i] = factor_a[i];
    bv[i] = factor_b[i];
    ab[i] = av[i] * bv[i];
  }

  auto make_design = [&](bool with_a, bool with_b, bool with_ab) {
    DesignMatrix X;
    X.add("Intercept", ones);
    if (with_a) X.add("A", av);
    if (with_b) X.add("B", bv);
    if (with_ab) X.add("AB", ab);
    return X;
  };

  double rss_full = fit_rss(ratings, make_design(true, true, true));
  double rss_additive = fit_rss(ratings, make_design(true, true, false));
  double rss_no_a = fit_rss(ratings, make_design(false, true, false));
  double rss_no_b = fit_rss(ratings, make_design(true, false, false));

  double ss_a = std::max(0.0, rss_no_a - rss_additive);
  double ss_b = std::max(0.0, rss_no_b - rss_additive);
  double ss_ab = std::max(0.0, rss_additive - rss_full);
  double ss_err = std::max(0.0, rss_full);
  double df_err = static_cast<double>(n) - 4.0;

  AnovaResult result;
  result.ss_error = ss_err;
  result.residual_df = df_err;
  double mean = std::accumulate(ratings.begin(), ratings.end(), 0.0) / static_cast<double>(n);
  result.grand_mean = mean;
  for (double v : ratings) result.ss_total += (v - mean) * (v - mean);

  auto effect = [&](std::string name, double ss) {
    AnovaEffect e;
    e.name = std::move(name);
    e.ss = ss;
    e.df1 = 1.0;
    e.df2 = df_err;
    if (ss <= 0.0) {
      e.f = 0.0;
      e.p = 1.0;
      e.partial_eta_sq = 0.0;
    } else if (ss_err <= 0.0) {
      e.f = std::numeric_limits<double>::infinity();
      e.p = 0.0;
      e.partial_eta_sq = 1.0;
    } else {
      e.f = (ss / e.df1) / (ss_err / df_err);
      e.p = f_upper_p(e.f, e.df1, e.df2);
      e.partial_eta_sq = ss / (ss + ss_err);
    }
    return e;
  };
  result.effects.push_back(effect(a_name, ss_a));
  result.effects.push_back(effect(b_name, ss_b));
  result.effects.push_back(effect(a_name + " × " + b_name, ss_ab));
  return result;
}

}  // namespace tonecost
