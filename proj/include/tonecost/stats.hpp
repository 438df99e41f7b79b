#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tonecost/classify.hpp"
#include "tonecost/decimal.hpp"
#include "tonecost/parallel.hpp"

namespace tonecost {

/// One estimation observation: a completed arm of a pair.
struct EstimationRow {
  double output_tokens = 0.0;
  int polite = 0;  // 1 = treated (polite) arm
  double input_tokens = 0.0;
  int task = -1;                      // index into EstimationDataset::task_names, -1 = none
  std::optional<double> liwc_score;   // continuous politeness of this arm's prompt
  std::optional<PolitenessForm> form; // form of the pair's polite member
  bool has_please = false;            // marker flags of the polite member
  bool has_thank_you = false;
  bool liwc_aligned = false;          // judge and lexicon labels agree for the pair
  std::string pair_id;
};

struct EstimationDataset {
  std::vector<EstimationRow> rows;             // pair_id groups of 2, complementary polite
  std::vector<std::string> task_names;         // canonical category order
};

struct DiffInMeansResult {
  double ate = 0.0;                                       // mean of per-pair taus
  std::vector<std::pair<std::string, double>> per_pair;   // (pair_id, tau_i)
};

/// tau_i = Y(control arm) - Y(treated arm); the returned ate is their mean.
/// Throws EstimationError naming the pair_ids whenever the paired structure
/// is broken.
DiffInMeansResult diff_in_means(const EstimationDataset& dataset);

/// Exact-decimal arm-mean difference (control minus treated), for the
/// paper-arithmetic checks that binary floating point would smudge.
Decimal diff_in_means_exact(std::span<const Decimal> control_outputs,
                            std::span<const Decimal> treated_outputs);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double t = 0.0;
  double p = 0.0;
};

struct RegressionResult {
  std::vector<Coefficient> coefficients;
  double r2 = 0.0;
  double adjusted_r2 = 0.0;
  std::size_t n_obs = 0;
  std::string cov_estimator = "classical";  // or "hc1"
  std::vector<std::string> notes;           // dropped dummies etc.
};

/// Named-column design matrix, column major.
struct DesignMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::size_t rows = 0;

  void add(std::string name, std::vector<double> col);
};

struct OlsOptions {
  bool robust_se = false;  // HC1 instead of classical homoskedastic errors
  ExecPolicy policy = ExecPolicy::serial;
};

/// Least squares via Householder QR with column pivoting; classical
/// homoskedastic standard errors, two-sided p from the t distribution with
/// N-k degrees of freedom, adjusted R^2 = 1 - (1-R^2)(N-1)/(N-k).
/// Throws EstimationError listing collinear columns on rank deficiency.
RegressionResult ols(std::span<const double> y, const DesignMatrix& X,
                     const OlsOptions& options = {});

enum class TreatmentSpec { binary, continuous };

struct ModelSpec {
  TreatmentSpec treatment = TreatmentSpec::binary;
  bool input_tokens = true;
  bool task_dummies = false;
  bool interactions = false;
  std::string subset = "all";  // all | form_please_thankyou | form_please |
                               // form_implicit | liwc_aligned
  std::string baseline_task = "classification";
  bool robust_se = false;
};

/// Builds the design (intercept, Polite or continuous score, input tokens,
/// optional task dummies with the baseline omitted, optional interactions)
/// over the configured subset and delegates to ols.
RegressionResult estimate_effect(const EstimationDataset& dataset, const ModelSpec& spec);

/// The design matrix estimate_effect would use; exposed so tests can compare
/// against a hand-built matrix.
DesignMatrix build_design(const EstimationDataset& dataset, const ModelSpec& spec,
                          std::vector<double>& y_out, std::vector<std::string>* notes = nullptr);

struct AnovaEffect {
  std::string name;  // factor A, factor B, interaction
  double ss = 0.0;
  double f = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;
  double p = 1.0;
  double partial_eta_sq = 0.0;
};

struct AnovaResult {
  std::vector<AnovaEffect> effects;  // A, B, A x B
  double ss_error = 0.0;
  double ss_total = 0.0;
  double residual_df = 0.0;
  double grand_mean = 0.0;
};

/// Two-way ANOVA on a 2x2 design with Type II sums of squares (exact for
/// balanced data); partial eta^2 = SS_effect / (SS_effect + SS_error).
/// Throws EstimationError on an empty cell.
AnovaResult anova_two_way(std::span<const double> ratings, std::span<const int> factor_a,
                          std::span<const int> factor_b, const std::string& a_name = "A",
                          const std::string& b_name = "B");

/// Two-sided p-value of a t statistic with df degrees of freedom.
double t_two_sided_p(double t, double df);

/// Upper-tail probability of an F statistic.
double f_upper_p(double f, double df1, double df2);

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

}  // namespace tonecost
