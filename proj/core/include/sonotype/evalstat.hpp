#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sonotype {

/// Per-sample true class and a score vector over num_classes classes,
/// stored row-major.
struct ScoredPredictions {
  std::size_t num_classes = 0;
  std::vector<int> labels;
  std::vector<double> scores;

  std::size_t size() const noexcept { return labels.size(); }
  double score(std::size_t sample, std::size_t cls) const { return scores[sample * num_classes + cls]; }
  void add(int label, std::span<const double> row);
  /// Throws InvalidArgument on inconsistent shapes, out-of-range labels or
  /// non-finite scores.
  void validate() const;
};

/// Argmax per sample, lowest index on ties.
std::vector<int> predicted_classes(const ScoredPredictions& preds);

double accuracy(const ScoredPredictions& preds);

/// One-vs-rest AUC of every class via the rank statistic with average ranks
/// for ties. Throws DegenerateClass when a class lacks positives or negatives.
std::vector<double> auc_per_class(const ScoredPredictions& preds);
double auc_multiclass(const ScoredPredictions& preds);

/// Step-interpolated AP: the mean of precision@k over the ranks k of the
/// positives, scores descending, ties broken by sample index.
double average_precision(const ScoredPredictions& preds, std::size_t cls);
/// Support-weighted mean of the per-class APs.
double map_weighted(const ScoredPredictions& preds);
/// Unweighted mean of the per-class APs.
double cmap(const ScoredPredictions& preds);

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Rows are true classes, columns predicted classes.
std::vector<std::vector<std::uint64_t>> confusion_matrix(const ScoredPredictions& preds);
std::vector<ConfusionCounts> one_vs_rest_counts(const std::vector<std::vector<std::uint64_t>>& matrix);

struct ClassMetrics {
  std::size_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
};

/// 0/0 evaluates to 0.
ClassMetrics class_metrics(const ConfusionCounts& counts);

struct MacroMetrics {
  double recall = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

MacroMetrics recall_specificity_f1(const ScoredPredictions& preds);

/// Mean of p_i / q_i computed as one exact rational when the integers
/// allow it, so equal denominators reduce to a single division.
double mean_of_ratios(std::span<const std::uint64_t> numerators, std::span<const std::uint64_t> denominators);

/// Weighted mean with integer weights reduced by their gcd first; equal
/// weights give exactly the unweighted mean.
double weighted_mean(std::span<const double> values, std::span<const std::uint64_t> weights);

struct ClassReport {
  ClassMetrics metrics;
  double ap = 0.0;
  double auc = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double map = 0.0;
  double cmap = 0.0;
  double auc = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::vector<ClassReport> per_class;

  /// One "name=value" line per metric.
  std::string to_text() const;
  /// class,support,precision,recall,specificity,f1,ap,auc
  std::string per_class_csv() const;
};

MetricsReport evaluate(const ScoredPredictions& preds);

// ---------------------------------------------------------------------------
// Statistics

/// Regularized incomplete beta I_x(a, b), continued fraction to ~1e-10.
double incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);
/// Inverse of student_t_cdf by bisection.
double student_t_quantile(double p, double df);
double f_cdf(double f, double df1, double df2);
/// Upper tail P(F >= f).
double f_sf(double f, double df1, double df2);

struct OlsFit {
  std::size_t n = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double r_squared = 0.0;
};

/// Least-squares line with a two-sided confidence interval on the slope.
/// Errors: TooFewPoints (< 3), ConstantX.
OlsFit ols_ci(std::span<const double> x, std::span<const double> y, double level = 0.95);

struct AnovaResult {
  double f = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
};

/// Errors: TooFewGroups (< 2), TooFewObservations (a group with < 2).
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

struct SignTest {
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  /// P(X >= wins) for X ~ Binomial(wins + losses, 1/2); ties are dropped.
  double p = 1.0;
};

/// Paired one-sided sign test of a > b.
SignTest sign_test_greater(std::span<const double> a, std::span<const double> b);
double sign_test_p(std::size_t wins, std::size_t losses);

}  // namespace sonotype
