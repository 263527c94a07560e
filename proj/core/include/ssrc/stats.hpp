#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ssrc {

/// A metric over (labels, malignancy scores). Labels are 0 or 1.
using MetricFn = std::function<double(std::span<const int>, std::span<const double>)>;

/// Mann–Whitney form: (concordant + ½·tied) / (positives · negatives).
/// Throws kSingleClass unless both classes are present.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

struct ConfusionCounts {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
};

struct ThresholdMetrics {
  ConfusionCounts counts;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
};

/// score >= threshold predicts malignant.
ThresholdMetrics threshold_metrics(std::span<const int> labels, std::span<const double> scores,
                                   double threshold);

/// Threshold maximizing sensitivity + specificity − 1, taken from the
/// observed scores; ties go to the higher threshold.
double youden_threshold(std::span<const int> labels, std::span<const double> scores);

/// Standard normal CDF and quantile.
double normal_cdf(double x);
double normal_quantile(double p);

/// Linear-interpolation quantile of sorted data (type 7).
double sorted_quantile(std::span<const double> sorted, double p);

struct Interval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double z0 = 0.0;
  double acceleration = 0.0;
  /// All replicates identical; the interval collapses to the point.
  bool degenerate = false;
};

/// Endpoints at the BCa-adjusted percentiles of sorted replicates. With
/// z0 = a = 0 this is the plain percentile interval.
std::pair<double, double> bca_interval(std::span<const double> sorted_replicates, double z0,
                                       double acceleration, double level);

struct BootstrapOptions {
  std::size_t replicates = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

/// Class-stratified BCa bootstrap. Replicate b resamples with its own stream
/// derive_seed(seed, b). Needs at least two samples per class.
Interval bca_ci(const MetricFn& metric, std::span<const int> labels, std::span<const double> scores,
                const BootstrapOptions& options);

struct PermutationOptions {
  std::size_t permutations = 10000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

struct PermutationResult {
  double observed = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

/// Paired test of |metric(A) − metric(B)|: each permutation swaps the two
/// models' scores per sample with probability ½. p = (1 + #{≥ observed}) /
/// (1 + permutations). Permutation k draws from derive_seed(seed, k).
PermutationResult permutation_test(const MetricFn& metric, std::span<const int> labels,
                                   std::span<const double> scores_a,
                                   std::span<const double> scores_b, const PermutationOptions& options);

/// One model's score for one sample.
struct PredictionRecord {
  std::string sample_id;
  std::string patient_id;
  int label = 0;
  double score = 0.0;
};

std::vector<int> labels_of(std::span<const PredictionRecord> records);
std::vector<double> scores_of(std::span<const PredictionRecord> records);

/// Record-level wrapper: throws kUnpaired unless both lists carry the same
/// sample ids with the same labels in the same order.
PermutationResult permutation_test(const MetricFn& metric, std::span<const PredictionRecord> a,
                                   std::span<const PredictionRecord> b,
                                   const PermutationOptions& options);

/// Mean score per patient, one record per patient in first-seen order.
std::vector<PredictionRecord> aggregate_by_patient(std::span<const PredictionRecord> records);

struct MetricsReport {
  Interval auc, sensitivity, specificity, f1;
  double threshold = 0.5;
  std::size_t samples = 0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  /// Free-form provenance, e.g. "patch-level" or "patient-level mean".
  std::string level = "patch-level";
};

/// Point estimates and BCa intervals for AUC and the three threshold metrics.
/// Each interval is widened if needed so it contains its point estimate.
MetricsReport evaluate_predictions(std::span<const int> labels, std::span<const double> scores,
                                   double threshold, const BootstrapOptions& options);

/// Header plus one line per metric: metric, point, ci_low, ci_high.
std::string report_tsv(const MetricsReport& report);
std::string report_json(const MetricsReport& report);

}  // namespace ssrc
