#include "ssrc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include <boost/math/special_functions/erf.hpp>

#include "json.hpp"
#include "ssrc/error.hpp"
#include "ssrc/rng.hpp"

namespace ssrc {
namespace {

void check_inputs(std::span<const int> labels, std::span<const double> scores) {
  require(labels.size() == scores.size(), ErrorCode::kShapeMismatch,
          std::to_string(labels.size()) + " labels but " + std::to_string(scores.size()) + " scores");
  std::size_t pos = 0;
  for (int y : labels) {
    require(y == 0 || y == 1, ErrorCode::kLabelOutOfRange, "labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  require(pos > 0 && pos < labels.size(), ErrorCode::kSingleClass,
          "both classes must be present (" + std::to_string(pos) + " positives of " +
              std::to_string(labels.size()) + ")");
  for (double s : scores) require(std::isfinite(s), ErrorCode::kNonFinite, "non-finite score");
}

}  // namespace

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Rank sum of positives with mid-ranks for ties; all terms are multiples of
  // one half, so the sum is exact.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const double p = static_cast<double>(positives), q = static_cast<double>(n - positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

ThresholdMetrics threshold_metrics(std::span<const int> labels, std::span<const double> scores,
                                   double threshold) {
  check_inputs(labels, scores);
  ThresholdMetrics m;
  ConfusionCounts& c = m.counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? c.tp : c.fn)++;
    } else {
      (predicted ? c.fp : c.tn)++;
    }
  }
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  m.sensitivity = d(c.tp) / d(c.tp + c.fn);
  m.specificity = d(c.tn) / d(c.tn + c.fp);
  m.f1 = 2.0 * d(c.tp) / d(2 * c.tp + c.fp + c.fn);
  return m;
}

double youden_threshold(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double neg = static_cast<double>(n) - pos;
  double tp = 0.0, fp = 0.0, best_j = -2.0, best = scores[order[0]];
  for (std::size_t i = 0; i < n;) {
    const double t = scores[order[i]];
    while (i < n && scores[order[i]] == t) {
      (labels[order[i]] == 1 ? tp : fp) += 1.0;
      ++i;
    }
    const double j = tp / pos - fp / neg;
    if (j > best_j) {
      best_j = j;
      best = t;
    }
  }
  return best;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::kInvalidArgument, "quantile level must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double sorted_quantile(std::span<const double> sorted, double p) {
  require(!sorted.empty(), ErrorCode::kEmptyInput, "quantile of empty data");
  p = std::clamp(p, 0.0, 1.0);
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> bca_interval(std::span<const double> sorted, double z0, double a,
                                       double level) {
  require(level > 0.0 && level < 1.0, ErrorCode::kInvalidArgument, "confidence level must lie in (0, 1)");
  auto adjusted = [&](double tail) {
    const double z = z0 + normal_quantile(tail);
    const double denom = 1.0 - a * z;
    // A non-positive denominator means the acceleration overwhelms the
    // correction; send the endpoint to the matching extreme.
    if (denom <= 0.0) return tail < 0.5 ? 0.0 : 1.0;
    return normal_cdf(z0 + z / denom);
  };
  const double alpha = 0.5 * (1.0 - level);
  return {sorted_quantile(sorted, adjusted(alpha)), sorted_quantile(sorted, adjusted(1.0 - alpha))};
}

Interval bca_ci(const MetricFn& metric, std::span<const int> labels, std::span<const double> scores,
                const BootstrapOptions& o) {
  check_inputs(labels, scores);
  require(o.replicates >= 1, ErrorCode::kInvalidArgument, "need at least one bootstrap replicate");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  require(pos.size() >= 2 && neg.size() >= 2, ErrorCode::kSingleClass,
          "bootstrap needs at least two samples per class");

  Interval out;
  out.point = metric(labels, scores);
  const std::size_t n = labels.size();

  std::vector<int> boot_labels(n);
  std::vector<double> boot_scores(n);
  for (std::size_t i = 0; i < pos.size(); ++i) boot_labels[i] = 1;
  for (std::size_t i = pos.size(); i < n; ++i) boot_labels[i] = 0;
  std::vector<double> reps(o.replicates);
  for (std::size_t b = 0; b < o.replicates; ++b) {
    StreamRng rng(derive_seed(o.seed, b));
    for (std::size_t i = 0; i < pos.size(); ++i) boot_scores[i] = scores[pos[rng.below(pos.size())]];
    for (std::size_t i = 0; i < neg.size(); ++i) {
      boot_scores[pos.size() + i] = scores[neg[rng.below(neg.size())]];
    }
    reps[b] = metric(boot_labels, boot_scores);
  }
  std::sort(reps.begin(), reps.end());
  if (reps.front() == reps.back()) {
    out.lower = out.upper = out.point;
    out.degenerate = true;
    return out;
  }

  const double below = static_cast<double>(std::lower_bound(reps.begin(), reps.end(), out.point) - reps.begin());
  const double equal =
      static_cast<double>(std::upper_bound(reps.begin(), reps.end(), out.point) - reps.begin()) - below;
  const double B = static_cast<double>(o.replicates);
  const double fraction = std::clamp((below + 0.5 * equal) / B, 0.5 / B, 1.0 - 0.5 / B);
  out.z0 = normal_quantile(fraction);

  // Jackknife over individual samples.
  std::vector<int> jl(n - 1);
  std::vector<double> js(n - 1), theta(n);
  for (std::size_t leave = 0; leave < n; ++leave) {
    for (std::size_t i = 0, k = 0; i < n; ++i) {
      if (i == leave) continue;
      jl[k] = labels[i];
      js[k++] = scores[i];
    }
    theta[leave] = metric(jl, js);
  }
  const double mean = std::accumulate(theta.begin(), theta.end(), 0.0) / static_cast<double>(n);
  double s2 = 0.0, s3 = 0.0;
  for (double t : theta) {
    const double d = mean - t;
    s2 += d * d;
    s3 += d * d * d;
  }
  out.acceleration = s2 > 0.0 ? s3 / (6.0 * std::pow(s2, 1.5)) : 0.0;

  std::tie(out.lower, out.upper) = bca_interval(reps, out.z0, out.acceleration, o.level);
  return out;
}

PermutationResult permutation_test(const MetricFn& metric, std::span<const int> labels,
                                   std::span<const double> a, std::span<const double> b,
                                   const PermutationOptions& o) {
  require(a.size() == labels.size() && b.size() == labels.size(), ErrorCode::kUnpaired,
          "paired score lists must have equal length");
  check_inputs(labels, a);
  check_inputs(labels, b);
  PermutationResult r;
  r.observed = std::abs(metric(labels, a) - metric(labels, b));
  const std::size_t n = labels.size();
  std::vector<double> pa(n), pb(n);
  std::size_t at_least = 0;
  for (std::size_t k = 0; k < o.permutations; ++k) {
    StreamRng rng(derive_seed(o.seed, k));
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) word = rng.bits();
      const bool swap = (word >> (i % 64)) & 1u;
      pa[i] = swap ? b[i] : a[i];
      pb[i] = swap ? a[i] : b[i];
    }
    // The tolerance absorbs rounding differences between algebraically equal
    // statistics, e.g. the identity permutation.
    if (std::abs(metric(labels, pa) - metric(labels, pb)) >= r.observed - 1e-12) ++at_least;
  }
  r.p_value = static_cast<double>(1 + at_least) / static_cast<double>(1 + o.permutations);
  r.reject = r.p_value < o.alpha;
  return r;
}

std::vector<int> labels_of(std::span<const PredictionRecord> records) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

std::vector<double> scores_of(std::span<const PredictionRecord> records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.score);
  return out;
}

PermutationResult permutation_test(const MetricFn& metric, std::span<const PredictionRecord> a,
                                   std::span<const PredictionRecord> b,
                                   const PermutationOptions& options) {
  require(a.size() == b.size(), ErrorCode::kUnpaired,
          "record lists differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i].sample_id == b[i].sample_id && a[i].label == b[i].label, ErrorCode::kUnpaired,
            "record " + std::to_string(i) + " pairs sample '" + a[i].sample_id + "' with '" +
                b[i].sample_id + "'");
  }
  const auto labels = labels_of(a);
  return permutation_test(metric, labels, scores_of(a), scores_of(b), options);
}

std::vector<PredictionRecord> aggregate_by_patient(std::span<const PredictionRecord> records) {
  std::vector<PredictionRecord> out;
  std::vector<std::size_t> counts;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.try_emplace(r.patient_id, out.size());
    if (inserted) {
      out.push_back({r.patient_id, r.patient_id, r.label, 0.0});
      counts.push_back(0);
    }
    PredictionRecord& p = out[it->second];
    require(p.label == r.label, ErrorCode::kMalformed, "patient '" + r.patient_id + "' has mixed labels");
    p.score += r.score;
    ++counts[it->second];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].score /= static_cast<double>(counts[i]);
  return out;
}

MetricsReport evaluate_predictions(std::span<const int> labels, std::span<const double> scores,
                                   double threshold, const BootstrapOptions& options) {
  MetricsReport report;
  report.threshold = threshold;
  report.samples = labels.size();
  report.replicates = options.replicates;
  report.seed = options.seed;
  auto interval = [&](const MetricFn& fn) {
    Interval i = bca_ci(fn, labels, scores, options);
    i.lower = std::min(i.lower, i.point);
    i.upper = std::max(i.upper, i.point);
    return i;
  };
  report.auc = interval(roc_auc);
  report.sensitivity =
      interval([threshold](auto l, auto s) { return threshold_metrics(l, s, threshold).sensitivity; });
  report.specificity =
      interval([threshold](auto l, auto s) { return threshold_metrics(l, s, threshold).specificity; });
  report.f1 = interval([threshold](auto l, auto s) { return threshold_metrics(l, s, threshold).f1; });
  return report;
}

namespace {

struct NamedInterval {
  const char* name;
  const Interval* interval;
};

std::vector<NamedInterval> metric_rows(const MetricsReport& r) {
  return {{"auc", &r.auc}, {"sensitivity", &r.sensitivity}, {"specificity", &r.specificity}, {"f1", &r.f1}};
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string report_tsv(const MetricsReport& r) {
  std::string out = "# " + r.level + ", " + std::to_string(r.samples) + " samples, threshold " +
                    fixed(r.threshold) + ", BCa " + std::to_string(r.replicates) + " replicates, seed " +
                    std::to_string(r.seed) + "\n";
  out += "metric\tpoint\tci_low\tci_high\n";
  for (const auto& [name, i] : metric_rows(r)) {
    out += std::string(name) + "\t" + fixed(i->point) + "\t" + fixed(i->lower) + "\t" + fixed(i->upper) + "\n";
  }
  return out;
}

std::string report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["level"] = r.level;
  j["samples"] = r.samples;
  j["threshold"] = r.threshold;
  j["bootstrap_replicates"] = r.replicates;
  j["seed"] = r.seed;
  for (const auto& [name, i] : metric_rows(r)) {
    j["metrics"][name] = {{"point", i->point},
                          {"ci_low", i->lower},
                          {"ci_high", i->upper},
                          {"z0", i->z0},
                          {"acceleration", i->acceleration},
                          {"degenerate", i->degenerate}};
  }
  return j.dump(2);
}

}  // namespace ssrc
