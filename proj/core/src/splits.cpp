#include "ssrc/splits.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ssrc/error.hpp"
#include "ssrc/rng.hpp"

namespace ssrc {

RemainderPolicy parse_remainder_policy(std::string_view name) {
  if (name == "train") return RemainderPolicy::kTrain;
  if (name == "exclude") return RemainderPolicy::kExclude;
  fail(ErrorCode::kUnknownMode, "unknown remainder policy '" + std::string(name) + "'");
}

std::string_view to_string(RemainderPolicy policy) {
  return policy == RemainderPolicy::kTrain ? "train" : "exclude";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kTest: return "test";
    case Role::kValidation: return "validation";
    case Role::kTrain: return "train";
    case Role::kExcluded: return "excluded";
  }
  return "unknown";
}

SplitQuota quota_for(std::size_t malignant, std::size_t benign) {
  constexpr SplitQuota kClinical{};
  if (malignant == 15 && benign == 83) return kClinical;
  const double scale = std::min(static_cast<double>(malignant) / 15.0,
                                static_cast<double>(benign) / 83.0);
  auto scaled = [&](std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scale * static_cast<double>(n))));
  };
  SplitQuota q;
  q.test_malignant = scaled(kClinical.test_malignant);
  q.test_benign = scaled(kClinical.test_benign);
  q.validation_malignant = scaled(kClinical.validation_malignant);
  q.validation_benign = scaled(kClinical.validation_benign);
  require(3 * q.subset_malignant() <= malignant && 3 * q.subset_benign() <= benign,
          ErrorCode::kInfeasibleQuota,
          "a cohort of " + std::to_string(malignant) + " malignant / " + std::to_string(benign) +
              " benign patients cannot fill three subsets of " + std::to_string(q.subset_malignant()) +
              " malignant / " + std::to_string(q.subset_benign()) + " benign");
  return q;
}

Fold SplitPlan::fold(std::size_t k) const {
  require(k < 3, ErrorCode::kInvalidArgument, "fold index must be 0, 1 or 2");
  Fold f;
  auto ids = [](const std::vector<PatientRecord>& v, std::vector<std::string>& out) {
    for (const auto& p : v) out.push_back(p.id);
  };
  ids(subsets[k].test, f.test);
  ids(subsets[k].validation, f.validation);
  for (std::size_t other = 0; other < 3; ++other) {
    if (other == k) continue;
    ids(subsets[other].test, f.train);
    ids(subsets[other].validation, f.train);
  }
  if (policy == RemainderPolicy::kTrain) ids(remainder, f.train);
  return f;
}

std::string SplitPlan::to_tsv() const {
  std::string out;
  auto row = [&](const PatientRecord& p, const std::string& subset, Role role) {
    out += p.id + "\t" + subset + "\t" + std::string(to_string(role)) + "\t" +
           (p.label == 1 ? "malignant" : "benign") + "\n";
  };
  for (std::size_t k = 0; k < 3; ++k) {
    for (const auto& p : subsets[k].test) row(p, std::to_string(k), Role::kTest);
    for (const auto& p : subsets[k].validation) row(p, std::to_string(k), Role::kValidation);
  }
  const Role rest = policy == RemainderPolicy::kTrain ? Role::kTrain : Role::kExcluded;
  for (const auto& p : remainder) row(p, "-", rest);
  return out;
}

SplitPlan make_splits(const std::vector<PatientRecord>& patients, std::uint64_t seed,
                      RemainderPolicy policy) {
  std::set<std::string> seen;
  std::vector<PatientRecord> malignant, benign;
  for (const auto& p : patients) {
    require(seen.insert(p.id).second, ErrorCode::kInvalidArgument, "duplicate patient id '" + p.id + "'");
    require(p.label == 0 || p.label == 1, ErrorCode::kLabelOutOfRange, "label must be 0 or 1");
    (p.label == 1 ? malignant : benign).push_back(p);
  }
  SplitPlan plan;
  plan.quota = quota_for(malignant.size(), benign.size());
  plan.policy = policy;
  plan.seed = seed;

  Rng rng(derive_seed(seed, 0x5B1175));
  rng.shuffle(malignant);
  rng.shuffle(benign);
  std::size_t next_m = 0, next_b = 0;
  auto take = [](std::vector<PatientRecord>& from, std::size_t& next, std::size_t n,
                 std::vector<PatientRecord>& to) {
    to.insert(to.end(), from.begin() + static_cast<std::ptrdiff_t>(next),
              from.begin() + static_cast<std::ptrdiff_t>(next + n));
    next += n;
  };
  const SplitQuota& q = plan.quota;
  for (auto& subset : plan.subsets) {
    take(malignant, next_m, q.test_malignant, subset.test);
    take(benign, next_b, q.test_benign, subset.test);
    take(malignant, next_m, q.validation_malignant, subset.validation);
    take(benign, next_b, q.validation_benign, subset.validation);
  }
  take(malignant, next_m, malignant.size() - next_m, plan.remainder);
  take(benign, next_b, benign.size() - next_b, plan.remainder);
  return plan;
}

}  // namespace ssrc
