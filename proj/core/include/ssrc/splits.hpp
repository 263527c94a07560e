#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ssrc/hsi.hpp"

namespace ssrc {

struct PatientRecord {
  std::string id;
  Label label = 0;
};

/// What happens to patients that are not drawn into any of the three subsets.
enum class RemainderPolicy { kTrain, kExclude };

RemainderPolicy parse_remainder_policy(std::string_view name);
std::string_view to_string(RemainderPolicy policy);

/// Per-subset class counts for the test and validation parts.
struct SplitQuota {
  std::size_t test_malignant = 3;
  std::size_t test_benign = 8;
  std::size_t validation_malignant = 2;
  std::size_t validation_benign = 6;

  std::size_t subset_malignant() const { return test_malignant + validation_malignant; }
  std::size_t subset_benign() const { return test_benign + validation_benign; }
};

/// The clinical quotas for a 15 malignant / 83 benign cohort, scaled down
/// proportionally for other cohorts while keeping at least one patient of
/// each class in every test and validation part. Throws kInfeasibleQuota when
/// three subsets cannot be filled.
SplitQuota quota_for(std::size_t malignant, std::size_t benign);

enum class Role { kTest, kValidation, kTrain, kExcluded };
std::string_view to_string(Role role);

/// Patients of one fold: test and validation come from subset k, training
/// from the other two subsets plus (under kTrain) the remainder.
struct Fold {
  std::vector<std::string> train, validation, test;
};

struct SplitPlan {
  struct Subset {
    std::vector<PatientRecord> test;
    std::vector<PatientRecord> validation;
  };

  std::array<Subset, 3> subsets;
  /// Patients in no subset.
  std::vector<PatientRecord> remainder;
  SplitQuota quota;
  RemainderPolicy policy = RemainderPolicy::kTrain;
  std::uint64_t seed = 0;

  Fold fold(std::size_t k) const;

  /// One line per patient: id, subset index ("-" for the remainder), role,
  /// label. Rows are ordered by subset, then role, then draw order.
  std::string to_tsv() const;
};

/// Deterministic per seed. Patient ids must be unique.
SplitPlan make_splits(const std::vector<PatientRecord>& patients, std::uint64_t seed,
                      RemainderPolicy policy = RemainderPolicy::kTrain);

}  // namespace ssrc
