#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ssrc/gradcheck.hpp"
#include "ssrc/hsi.hpp"
#include "ssrc/model.hpp"
#include "ssrc/splits.hpp"
#include "ssrc/stats.hpp"
#include "ssrc/synth.hpp"
#include "ssrc/train.hpp"

namespace ssrc {

namespace fs = std::filesystem;

// ---- datasets ---------------------------------------------------------------

/// Writes <out>/<patient>/cube_<k>.hsi for every generated cube plus
/// <out>/manifest.json. Identical specs give byte-identical directories.
void cmd_gen(const SynthSpec& spec, const fs::path& out);

struct Dataset {
  std::vector<HsiCube> cubes;
  /// Relative file of each cube, e.g. "P0003/cube_1.hsi".
  std::vector<std::string> files;
};

/// Loads every cube listed in <dir>/manifest.json.
Dataset load_dataset(const fs::path& dir);

/// Patches with stable sample ids "<cube file>@<top>,<left>".
struct SampleSet {
  PatchSet patches;
  std::vector<std::string> sample_ids;
};

enum class InputMode { kHsi, kRgb };
InputMode parse_input_mode(std::string_view name);
std::string_view to_string(InputMode mode);

struct PatchPipeline {
  PatchOptions patches{};
  std::size_t subsample = 1;
  InputMode input = InputMode::kHsi;
};

/// Extracts, subsamples and (for kRgb) converts the patches of the cubes
/// whose patient ids are listed, in dataset order.
SampleSet build_samples(const Dataset& data, const std::vector<std::string>& patients,
                        const PatchPipeline& pipeline);

// ---- runs -------------------------------------------------------------------

/// How the operating threshold for sensitivity/specificity/F1 is set.
struct ThresholdPolicy {
  /// Empty means Youden's J on the validation predictions.
  std::optional<double> fixed;

  /// "youden" or a number.
  static ThresholdPolicy parse(std::string_view text);
  std::string to_string() const;
};

struct RunConfig {
  fs::path data;
  fs::path out;
  /// Model initialisation and batch order; each fold derives its own streams.
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  /// `bands` and `seed` are filled in per fold from the data and `seed`.
  ModelConfig model{};
  TrainOptions train{};
  std::vector<double> grid_lr;
  std::vector<std::size_t> grid_hidden;
  PatchPipeline pipeline{};
  RemainderPolicy remainder = RemainderPolicy::kTrain;
  /// Restrict to one cross-validation fold; all three when unset.
  std::optional<std::size_t> fold;

  std::vector<std::size_t> folds() const;
};

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(std::string_view json);

/// Called with human-readable progress lines.
using ProgressFn = std::function<void(const std::string&)>;

struct FoldTraining {
  std::size_t fold = 0;
  GridResult grid;
};

/// Trains one model per selected fold. Writes <out>/manifest.json,
/// <out>/splits.tsv and per fold <out>/fold<k>/{model.ckpt, model.ckpt.json,
/// train_log.tsv, grid.tsv}.
std::vector<FoldTraining> cmd_train(const RunConfig& config, const ProgressFn& progress = {});

struct EvalOptions {
  /// Overrides for what the run manifest recorded.
  std::optional<fs::path> data;
  std::optional<InputMode> input;
  std::optional<std::size_t> subsample;
  /// Where reports go; the run directory when unset.
  std::optional<fs::path> out;
  ThresholdPolicy threshold{};
  std::size_t bootstrap = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
  /// Average patch scores per patient before computing metrics.
  bool patient_level = false;
};

struct FoldEvaluation {
  std::size_t fold = 0;
  std::vector<PredictionRecord> validation;
  std::vector<PredictionRecord> test;
  double threshold = 0.5;
  MetricsReport report;
};

struct Evaluation {
  std::vector<FoldEvaluation> folds;
  /// All folds' test predictions; with the Youden policy the threshold comes
  /// from the pooled validation predictions.
  std::vector<PredictionRecord> pooled_test;
  double pooled_threshold = 0.5;
  MetricsReport pooled;
};

/// Evaluates the checkpoints of a training run directory. Writes
/// fold<k>/{predictions.tsv, report.tsv, report.json} and the same three
/// files for the pooled folds.
Evaluation cmd_eval(const fs::path& run_dir, const EvalOptions& options = {}, const ProgressFn& progress = {});

struct ComparisonRow {
  std::string metric;
  double value_a = 0.0;
  double value_b = 0.0;
  PermutationResult test;
};

/// Paired permutation tests on the pooled test predictions of two evaluated
/// runs: AUC on scores, the threshold metrics on each run's own thresholded
/// predictions. Writes <out>/compare.tsv when `out` is non-empty.
std::vector<ComparisonRow> cmd_compare(const fs::path& run_a, const fs::path& run_b, const fs::path& out,
                                       const PermutationOptions& options);

struct SweepRow {
  std::size_t factor = 1;
  std::size_t bands = 0;
  Interval auc;
};

/// Trains and evaluates one run per subsampling factor under
/// <out>/every<factor>; writes <out>/band_sweep.tsv.
std::vector<SweepRow> cmd_band_sweep(const RunConfig& base, const EvalOptions& eval,
                                     const std::vector<std::size_t>& factors, const ProgressFn& progress = {});

// ---- gradient checks ----------------------------------------------------------

struct GradcheckCase {
  std::string name;
  /// "layer" or "variant".
  std::string kind;
  std::function<GradCheckResult(std::uint64_t seed)> run;
};

/// Every layer and primitive plus all six model variants on 8x8x6 inputs.
std::vector<GradcheckCase> default_gradcheck_cases();

struct GradcheckEntry {
  std::string name;
  std::string kind;
  double max_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool passed = true;
  std::string to_tsv() const;
};

/// Runs each case once per seed; an entry aggregates a case over all seeds.
GradcheckReport cmd_gradcheck(const std::vector<GradcheckCase>& cases, const std::vector<std::uint64_t>& seeds);

}  // namespace ssrc
