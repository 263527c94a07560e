// ssrcnet: generate synthetic hyperspectral data, train and evaluate the
// classifier variants, and run the statistical comparisons from the shell.

#include <cstdio>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "ssrc/binary_io.hpp"
#include "ssrc/commands.hpp"
#include "ssrc/error.hpp"

namespace {

using namespace ssrc;

void print_line(const std::string& line) { std::cerr << line << '\n'; }

struct TrainFlags {
  std::string data, out, from_manifest;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::string variant = "cgru-cnn";
  std::string aggregation;
  bool bidirectional = false;
  std::size_t hidden = 16;
  std::size_t initial_filters = 16;
  std::size_t dense_blocks = 3;
  std::size_t dense_layers = 4;
  std::size_t growth = 12;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 30;
  std::vector<double> grid_lr;
  std::vector<std::size_t> grid_hidden;
  std::size_t subsample = 1;
  std::string input;
  std::size_t patch_size = 32;
  std::size_t margin = 4;
  std::size_t stride = 8;
  std::string containment = "center";
  std::string remainder = "train";
  std::optional<std::size_t> fold;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "Dataset directory written by 'gen'");
    app.add_option("--out", out, "Run directory");
    app.add_option("--from-manifest", from_manifest, "Re-run the configuration stored in a run manifest");
    app.add_option("--seed", seed, "Seed for initialisation and batch order");
    app.add_option("--split-seed", split_seed, "Seed for the patient split");
    app.add_option("--variant", variant,
                   "cnn2d-rgb | cnn2d-hsi | cnn3d-hsi | cgru-only | cgru-cnn | cnn-cgru");
    app.add_option("--aggregation", aggregation, "last | mean | max (default last where applicable)");
    app.add_flag("--bidirectional", bidirectional, "Scan the bands in both directions");
    app.add_option("--hidden-dim", hidden, "CGRU hidden channels per direction");
    app.add_option("--initial-filters", initial_filters, "Filters of the first convolution");
    app.add_option("--dense-blocks", dense_blocks, "Number of dense blocks");
    app.add_option("--dense-layers", dense_layers, "Layers per dense block");
    app.add_option("--growth", growth, "Dense block growth rate");
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_option("--batch", batch, "Mini-batch size");
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--grid-lr", grid_lr, "Learning rates to search")->delimiter(',');
    app.add_option("--grid-hidden", grid_hidden, "Hidden dimensions to search")->delimiter(',');
    app.add_option("--subsample", subsample, "Keep every n-th band");
    app.add_option("--input", input, "hsi | rgb (default rgb for cnn2d-rgb, else hsi)");
    app.add_option("--patch-size", patch_size, "Patch edge in pixels");
    app.add_option("--margin", margin, "Lesion erosion margin in pixels");
    app.add_option("--stride", stride, "Patch grid stride in pixels");
    app.add_option("--containment", containment, "center | full");
    app.add_option("--remainder-policy", remainder, "train | exclude");
    app.add_option("--fold", fold, "Run a single fold (0-2)");
  }

  RunConfig resolve() const {
    if (!from_manifest.empty()) {
      RunConfig c = run_config_from_json(read_text(from_manifest));
      if (!out.empty()) c.out = out;
      if (!data.empty()) c.data = data;
      return c;
    }
    require(!data.empty() && !out.empty(), ErrorCode::kInvalidArgument, "--data and --out are required");
    RunConfig c;
    c.data = data;
    c.out = out;
    c.seed = seed;
    c.split_seed = split_seed;
    c.model.variant = parse_variant(variant);
    if (!aggregation.empty()) {
      c.model.aggregation = parse_aggregation(aggregation);
    } else if (has_aggregation(c.model.variant)) {
      c.model.aggregation = Aggregation::kLast;
    }
    c.model.bidirectional = bidirectional;
    c.model.hidden = hidden;
    c.model.initial_filters = initial_filters;
    c.model.dense_blocks = dense_blocks;
    c.model.dense.layers = dense_layers;
    c.model.dense.growth = growth;
    const bool rgb = c.model.variant == Variant::kCnn2dRgb;
    c.model.bands = rgb ? 3 : c.model.bands;
    c.model.validate();
    c.train = {lr, batch, epochs, 0};
    c.grid_lr = grid_lr;
    c.grid_hidden = grid_hidden;
    c.pipeline.subsample = subsample;
    c.pipeline.input = input.empty() ? (rgb ? InputMode::kRgb : InputMode::kHsi) : parse_input_mode(input);
    c.pipeline.patches = {patch_size, margin, stride, Containment::kCenter};
    if (containment == "full") {
      c.pipeline.patches.containment = Containment::kFull;
    } else {
      require(containment == "center", ErrorCode::kUnknownMode, "unknown containment '" + containment + "'");
    }
    c.remainder = parse_remainder_policy(remainder);
    c.fold = fold;
    return c;
  }
};

struct EvalFlags {
  std::string threshold = "youden";
  std::size_t bootstrap = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
  bool patient_level = false;

  void attach(CLI::App& app) {
    app.add_option("--threshold-policy", threshold, "youden | <fixed threshold>");
    app.add_option("--bootstrap", bootstrap, "BCa bootstrap replicates");
    app.add_option("--level", level, "Confidence level");
    app.add_option("--eval-seed", seed, "Seed for the bootstrap");
    app.add_flag("--patient-level", patient_level, "Average patch scores per patient first");
  }

  EvalOptions resolve() const {
    EvalOptions o;
    o.threshold = ThresholdPolicy::parse(threshold);
    o.bootstrap = bootstrap;
    o.level = level;
    o.seed = seed;
    o.patient_level = patient_level;
    return o;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Spectral-spatial recurrent classifiers for hyperspectral lesion patches"};
  app.require_subcommand(1);

  // gen
  SynthSpec spec;
  std::string gen_out, signal = "rgb-invisible";
  CLI::App* gen = app.add_subcommand("gen", "Write a synthetic HSICUBE1 dataset");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--patients", spec.patients, "Number of patients");
  gen->add_option("--cubes-per-patient", spec.cubes_per_patient, "Cubes per patient");
  gen->add_option("--class-ratio", spec.class_ratio, "Fraction of malignant patients, in (0, 1)");
  gen->add_option("--signal", signal, "spectral-slope | band-difference | rgb-invisible");
  gen->add_option("--noise", spec.noise, "Per-voxel noise standard deviation");
  gen->add_option("--amplitude", spec.amplitude, "Class signature amplitude");
  gen->add_option("--height", spec.height, "Cube height");
  gen->add_option("--width", spec.width, "Cube width");
  gen->add_option("--signal-bands", spec.signal_bands, "Bands carrying the band-difference signal")
      ->delimiter(',');
  gen->add_option("--seed", spec.seed, "Generator seed");

  // train
  TrainFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "Train one model per cross-validation fold");
  train_flags.attach(*train);

  // eval
  std::string eval_run, eval_data, eval_out, eval_input;
  std::optional<std::size_t> eval_subsample;
  EvalFlags eval_flags;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a trained run on its test patients");
  eval->add_option("--run", eval_run, "Run directory written by 'train'")->required();
  eval->add_option("--data", eval_data, "Dataset directory (default: the one used for training)");
  eval->add_option("--out", eval_out, "Report directory (default: the run directory)");
  eval->add_option("--input", eval_input, "hsi | rgb (default: as trained)");
  eval->add_option("--subsample", eval_subsample, "Keep every n-th band (default: as trained)");
  eval_flags.attach(*eval);

  // compare
  std::string cmp_a, cmp_b, cmp_out;
  PermutationOptions perm;
  CLI::App* compare = app.add_subcommand("compare", "Paired permutation tests between two evaluated runs");
  compare->add_option("--a", cmp_a, "First evaluation directory")->required();
  compare->add_option("--b", cmp_b, "Second evaluation directory")->required();
  compare->add_option("--out", cmp_out, "Where to write compare.tsv");
  compare->add_option("--permutations", perm.permutations, "Number of random permutations");
  compare->add_option("--alpha", perm.alpha, "Significance level");
  compare->add_option("--seed", perm.seed, "Permutation seed");

  // band-sweep
  TrainFlags sweep_flags;
  EvalFlags sweep_eval;
  std::vector<std::size_t> factors{1, 2, 3, 4};
  CLI::App* sweep = app.add_subcommand("band-sweep", "Train and evaluate at several band subsampling factors");
  sweep_flags.attach(*sweep);
  sweep_eval.attach(*sweep);
  sweep->add_option("--factors", factors, "Subsampling factors")->delimiter(',');

  // gradcheck
  std::size_t seed_count = 20;
  std::uint64_t first_seed = 0;
  std::string gc_out, only;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and numerical gradients");
  gradcheck->add_option("--seeds", seed_count, "Number of seeds per case");
  gradcheck->add_option("--first-seed", first_seed, "First seed");
  gradcheck->add_option("--only", only, "Run only the named case");
  gradcheck->add_option("--out", gc_out, "Write the report to this TSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    spec.signal = parse_signal_kind(signal);
    cmd_gen(spec, gen_out);
    std::cout << "wrote " << spec.patients * spec.cubes_per_patient << " cubes to " << gen_out << '\n';
  } else if (train->parsed()) {
    const RunConfig config = train_flags.resolve();
    for (const FoldTraining& f : cmd_train(config, print_line)) {
      std::printf("fold %zu: lr %g hidden %zu best epoch %zu validation auc %.4f\n", f.fold, f.grid.options.lr,
                  f.grid.best.model.config().hidden, f.grid.best.best_epoch, f.grid.best.best_validation_auc);
    }
  } else if (eval->parsed()) {
    EvalOptions o = eval_flags.resolve();
    if (!eval_data.empty()) o.data = eval_data;
    if (!eval_out.empty()) o.out = eval_out;
    if (!eval_input.empty()) o.input = parse_input_mode(eval_input);
    o.subsample = eval_subsample;
    const Evaluation e = cmd_eval(eval_run, o, print_line);
    std::cout << report_tsv(e.pooled);
  } else if (compare->parsed()) {
    std::printf("metric\tvalue_a\tvalue_b\tp_value\treject\n");
    for (const ComparisonRow& r : cmd_compare(cmp_a, cmp_b, cmp_out, perm)) {
      std::printf("%s\t%.6f\t%.6f\t%.6f\t%s\n", r.metric.c_str(), r.value_a, r.value_b, r.test.p_value,
                  r.test.reject ? "yes" : "no");
    }
  } else if (sweep->parsed()) {
    const RunConfig config = sweep_flags.resolve();
    std::printf("factor\tbands\tauc\tci_low\tci_high\n");
    for (const SweepRow& r : cmd_band_sweep(config, sweep_eval.resolve(), factors, print_line)) {
      std::printf("%zu\t%zu\t%.6f\t%.6f\t%.6f\n", r.factor, r.bands, r.auc.point, r.auc.lower, r.auc.upper);
    }
  } else if (gradcheck->parsed()) {
    std::vector<GradcheckCase> cases = default_gradcheck_cases();
    if (!only.empty()) {
      std::erase_if(cases, [&](const GradcheckCase& c) { return c.name != only; });
      require(!cases.empty(), ErrorCode::kInvalidArgument, "no gradient-check case named '" + only + "'");
    }
    std::vector<std::uint64_t> seeds(seed_count);
    std::iota(seeds.begin(), seeds.end(), first_seed);
    const GradcheckReport report = cmd_gradcheck(cases, seeds);
    std::cout << report.to_tsv();
    if (!gc_out.empty()) write_text(gc_out, report.to_tsv());
    if (!report.passed) {
      std::cerr << "gradient check failed\n";
      return static_cast<int>(ErrorCategory::kNumerical);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ssrc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ssrc::category_of(e.code()));
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ssrc::ErrorCategory::kData);
  }
}
