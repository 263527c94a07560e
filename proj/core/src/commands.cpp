#include "ssrc/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ssrc/binary_io.hpp"
#include "ssrc/error.hpp"
#include "ssrc/rng.hpp"

namespace ssrc {

using ojson = nlohmann::ordered_json;

namespace {

template <typename Fn>
auto parse_json(std::string_view text, const std::string& what, Fn&& fn) {
  try {
    return fn(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, what + ": " + e.what());
  }
}

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void say(const ProgressFn& progress, const std::string& line) {
  if (progress) progress(line);
}

fs::path fold_dir(const fs::path& root, std::size_t k) { return root / ("fold" + std::to_string(k)); }

}  // namespace

// ---- datasets ---------------------------------------------------------------

void cmd_gen(const SynthSpec& spec, const fs::path& out) {
  const std::vector<HsiCube> cubes = synth_generate(spec);
  fs::create_directories(out);

  ojson manifest;
  manifest["format"] = "HSICUBE1";
  ojson& s = manifest["synth"];
  s["patients"] = spec.patients;
  s["cubes_per_patient"] = spec.cubes_per_patient;
  s["class_ratio"] = spec.class_ratio;
  s["signal"] = to_string(spec.signal);
  s["noise"] = spec.noise;
  s["amplitude"] = spec.amplitude;
  s["height"] = spec.height;
  s["width"] = spec.width;
  s["wavelengths"] = spec.wavelengths;
  s["signal_bands"] = spec.signal_bands;
  s["seed"] = spec.seed;

  ojson files = ojson::array();
  std::map<std::string, std::size_t> per_patient;
  for (const HsiCube& cube : cubes) {
    const std::string rel = cube.patient_id + "/cube_" + std::to_string(per_patient[cube.patient_id]++) + ".hsi";
    fs::create_directories(out / cube.patient_id);
    write_file(out / rel, write_cube(cube));
    files.push_back({{"file", rel}, {"patient", cube.patient_id}, {"label", cube.label}});
  }
  manifest["cubes"] = std::move(files);
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const auto rels = parse_json(read_text(dir / "manifest.json"), "dataset manifest", [](const auto& j) {
    std::vector<std::pair<std::string, Label>> out;
    for (const auto& c : j.at("cubes")) out.emplace_back(c.at("file").template get<std::string>(), c.at("label").template get<int>());
    return out;
  });
  require(!rels.empty(), ErrorCode::kEmptyInput, "dataset manifest lists no cubes");
  Dataset data;
  std::map<std::string, Label> labels;
  for (const auto& [rel, label] : rels) {
    HsiCube cube = read_cube(read_file(dir / rel));
    require(cube.label == label, ErrorCode::kMalformed, rel + ": label disagrees with the manifest");
    const auto [it, fresh] = labels.emplace(cube.patient_id, cube.label);
    require(fresh || it->second == cube.label, ErrorCode::kMalformed,
            "patient " + cube.patient_id + " has cubes with different labels");
    data.cubes.push_back(std::move(cube));
    data.files.push_back(rel);
  }
  return data;
}

namespace {

std::vector<PatientRecord> patients_of(const Dataset& data) {
  std::vector<PatientRecord> out;
  std::set<std::string> seen;
  for (const HsiCube& c : data.cubes) {
    if (seen.insert(c.patient_id).second) out.push_back({c.patient_id, c.label});
  }
  return out;
}

}  // namespace

InputMode parse_input_mode(std::string_view name) {
  if (name == "hsi") return InputMode::kHsi;
  if (name == "rgb") return InputMode::kRgb;
  fail(ErrorCode::kUnknownMode, "unknown input mode '" + std::string(name) + "' (expected hsi or rgb)");
}

std::string_view to_string(InputMode mode) { return mode == InputMode::kRgb ? "rgb" : "hsi"; }

SampleSet build_samples(const Dataset& data, const std::vector<std::string>& patients,
                        const PatchPipeline& pipeline) {
  require(pipeline.subsample >= 1, ErrorCode::kInvalidArgument, "subsampling factor must be positive");
  const std::set<std::string> wanted(patients.begin(), patients.end());
  SampleSet out;
  for (std::size_t c = 0; c < data.cubes.size(); ++c) {
    const HsiCube& cube = data.cubes[c];
    if (!wanted.contains(cube.patient_id)) continue;
    PatchSet p = subsample_bands(extract_patches(cube, pipeline.patches), pipeline.subsample);
    if (pipeline.input == InputMode::kRgb) p = derive_rgb(p);
    for (const auto& [top, left] : p.offsets) {
      out.sample_ids.push_back(data.files[c] + "@" + std::to_string(top) + "," + std::to_string(left));
    }
    if (out.patches.count() == 0) {
      out.patches = std::move(p);
    } else {
      out.patches.append(p);
    }
  }
  require(out.patches.count() > 0, ErrorCode::kEmptyInput, "no patches for the selected patients");
  return out;
}

// ---- run configuration ------------------------------------------------------------

ThresholdPolicy ThresholdPolicy::parse(std::string_view text) {
  if (text == "youden") return {};
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(text), &used);
    if (used == text.size() && std::isfinite(v)) return {v};
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kUnknownMode, "threshold policy must be 'youden' or a number, got '" + std::string(text) + "'");
}

std::string ThresholdPolicy::to_string() const { return fixed ? format("%.17g", *fixed) : "youden"; }

std::vector<std::size_t> RunConfig::folds() const {
  if (fold) {
    require(*fold < 3, ErrorCode::kInvalidArgument, "fold must be 0, 1 or 2");
    return {*fold};
  }
  return {0, 1, 2};
}

namespace {

ojson run_config_json(const RunConfig& c) {
  ojson j;
  j["data"] = c.data.string();
  j["out"] = c.out.string();
  j["seed"] = c.seed;
  j["split_seed"] = c.split_seed;
  ModelConfig model = c.model;
  if (model.variant == Variant::kCnn2dRgb) model.bands = 3;
  j["model"] = ojson::parse(config_to_json(model));
  j["train"] = {{"lr", c.train.lr}, {"batch", c.train.batch}, {"epochs", c.train.epochs}};
  j["grid_lr"] = c.grid_lr;
  j["grid_hidden"] = c.grid_hidden;
  const PatchOptions& p = c.pipeline.patches;
  j["patches"] = {{"size", p.size},
                  {"margin", p.margin},
                  {"stride", p.stride},
                  {"containment", p.containment == Containment::kFull ? "full" : "center"}};
  j["subsample"] = c.pipeline.subsample;
  j["input"] = to_string(c.pipeline.input);
  j["remainder_policy"] = to_string(c.remainder);
  j["fold"] = c.fold ? ojson(*c.fold) : ojson(nullptr);
  return j;
}

}  // namespace

std::string run_config_to_json(const RunConfig& config) { return run_config_json(config).dump(2); }

RunConfig run_config_from_json(std::string_view text) {
  return parse_json(text, "run configuration", [](const nlohmann::json& full) {
    const nlohmann::json& j = full.contains("config") ? full.at("config") : full;
    RunConfig c;
    c.data = j.at("data").get<std::string>();
    c.out = j.at("out").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.split_seed = j.at("split_seed").get<std::uint64_t>();
    c.model = config_from_json(j.at("model").dump());
    c.train.lr = j.at("train").at("lr").get<double>();
    c.train.batch = j.at("train").at("batch").get<std::size_t>();
    c.train.epochs = j.at("train").at("epochs").get<std::size_t>();
    c.grid_lr = j.at("grid_lr").get<std::vector<double>>();
    c.grid_hidden = j.at("grid_hidden").get<std::vector<std::size_t>>();
    const auto& p = j.at("patches");
    c.pipeline.patches.size = p.at("size").get<std::size_t>();
    c.pipeline.patches.margin = p.at("margin").get<std::size_t>();
    c.pipeline.patches.stride = p.at("stride").get<std::size_t>();
    const std::string containment = p.at("containment").get<std::string>();
    require(containment == "center" || containment == "full", ErrorCode::kUnknownMode,
            "unknown containment '" + containment + "'");
    c.pipeline.patches.containment = containment == "full" ? Containment::kFull : Containment::kCenter;
    c.pipeline.subsample = j.at("subsample").get<std::size_t>();
    c.pipeline.input = parse_input_mode(j.at("input").get<std::string>());
    c.remainder = parse_remainder_policy(j.at("remainder_policy").get<std::string>());
    if (!j.at("fold").is_null()) c.fold = j.at("fold").get<std::size_t>();
    return c;
  });
}

// ---- train ----------------------------------------------------------------------

std::vector<FoldTraining> cmd_train(const RunConfig& config, const ProgressFn& progress) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  const std::vector<std::size_t> folds = config.folds();
  if (config.model.variant == Variant::kCnn2dRgb) {
    require(config.pipeline.input == InputMode::kRgb, ErrorCode::kInvalidConfig,
            "cnn2d-rgb trains on derived RGB input");
  }

  const Dataset data = load_dataset(config.data);
  const SplitPlan plan = make_splits(patients_of(data), config.split_seed, config.remainder);
  fs::create_directories(config.out);
  write_text(config.out / "splits.tsv", plan.to_tsv());

  std::vector<FoldTraining> results;
  ojson fold_summary = ojson::array();
  for (std::size_t k : folds) {
    const Fold f = plan.fold(k);
    const SampleSet train = build_samples(data, f.train, config.pipeline);
    const SampleSet val = build_samples(data, f.validation, config.pipeline);
    say(progress, format("fold %zu: %zu training and %zu validation patches, %zu bands", k, train.patches.count(),
                         val.patches.count(), train.patches.bands()));

    ModelConfig model = config.model;
    model.bands = train.patches.bands();
    model.seed = derive_seed(config.seed, 2 * k);
    TrainOptions options = config.train;
    options.seed = derive_seed(config.seed, 2 * k + 1);

    const EpochCallback on_epoch = [&](const EpochLog& e) {
      say(progress, format("fold %zu epoch %zu loss %.6f validation auc %.4f", k, e.epoch, e.train_loss,
                           e.validation_auc));
    };
    GridResult grid = grid_search(model, train.patches, val.patches, options, config.grid_lr, config.grid_hidden,
                                  on_epoch);

    const fs::path dir = fold_dir(config.out, k);
    fs::create_directories(dir);
    save_model(dir / "model.ckpt", grid.best.model);
    write_text(dir / "train_log.tsv", training_log_tsv(grid.best.log));
    std::string grid_tsv = "lr\thidden\tvalidation_auc\tbest_epoch\n";
    for (const GridPoint& g : grid.points) {
      grid_tsv += format("%.10g\t%zu\t%.10f\t%zu\n", g.lr, g.hidden, g.validation_auc, g.best_epoch);
    }
    write_text(dir / "grid.tsv", grid_tsv);

    fold_summary.push_back({{"fold", k},
                            {"lr", grid.options.lr},
                            {"hidden", grid.best.model.config().hidden},
                            {"best_epoch", grid.best.best_epoch},
                            {"validation_auc", grid.best.best_validation_auc},
                            {"train_patches", train.patches.count()},
                            {"validation_patches", val.patches.count()}});
    results.push_back({k, std::move(grid)});
  }

  ojson manifest;
  manifest["command"] = "train";
  manifest["config"] = run_config_json(config);
  manifest["folds"] = std::move(fold_summary);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  manifest["log"] = {{"started_at", started_at}, {"elapsed_seconds", elapsed}};
  write_text(config.out / "manifest.json", manifest.dump(2) + "\n");
  return results;
}

// ---- eval ------------------------------------------------------------------------

namespace {

std::vector<PredictionRecord> predict(const Model& model, const SampleSet& samples) {
  const std::vector<double> scores = predict_scores(model, samples.patches);
  std::vector<PredictionRecord> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({samples.sample_ids[i], samples.patches.patient_ids[i], samples.patches.labels[i], scores[i]});
  }
  return out;
}

std::string predictions_tsv(std::span<const PredictionRecord> records, double threshold) {
  std::string out = "sample_id\tpatient_id\tlabel\tscore\tpredicted\n";
  for (const PredictionRecord& r : records) {
    out += r.sample_id + "\t" + r.patient_id + "\t" + std::to_string(r.label) + "\t" + format("%.17g", r.score) +
           "\t" + (r.score >= threshold ? "1" : "0") + "\n";
  }
  return out;
}

struct ThresholdedRecords {
  std::vector<PredictionRecord> scores;
  std::vector<PredictionRecord> decisions;
};

ThresholdedRecords read_predictions(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  require(line == "sample_id\tpatient_id\tlabel\tscore\tpredicted", ErrorCode::kMalformed,
          path.string() + ": unexpected header");
  ThresholdedRecords out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    PredictionRecord r;
    std::string label, score, predicted;
    std::getline(row, r.sample_id, '\t');
    std::getline(row, r.patient_id, '\t');
    std::getline(row, label, '\t');
    std::getline(row, score, '\t');
    std::getline(row, predicted, '\t');
    require((label == "0" || label == "1") && (predicted == "0" || predicted == "1") && !score.empty(),
            ErrorCode::kMalformed, path.string() + ": bad row '" + line + "'");
    r.label = label == "1";
    r.score = std::stod(score);
    out.scores.push_back(r);
    r.score = predicted == "1" ? 1.0 : 0.0;
    out.decisions.push_back(std::move(r));
  }
  return out;
}

double choose_threshold(const ThresholdPolicy& policy, std::span<const PredictionRecord> validation) {
  if (policy.fixed) return *policy.fixed;
  return youden_threshold(labels_of(validation), scores_of(validation));
}

void write_report(const fs::path& dir, const MetricsReport& report, std::span<const PredictionRecord> test) {
  fs::create_directories(dir);
  write_text(dir / "predictions.tsv", predictions_tsv(test, report.threshold));
  write_text(dir / "report.tsv", report_tsv(report));
  write_text(dir / "report.json", report_json(report) + "\n");
}

}  // namespace

Evaluation cmd_eval(const fs::path& run_dir, const EvalOptions& o, const ProgressFn& progress) {
  RunConfig config = run_config_from_json(read_text(run_dir / "manifest.json"));
  if (o.data) config.data = *o.data;
  if (o.input) config.pipeline.input = *o.input;
  if (o.subsample) config.pipeline.subsample = *o.subsample;
  const fs::path out = o.out.value_or(run_dir);

  const Dataset data = load_dataset(config.data);
  const SplitPlan plan = make_splits(patients_of(data), config.split_seed, config.remainder);
  const BootstrapOptions boot{o.bootstrap, o.level, o.seed};
  auto level_records = [&](std::vector<PredictionRecord> r) {
    return o.patient_level ? aggregate_by_patient(r) : r;
  };
  auto report_for = [&](std::span<const PredictionRecord> test, double threshold, std::uint64_t seed) {
    BootstrapOptions b = boot;
    b.seed = seed;
    MetricsReport r = evaluate_predictions(labels_of(test), scores_of(test), threshold, b);
    r.level = o.patient_level ? "patient-level mean" : "patch-level";
    return r;
  };

  Evaluation result;
  std::vector<PredictionRecord> pooled_validation;
  for (std::size_t k : config.folds()) {
    const Model model = load_model(fold_dir(run_dir, k) / "model.ckpt");
    const Fold f = plan.fold(k);
    FoldEvaluation e;
    e.fold = k;
    e.validation = level_records(predict(model, build_samples(data, f.validation, config.pipeline)));
    e.test = level_records(predict(model, build_samples(data, f.test, config.pipeline)));
    e.threshold = choose_threshold(o.threshold, e.validation);
    e.report = report_for(e.test, e.threshold, derive_seed(o.seed, k));
    write_report(fold_dir(out, k), e.report, e.test);
    say(progress, format("fold %zu: test auc %.4f [%.4f, %.4f] on %zu samples", k, e.report.auc.point,
                         e.report.auc.lower, e.report.auc.upper, e.test.size()));
    pooled_validation.insert(pooled_validation.end(), e.validation.begin(), e.validation.end());
    result.pooled_test.insert(result.pooled_test.end(), e.test.begin(), e.test.end());
    result.folds.push_back(std::move(e));
  }
  result.pooled_threshold = choose_threshold(o.threshold, pooled_validation);
  result.pooled = report_for(result.pooled_test, result.pooled_threshold, derive_seed(o.seed, 3));
  write_report(out, result.pooled, result.pooled_test);
  say(progress, format("pooled: test auc %.4f [%.4f, %.4f] on %zu samples", result.pooled.auc.point,
                       result.pooled.auc.lower, result.pooled.auc.upper, result.pooled_test.size()));
  return result;
}

// ---- compare ---------------------------------------------------------------------

std::vector<ComparisonRow> cmd_compare(const fs::path& run_a, const fs::path& run_b, const fs::path& out,
                                       const PermutationOptions& options) {
  const ThresholdedRecords a = read_predictions(run_a / "predictions.tsv");
  const ThresholdedRecords b = read_predictions(run_b / "predictions.tsv");

  // Decisions are 0/1 scores, so a 0.5 cut reproduces each run's own threshold.
  auto at_half = [](auto member) {
    return [member](std::span<const int> y, std::span<const double> s) { return threshold_metrics(y, s, 0.5).*member; };
  };
  struct Metric {
    const char* name;
    MetricFn fn;
    bool on_scores;
  };
  const Metric metrics[] = {
      {"auc", roc_auc, true},
      {"sensitivity", at_half(&ThresholdMetrics::sensitivity), false},
      {"specificity", at_half(&ThresholdMetrics::specificity), false},
      {"f1", at_half(&ThresholdMetrics::f1), false},
  };

  std::vector<ComparisonRow> rows;
  std::string tsv = "metric\tvalue_a\tvalue_b\tdifference\tp_value\treject\n";
  for (std::size_t m = 0; m < std::size(metrics); ++m) {
    const auto& ra = metrics[m].on_scores ? a.scores : a.decisions;
    const auto& rb = metrics[m].on_scores ? b.scores : b.decisions;
    PermutationOptions po = options;
    po.seed = derive_seed(options.seed, m);
    ComparisonRow row;
    row.metric = metrics[m].name;
    row.test = permutation_test(metrics[m].fn, ra, rb, po);
    row.value_a = metrics[m].fn(labels_of(ra), scores_of(ra));
    row.value_b = metrics[m].fn(labels_of(rb), scores_of(rb));
    tsv += format("%s\t%.6f\t%.6f\t%.6f\t%.6f\t%s\n", row.metric.c_str(), row.value_a, row.value_b,
                  row.value_a - row.value_b, row.test.p_value, row.test.reject ? "yes" : "no");
    rows.push_back(std::move(row));
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(out / "compare.tsv", tsv);
  }
  return rows;
}

// ---- band sweep ------------------------------------------------------------------

std::vector<SweepRow> cmd_band_sweep(const RunConfig& base, const EvalOptions& eval,
                                     const std::vector<std::size_t>& factors, const ProgressFn& progress) {
  require(!factors.empty(), ErrorCode::kInvalidArgument, "no subsampling factors given");
  std::vector<SweepRow> rows;
  std::string tsv = "factor\tbands\tauc\tci_low\tci_high\n";
  for (std::size_t factor : factors) {
    RunConfig c = base;
    c.pipeline.subsample = factor;
    c.out = base.out / ("every" + std::to_string(factor));
    say(progress, format("band sweep: factor %zu", factor));
    const std::vector<FoldTraining> trained = cmd_train(c, progress);
    EvalOptions e = eval;
    e.out.reset();
    e.subsample.reset();
    const Evaluation ev = cmd_eval(c.out, e, progress);
    SweepRow row{factor, trained.front().grid.best.model.config().bands, ev.pooled.auc};
    tsv += format("%zu\t%zu\t%.6f\t%.6f\t%.6f\n", row.factor, row.bands, row.auc.point, row.auc.lower,
                  row.auc.upper);
    rows.push_back(row);
  }
  fs::create_directories(base.out);
  write_text(base.out / "band_sweep.tsv", tsv);
  return rows;
}

// ---- gradient checks -------------------------------------------------------------

namespace {

Tensor uniform_tensor(Shape shape, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

CgruParams cgru_params(std::span<const Var> v) { return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]}; }

std::vector<Shape> cgru_shapes(std::size_t in, std::size_t hidden) {
  return {{3, 3, in, hidden}, {3, 3, in, hidden}, {3, 3, in, hidden},
          {3, 3, hidden, hidden}, {3, 3, hidden, hidden}, {3, 3, hidden, hidden},
          {hidden}, {hidden}, {hidden}};
}

/// A case over random inputs in [-1, 1], one tensor per shape.
GradcheckCase shaped_case(std::string name, std::vector<Shape> shapes, GraphFunction fn,
                          std::size_t max_coordinates = 0) {
  return {std::move(name), "layer", [shapes, fn, max_coordinates](std::uint64_t seed) {
            std::vector<Tensor> inputs;
            for (std::size_t k = 0; k < shapes.size(); ++k) {
              inputs.push_back(uniform_tensor(shapes[k], derive_seed(seed, k), -1.0, 1.0));
            }
            GradCheckOptions o;
            o.seed = seed;
            o.max_coordinates = max_coordinates;
            return check_gradients(fn, inputs, o);
          }};
}

GradcheckCase variant_case(Variant variant) {
  return {std::string(to_string(variant)), "variant", [variant](std::uint64_t seed) {
            ModelConfig c;
            c.variant = variant;
            c.bands = variant == Variant::kCnn2dRgb ? 3 : 6;
            // Rotate through the aggregation modes across seeds.
            if (has_aggregation(variant)) c.aggregation = static_cast<Aggregation>(seed % 3);
            c.hidden = 2;
            c.initial_filters = 3;
            c.dense_blocks = 2;
            c.dense.layers = 2;
            c.dense.growth = 2;
            c.seed = derive_seed(seed, 1);
            const Model m = Model::build(c);
            std::vector<Tensor> inputs{uniform_tensor({2, 8, 8, c.bands}, derive_seed(seed, 2), 0.0, 1.0)};
            for (const auto& p : m.parameters()) {
              // Small nonzero biases keep relu pre-activations off exact ties.
              const bool bias = p.name.ends_with("bias") || p.name.find(".b_") != std::string::npos;
              inputs.push_back(bias ? uniform_tensor(p.value.shape(), derive_seed(seed, 3 + inputs.size()), -0.1, 0.1)
                                    : p.value);
            }
            const GraphFunction fn = [&m](Graph& g, std::span<const Var> v) {
              return m.forward(g, v.subspan(1), v[0]);
            };
            GradCheckOptions o;
            o.seed = seed;
            o.max_coordinates = 6;
            return check_gradients(fn, inputs, o);
          }};
}

}  // namespace

std::vector<GradcheckCase> default_gradcheck_cases() {
  using namespace nn;
  std::vector<GradcheckCase> cases = {
      shaped_case("add", {{3, 4}, {4}}, [](Graph&, auto v) { return ops::add(v[0], v[1]); }),
      shaped_case("sub", {{3, 4}, {3, 4}}, [](Graph&, auto v) { return ops::sub(v[0], v[1]); }),
      shaped_case("mul", {{2, 3}, {3}}, [](Graph&, auto v) { return ops::mul(v[0], v[1]); }),
      shaped_case("scale", {{5}}, [](Graph&, auto v) { return ops::scale(v[0], -2.5); }),
      shaped_case("matmul", {{3, 4}, {4, 2}}, [](Graph&, auto v) { return ops::matmul(v[0], v[1]); }),
      shaped_case("sigmoid", {{6}}, [](Graph&, auto v) { return ops::sigmoid(v[0]); }),
      shaped_case("tanh", {{6}}, [](Graph&, auto v) { return ops::tanh(v[0]); }),
      shaped_case("relu", {{6}}, [](Graph&, auto v) { return ops::relu(v[0]); }),
      shaped_case("concat", {{2, 3}, {2, 1}}, [](Graph&, auto v) { return ops::concat(v, 1); }),
      shaped_case("slice", {{4, 5}}, [](Graph&, auto v) { return ops::slice(v[0], 1, 1, 4); }),
      shaped_case("reduce-mean", {{2, 3, 4}}, [](Graph&, auto v) { return ops::reduce_mean(v[0], {0, 2}); }),
      shaped_case("reduce-max", {{3, 4}}, [](Graph&, auto v) { return ops::reduce_max(v[0], {1}); }),
      shaped_case("sum", {{3, 3}}, [](Graph&, auto v) { return ops::sum(v[0]); }),
      shaped_case("softmax", {{3, 4}}, [](Graph&, auto v) { return ops::softmax(v[0], 1); }),
      shaped_case("log-softmax", {{4, 3}}, [](Graph&, auto v) { return ops::log_softmax(v[0], 0); }),
      shaped_case("pad", {{2, 3}}, [](Graph&, auto v) { return ops::pad(v[0], {1, 0}, {2, 1}); }),
      shaped_case("reshape", {{2, 6}}, [](Graph&, auto v) { return ops::reshape(v[0], Shape{3, 4}); }),
      shaped_case("conv2d", {{2, 5, 4, 3}, {3, 3, 3, 2}, {2}},
                  [](Graph&, auto v) { return conv2d(v[0], {v[1], v[2]}); }),
      shaped_case("conv2d-stride2-valid", {{1, 7, 6, 2}, {3, 3, 2, 3}},
                  [](Graph&, auto v) { return conv2d(v[0], {v[1], Var{}, 2, Padding::kValid}); }),
      shaped_case("conv3d", {{1, 4, 3, 5, 2}, {3, 3, 3, 2, 2}, {2}},
                  [](Graph&, auto v) { return conv3d(v[0], {v[1], v[2]}); }),
      shaped_case("avg-pool2d", {{2, 4, 6, 3}}, [](Graph&, auto v) { return avg_pool2d(v[0]); }),
      shaped_case("avg-pool3d", {{1, 4, 4, 5, 2}}, [](Graph&, auto v) { return avg_pool3d(v[0]); }),
      shaped_case("dense-block", {{1, 4, 4, 3}, {3, 3, 3, 2}, {2}, {3, 3, 5, 2}, {2}},
                  [](Graph&, auto v) {
                    const DenseLayer layers[] = {{v[1], v[2]}, {v[3], v[4]}};
                    return dense_block(v[0], layers, 2);
                  }),
      shaped_case("dense-block-3d", {{1, 4, 4, 3, 2}, {3, 3, 3, 2, 2}, {2}},
                  [](Graph&, auto v) {
                    const DenseLayer layers[] = {{v[1], v[2]}};
                    return dense_block(v[0], layers, 3);
                  }),
      shaped_case("classifier-head", {{2, 3, 3, 4}, {4, 2}, {2}},
                  [](Graph&, auto v) { return classifier_head(v[0], v[1], v[2]); }),
      shaped_case("weighted-cross-entropy", {{4, 2}},
                  [](Graph&, auto v) {
                    return weighted_cross_entropy(v[0], std::vector<int>{0, 1, 1, 0}, {9, 3});
                  }),
      shaped_case("cgru-cell", [] {
                    auto s = cgru_shapes(2, 3);
                    s.insert(s.begin(), {{1, 4, 4, 2}, {1, 4, 4, 3}});
                    return s;
                  }(),
                  [](Graph&, auto v) { return cgru_cell_step(v[0], v[1], cgru_params(v.subspan(2))); }),
  };
  for (Aggregation mode : {Aggregation::kLast, Aggregation::kMean, Aggregation::kMax}) {
    auto shapes = cgru_shapes(2, 3);
    shapes.insert(shapes.begin(), Shape{1, 6, 6, 5, 2});
    cases.push_back(shaped_case(
        "cgru-scan-" + std::string(to_string(mode)), shapes,
        [mode](Graph&, auto v) {
          return select_state(cgru_scan(v[0], cgru_params(v.subspan(1)), ScanDirection::kForward), mode);
        },
        24));
  }
  {
    auto shapes = cgru_shapes(1, 2);
    const auto back = cgru_shapes(1, 2);
    shapes.insert(shapes.end(), back.begin(), back.end());
    shapes.insert(shapes.begin(), Shape{1, 5, 5, 4, 1});
    cases.push_back(shaped_case(
        "cgru-bidirectional", shapes,
        [](Graph&, auto v) {
          return select_state(bidirectional_cgru(v[0], cgru_params(v.subspan(1, 9)), cgru_params(v.subspan(10, 9))),
                              Aggregation::kLast);
        },
        16));
  }
  for (Variant v : all_variants()) cases.push_back(variant_case(v));
  return cases;
}

std::string GradcheckReport::to_tsv() const {
  std::string out = "name\tkind\tmax_error\tchecked\tskipped\tpassed\n";
  for (const GradcheckEntry& e : entries) {
    out += format("%s\t%s\t%.3e\t%zu\t%zu\t%s\n", e.name.c_str(), e.kind.c_str(), e.max_error, e.checked, e.skipped,
                  e.passed ? "yes" : "no");
  }
  return out;
}

GradcheckReport cmd_gradcheck(const std::vector<GradcheckCase>& cases, const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), ErrorCode::kInvalidArgument, "no gradient-check seeds given");
  GradcheckReport report;
  for (const GradcheckCase& c : cases) {
    GradcheckEntry e{c.name, c.kind};
    for (std::uint64_t seed : seeds) {
      const GradCheckResult r = c.run(seed);
      e.max_error = std::max(e.max_error, r.max_error);
      e.checked += r.checked;
      e.skipped += r.skipped;
      e.passed = e.passed && r.passed;
    }
    report.passed = report.passed && e.passed;
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace ssrc
