#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include <unistd.h>

#include "gtest/gtest.h"
#include "ssrc/binary_io.hpp"
#include "ssrc/commands.hpp"
#include "ssrc/error.hpp"

using namespace ssrc;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ssrc_commands_" + name);
  fs::remove_all(p);
  return p;
}

/// Relative path -> bytes for every regular file below `root`.
std::map<std::string, Bytes> snapshot(const fs::path& root) {
  std::map<std::string, Bytes> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

SynthSpec tiny_spec() {
  SynthSpec s;
  s.patients = 24;
  s.signal = SignalKind::kBandDifference;
  s.amplitude = 0.06;
  s.seed = 21;
  return s;
}

RunConfig tiny_run(const fs::path& data, const fs::path& out, Variant variant = Variant::kCgruCnn) {
  RunConfig c;
  c.data = data;
  c.out = out;
  c.seed = 4;
  c.split_seed = 8;
  c.model.variant = variant;
  c.model.aggregation = has_aggregation(variant) ? std::optional(Aggregation::kLast) : std::nullopt;
  c.model.bands = variant == Variant::kCnn2dRgb ? 3 : 26;
  c.model.hidden = 2;
  c.model.initial_filters = 3;
  c.model.dense_blocks = 1;
  c.model.dense.layers = 1;
  c.model.dense.growth = 2;
  c.train = {0.01, 16, 2, 0};
  c.pipeline.patches = {8, 4, 4, Containment::kCenter};
  c.pipeline.input = variant == Variant::kCnn2dRgb ? InputMode::kRgb : InputMode::kHsi;
  c.fold = 0;
  return c;
}

EvalOptions quick_eval() {
  EvalOptions o;
  o.bootstrap = 200;
  return o;
}

// One generated dataset shared by the run-level tests.
const fs::path& dataset() {
  static const fs::path dir = [] {
    const fs::path d = scratch("data_" + std::to_string(::getpid()));
    cmd_gen(tiny_spec(), d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Gen, DeterministicAndLoadable) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  SynthSpec spec;
  spec.patients = 30;
  spec.seed = 3;
  cmd_gen(spec, a);
  cmd_gen(spec, b);
  const auto sa = snapshot(a);
  EXPECT_EQ(sa, snapshot(b));
  std::set<std::string> patients;
  for (const auto& [rel, bytes] : sa) {
    if (rel != "manifest.json") patients.insert(fs::path(rel).parent_path().string());
  }
  EXPECT_EQ(patients.size(), 30u);

  const Dataset d = load_dataset(a);
  EXPECT_EQ(d.cubes.size(), 30u);
  EXPECT_EQ(d.files.front(), "P0000/cube_0.hsi");
}

TEST(Gen, RejectsDegenerateClassRatio) {
  SynthSpec spec;
  spec.class_ratio = 0.0;
  EXPECT_EQ(code_of([&] { cmd_gen(spec, scratch("gen_bad")); }), ErrorCode::kInvalidArgument);
}

TEST(Gen, DatasetLabelsMustAgreeWithManifest) {
  const fs::path d = scratch("gen_tamper");
  SynthSpec spec;
  spec.patients = 4;
  cmd_gen(spec, d);
  std::string manifest = read_text(d / "manifest.json");
  const auto pos = manifest.find("\"label\": ");
  manifest[pos + 9] = manifest[pos + 9] == '0' ? '1' : '0';
  write_text(d / "manifest.json", manifest);
  EXPECT_EQ(code_of([&] { load_dataset(d); }), ErrorCode::kMalformed);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = tiny_run("data dir", "out", Variant::kCnnCgru);
  c.grid_lr = {0.1, 0.01};
  c.grid_hidden = {4, 8};
  c.pipeline.subsample = 3;
  c.pipeline.patches.containment = Containment::kFull;
  c.remainder = RemainderPolicy::kExclude;
  c.fold.reset();
  const std::string json = run_config_to_json(c);
  EXPECT_EQ(run_config_to_json(run_config_from_json(json)), json);
  EXPECT_EQ(code_of([] { run_config_from_json("{\"seed\": 1}"); }), ErrorCode::kMalformed);
}

TEST(RunConfig, ThresholdPolicy) {
  EXPECT_FALSE(ThresholdPolicy::parse("youden").fixed);
  EXPECT_EQ(*ThresholdPolicy::parse("0.25").fixed, 0.25);
  EXPECT_EQ(ThresholdPolicy::parse("0.25").to_string(), "0.25");
  EXPECT_EQ(code_of([] { ThresholdPolicy::parse("0.5x"); }), ErrorCode::kUnknownMode);
}

TEST(Samples, IdsAreUniqueAndRgbHasThreeBands) {
  const Dataset d = load_dataset(dataset());
  PatchPipeline p;
  p.patches = {8, 4, 4, Containment::kCenter};
  const SampleSet hsi = build_samples(d, {"P0001", "P0002"}, p);
  EXPECT_EQ(hsi.patches.bands(), 26u);
  EXPECT_EQ(std::set(hsi.sample_ids.begin(), hsi.sample_ids.end()).size(), hsi.sample_ids.size());
  p.input = InputMode::kRgb;
  EXPECT_EQ(build_samples(d, {"P0001"}, p).patches.bands(), 3u);
  p.input = InputMode::kHsi;
  p.subsample = 4;
  EXPECT_EQ(build_samples(d, {"P0001"}, p).patches.bands(), 7u);
  EXPECT_EQ(code_of([&] { build_samples(d, {"nobody"}, p); }), ErrorCode::kEmptyInput);
}

TEST(TrainEval, ArtifactsAndReproducibleFromManifest) {
  const fs::path out = scratch("run_a");
  const auto trained = cmd_train(tiny_run(dataset(), out));
  ASSERT_EQ(trained.size(), 1u);
  for (const char* f : {"manifest.json", "splits.tsv", "fold0/model.ckpt", "fold0/model.ckpt.json",
                        "fold0/train_log.tsv", "fold0/grid.tsv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_FALSE(fs::exists(out / "fold1"));

  // Re-running the stored configuration elsewhere reproduces every artifact.
  RunConfig again = run_config_from_json(read_text(out / "manifest.json"));
  again.out = scratch("run_b");
  cmd_train(again);
  auto a = snapshot(out), b = snapshot(again.out);
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [rel, bytes] : a) {
    if (rel == "manifest.json") continue;
    EXPECT_EQ(bytes, b[rel]) << rel;
  }
  auto strip = [](const fs::path& p) {
    std::string m = read_text(p);
    m.erase(m.find("\"log\""));
    m.erase(m.find("\"out\""), m.find('\n', m.find("\"out\"")) - m.find("\"out\""));
    return m;
  };
  EXPECT_EQ(strip(out / "manifest.json"), strip(again.out / "manifest.json"));

  const Evaluation e = cmd_eval(out, quick_eval());
  ASSERT_EQ(e.folds.size(), 1u);
  EXPECT_EQ(e.pooled_test.size(), e.folds[0].test.size());
  EXPECT_EQ(e.pooled.samples, e.pooled_test.size());
  for (const char* f : {"predictions.tsv", "report.tsv", "report.json", "fold0/predictions.tsv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const std::string pred = read_text(out / "predictions.tsv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(pred.begin(), pred.end(), '\n')), e.pooled_test.size() + 1);
}

TEST(TrainEval, CrossFoldPoolingAndPatientLevel) {
  // A clinical-size cohort gives every fold three malignant test patients.
  SynthSpec spec = tiny_spec();
  spec.patients = 98;
  spec.class_ratio = 15.0 / 98.0;
  const fs::path data = scratch("data_clinical");
  cmd_gen(spec, data);
  RunConfig c = tiny_run(data, scratch("run_folds"), Variant::kCnn2dHsi);
  c.fold.reset();
  c.train.epochs = 1;
  cmd_train(c);
  const Evaluation e = cmd_eval(c.out, quick_eval());
  ASSERT_EQ(e.folds.size(), 3u);
  std::set<std::string> ids;
  for (const FoldEvaluation& f : e.folds)
    for (const PredictionRecord& r : f.test) ids.insert(r.sample_id);
  EXPECT_EQ(ids.size(), e.pooled_test.size());

  EvalOptions patient = quick_eval();
  patient.patient_level = true;
  patient.out = scratch("run_folds_patient");
  const Evaluation pe = cmd_eval(c.out, patient);
  EXPECT_EQ(pe.pooled.level, "patient-level mean");
  std::set<std::string> patients;
  for (const PredictionRecord& r : e.pooled_test) patients.insert(r.patient_id);
  EXPECT_EQ(pe.pooled_test.size(), patients.size());
}

TEST(TrainEval, RgbCheckpointOnHyperspectralInputIsABandMismatch) {
  const fs::path out = scratch("run_rgb");
  cmd_train(tiny_run(dataset(), out, Variant::kCnn2dRgb));
  EvalOptions o = quick_eval();
  o.input = InputMode::kHsi;
  o.out = scratch("run_rgb_hsi");
  EXPECT_EQ(code_of([&] { cmd_eval(out, o); }), ErrorCode::kBandCountMismatch);
  RunConfig wrong = tiny_run(dataset(), scratch("run_rgb_wrong"), Variant::kCnn2dRgb);
  wrong.pipeline.input = InputMode::kHsi;
  EXPECT_EQ(code_of([&] { cmd_train(wrong); }), ErrorCode::kInvalidConfig);
}

TEST(Compare, RunAgainstItselfIsNeverSignificant) {
  const fs::path out = scratch("run_cmp");
  cmd_train(tiny_run(dataset(), out, Variant::kCnn2dHsi));
  cmd_eval(out, quick_eval());
  const fs::path cmp = scratch("cmp");
  const auto rows = cmd_compare(out, out, cmp, {500, 0.05, 1});
  EXPECT_TRUE(fs::exists(cmp / "compare.tsv"));
  std::vector<std::string> names;
  for (const ComparisonRow& r : rows) {
    names.push_back(r.metric);
    EXPECT_EQ(r.test.p_value, 1.0) << r.metric;
    EXPECT_FALSE(r.test.reject);
    EXPECT_EQ(r.value_a, r.value_b);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"auc", "sensitivity", "specificity", "f1"}));
}

TEST(BandSweep, FactorOneMatchesAPlainRun) {
  RunConfig base = tiny_run(dataset(), scratch("sweep"), Variant::kCnn2dHsi);
  base.train.epochs = 1;
  const auto rows = cmd_band_sweep(base, quick_eval(), {1, 4});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].bands, 26u);
  EXPECT_EQ(rows[1].bands, 7u);

  RunConfig plain = base;
  plain.out = scratch("sweep_plain");
  cmd_train(plain);
  const Evaluation e = cmd_eval(plain.out, quick_eval());
  EXPECT_EQ(e.pooled.auc.point, rows[0].auc.point);
  EXPECT_EQ(e.pooled.auc.lower, rows[0].auc.lower);
  EXPECT_EQ(e.pooled.auc.upper, rows[0].auc.upper);
  EXPECT_TRUE(fs::exists(base.out / "band_sweep.tsv"));
}

TEST(Gradcheck, SuiteListsEveryVariantOnce) {
  const auto cases = default_gradcheck_cases();
  std::multiset<std::string> variants;
  for (const auto& c : cases)
    if (c.kind == "variant") variants.insert(c.name);
  EXPECT_EQ(variants.size(), all_variants().size());
  for (Variant v : all_variants()) EXPECT_EQ(variants.count(std::string(to_string(v))), 1u);
}

TEST(Gradcheck, CorruptedBackwardIsReported) {
  // x^2 with the factor 2 dropped from its derivative.
  GradcheckCase broken{"broken-square", "layer", [](std::uint64_t seed) {
                         const GraphFunction fn = [](Graph& g, std::span<const Var> v) {
                           Tensor out = v[0].value();
                           for (double& x : out.values()) x *= x;
                           return g.record(OpKind::kMul, {v[0].id()}, std::move(out), [](const BackwardContext& c) {
                             if (Tensor* gi = c.input_grads[0]) {
                               for (std::size_t i = 0; i < gi->size(); ++i) {
                                 gi->values()[i] += c.grad_output.values()[i] * c.input(0).values()[i];
                               }
                             }
                           });
                         };
                         GradCheckOptions o;
                         o.seed = seed;
                         const std::vector<Tensor> inputs{Tensor(Shape{4}, {0.3, -0.7, 1.1, 0.5})};
                         return check_gradients(fn, inputs, o);
                       }};
  auto cases = default_gradcheck_cases();
  std::erase_if(cases, [](const GradcheckCase& c) { return c.name != "tanh" && c.name != "conv2d"; });
  cases.push_back(broken);
  const GradcheckReport r = cmd_gradcheck(cases, {0, 1});
  EXPECT_FALSE(r.passed);
  ASSERT_EQ(r.entries.size(), 3u);
  EXPECT_TRUE(r.entries[0].passed);
  EXPECT_TRUE(r.entries[1].passed);
  EXPECT_FALSE(r.entries[2].passed);
  EXPECT_NEAR(r.entries[2].max_error, 0.5, 1e-6);
  EXPECT_NE(r.to_tsv().find("broken-square\tlayer"), std::string::npos);
}
