#include <algorithm>
#include <cmath>
#include <set>

#include "gtest/gtest.h"
#include "ssrc/error.hpp"
#include "ssrc/hsi.hpp"
#include "ssrc/rng.hpp"
#include "ssrc/splits.hpp"
#include "ssrc/synth.hpp"

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

HsiCube random_cube(std::size_t h, std::size_t w, std::size_t s, std::uint64_t seed) {
  Rng rng(seed);
  HsiCube c;
  c.height = h;
  c.width = w;
  double nm = 400.0;
  for (std::size_t k = 0; k < s; ++k) c.wavelengths.push_back(nm += rng.uniform(0.5, 20.0));
  c.reflectance.resize(h * w * s);
  for (float& v : c.reflectance) v = static_cast<float>(rng.uniform());
  c.label = static_cast<Label>(rng.below(2));
  c.mask.assign(h * w, kBackground);
  const std::size_t i0 = rng.below(h), j0 = rng.below(w);
  const std::size_t i1 = i0 + rng.below(h - i0), j1 = j0 + rng.below(w - j0);
  for (std::size_t i = i0; i <= i1; ++i)
    for (std::size_t j = j0; j <= j1; ++j) c.mask[i * w + j] = c.label == 1 ? kMalignantLesion : kBenignLesion;
  c.patient_id = "patient-" + std::to_string(rng.below(1000));
  return c;
}

HsiCube flat_cube(std::size_t h, std::size_t w, float value) {
  HsiCube c;
  c.height = h;
  c.width = w;
  c.wavelengths = default_wavelengths();
  c.reflectance.assign(h * w * c.bands(), value);
  c.mask.assign(h * w, kBenignLesion);
  c.patient_id = "flat";
  return c;
}

}  // namespace

TEST(CubeFormat, MinimalRoundTrip) {
  HsiCube c;
  c.height = c.width = 1;
  c.wavelengths = {500.0};
  c.reflectance = {0.25f};
  c.mask = {kMalignantLesion};
  c.label = 1;
  c.patient_id = "p";
  const Bytes bytes = write_cube(c);
  EXPECT_EQ(bytes.size(), 8u + 12 + 8 + 4 + 1 + 1 + 4 + 1);
  EXPECT_EQ(write_cube(read_cube(bytes)), bytes);
}

TEST(CubeFormat, RandomCubesRoundTripBitExactly) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const HsiCube c = random_cube(5 + seed % 7, 3 + seed % 5, 1 + seed % 9, seed);
    const Bytes bytes = write_cube(c);
    const HsiCube back = read_cube(bytes);
    EXPECT_EQ(back.reflectance, c.reflectance);
    EXPECT_EQ(back.wavelengths, c.wavelengths);
    EXPECT_EQ(back.mask, c.mask);
    EXPECT_EQ(back.patient_id, c.patient_id);
    EXPECT_EQ(write_cube(back), bytes);
  }
  const HsiCube big = random_cube(64, 64, 26, 99);
  EXPECT_EQ(read_cube(write_cube(big)).reflectance, big.reflectance);
}

TEST(CubeFormat, Errors) {
  const HsiCube c = random_cube(4, 4, 3, 1);
  Bytes bytes = write_cube(c);
  Bytes bad = bytes;
  bad[3] ^= 0xFF;
  EXPECT_EQ(code_of([&] { read_cube(bad); }), ErrorCode::kBadMagic);
  EXPECT_EQ(code_of([&] { read_cube(Bytes(bytes.begin(), bytes.begin() + 5)); }), ErrorCode::kBadMagic);
  EXPECT_EQ(code_of([&] { read_cube(Bytes(bytes.begin(), bytes.end() - 1)); }), ErrorCode::kTruncated);
  Bytes longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(code_of([&] { read_cube(longer); }), ErrorCode::kMalformed);

  HsiCube w = c;
  w.wavelengths[2] = w.wavelengths[1];
  EXPECT_EQ(code_of([&] { write_cube(w); }), ErrorCode::kNonIncreasingWavelengths);
  HsiCube r = c;
  r.reflectance[5] = 1.01f;
  EXPECT_EQ(code_of([&] { write_cube(r); }), ErrorCode::kReflectanceOutOfRange);
  r.reflectance[5] = 1.0f + 5e-7f;
  EXPECT_NO_THROW(write_cube(r));
  HsiCube two = flat_cube(5, 5, 0.5f);
  two.mask.assign(25, kBackground);
  two.mask[0] = two.mask[24] = kBenignLesion;
  EXPECT_EQ(code_of([&] { write_cube(two); }), ErrorCode::kMalformed);
  HsiCube mismatched = flat_cube(2, 2, 0.5f);
  mismatched.label = 1;
  EXPECT_EQ(code_of([&] { write_cube(mismatched); }), ErrorCode::kMalformed);
}

TEST(Rgb, BinsAndFlatSpectrum) {
  const auto bins = rgb_bin_bands(default_wavelengths());
  EXPECT_EQ(bins[0].size(), 9u);
  EXPECT_EQ(bins[1].size(), 10u);
  EXPECT_EQ(bins[2].size(), 7u);
  // Independent count of grid points per closed interval.
  auto count = [](int lo, int hi) {
    int n = 0;
    for (int nm = 430; nm <= 680; nm += 10) n += nm >= lo && nm <= hi;
    return static_cast<std::size_t>(n);
  };
  EXPECT_EQ(bins[0].size(), count(600, 680));
  EXPECT_EQ(bins[1].size(), count(500, 590));
  EXPECT_EQ(bins[2].size(), count(430, 490));

  const Tensor rgb = derive_rgb(flat_cube(3, 2, 0.375f));
  EXPECT_EQ(rgb.shape(), (Shape{3, 2, 3}));
  for (double v : rgb.values()) EXPECT_EQ(v, 0.375);
}

TEST(Rgb, BlueOnlyEnergy) {
  HsiCube c = flat_cube(2, 2, 0.0f);
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t s = 0; s < c.bands(); ++s)
      if (c.wavelengths[s] <= 490.0) c.reflectance[p * c.bands() + s] = 0.6f;
  const Tensor rgb = derive_rgb(c);
  for (std::size_t p = 0; p < 4; ++p) {
    EXPECT_EQ(rgb[p * 3 + 0], 0.0);
    EXPECT_EQ(rgb[p * 3 + 1], 0.0);
    EXPECT_GT(rgb[p * 3 + 2], 0.0);
  }
  HsiCube narrow = flat_cube(1, 1, 0.5f);
  narrow.wavelengths = {430, 440};
  narrow.reflectance = {0.5f, 0.5f};
  EXPECT_EQ(code_of([&] { derive_rgb(narrow); }), ErrorCode::kEmptyColorBin);
}

TEST(Subsample, BandCounts) {
  const HsiCube c = flat_cube(2, 2, 0.5f);
  EXPECT_EQ(subsample_bands(c, 2).bands(), 13u);
  EXPECT_EQ(subsample_bands(c, 3).bands(), 9u);
  EXPECT_EQ(subsample_bands(c, 4).bands(), 7u);
  EXPECT_EQ(subsample_bands(c, 1).reflectance, c.reflectance);
  EXPECT_EQ(subsample_bands(c, 4).wavelengths, (std::vector<double>{430, 470, 510, 550, 590, 630, 670}));
  EXPECT_EQ(code_of([&] { subsample_bands(c, 0); }), ErrorCode::kInvalidArgument);
}

TEST(Patches, FullImageTiling) {
  const HsiCube c = flat_cube(64, 64, 0.5f);
  const PatchSet p = extract_patches(c, {32, 0, 32, Containment::kCenter});
  ASSERT_EQ(p.count(), 4u);
  std::set<std::array<std::size_t, 2>> offsets(p.offsets.begin(), p.offsets.end());
  EXPECT_EQ(offsets, (std::set<std::array<std::size_t, 2>>{{0, 0}, {0, 32}, {32, 0}, {32, 32}}));
  EXPECT_EQ(p.batch(std::vector<std::size_t>{0, 3}).shape(), (Shape{2, 32, 32, 26}));
}

TEST(Patches, SmallLesionUnderStrictContainment) {
  HsiCube c = flat_cube(64, 64, 0.5f);
  c.mask.assign(64 * 64, kBackground);
  for (std::size_t i = 10; i < 40; ++i)
    for (std::size_t j = 10; j < 40; ++j) c.mask[i * 64 + j] = kBenignLesion;
  EXPECT_EQ(code_of([&] { extract_patches(c, {32, 0, 1, Containment::kFull}); }), ErrorCode::kLesionTooSmall);
  EXPECT_GT(extract_patches(c, {32, 0, 1, Containment::kCenter}).count(), 0u);
}

TEST(Patches, CircularLesionMatchesExhaustiveScan) {
  const std::size_t n = 128, size = 32, margin = 4, stride = 8;
  HsiCube c = flat_cube(n, n, 0.5f);
  c.mask.assign(n * n, kBackground);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double di = static_cast<double>(i) - 64.0, dj = static_cast<double>(j) - 64.0;
      if (di * di + dj * dj <= 900.0) c.mask[i * n + j] = kBenignLesion;
    }
  auto lesion = [&](long i, long j) {
    return i >= 0 && j >= 0 && i < long(n) && j < long(n) && c.mask[i * n + j] != kBackground;
  };
  // A pixel survives erosion when its whole (2m+1)^2 window is lesion.
  auto survives = [&](long i, long j) {
    for (long a = -long(margin); a <= long(margin); ++a)
      for (long b = -long(margin); b <= long(margin); ++b)
        if (!lesion(i + a, j + b)) return false;
    return true;
  };
  for (Containment mode : {Containment::kCenter, Containment::kFull}) {
    std::size_t expected = 0;
    for (std::size_t ci = size / 2; ci + size / 2 <= n; ci += stride)
      for (std::size_t cj = size / 2; cj + size / 2 <= n; cj += stride) {
        bool ok = true;
        if (mode == Containment::kCenter) {
          ok = survives(long(ci), long(cj));
        } else {
          for (std::size_t i = ci - size / 2; i < ci + size / 2 && ok; ++i)
            for (std::size_t j = cj - size / 2; j < cj + size / 2 && ok; ++j) ok = survives(long(i), long(j));
        }
        expected += ok;
      }
    const PatchSet p = extract_patches(c, {size, margin, stride, mode});
    EXPECT_EQ(p.count(), expected);
    EXPECT_GT(expected, 0u);
  }
}

TEST(Patches, SubsamplingCommutesWithExtraction) {
  SynthSpec spec;
  spec.patients = 2;
  spec.seed = 5;
  for (const HsiCube& c : synth_generate(spec)) {
    const PatchOptions o{8, 4, 4, Containment::kCenter};
    for (std::size_t n : {1u, 2u, 3u, 4u}) {
      const PatchSet a = subsample_bands(extract_patches(c, o), n);
      const PatchSet b = extract_patches(subsample_bands(c, n), o);
      EXPECT_EQ(a.data, b.data);
      EXPECT_EQ(a.wavelengths, b.wavelengths);
      EXPECT_EQ(a.offsets, b.offsets);
    }
  }
}

TEST(Patches, PatchValuesComeFromTheCube) {
  const HsiCube c = random_cube(20, 20, 4, 3);
  HsiCube full = c;
  std::fill(full.mask.begin(), full.mask.end(), c.label == 1 ? kMalignantLesion : kBenignLesion);
  const PatchSet p = extract_patches(full, {6, 0, 5, Containment::kCenter});
  for (std::size_t k = 0; k < p.count(); ++k) {
    const auto [top, left] = p.offsets[k];
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t s = 0; s < 4; ++s)
          EXPECT_EQ(p.data[((k * 6 + i) * 6 + j) * 4 + s], static_cast<double>(full.at(top + i, left + j, s)));
  }
}

TEST(Synth, DeterministicAndValid) {
  SynthSpec spec;
  spec.patients = 6;
  spec.cubes_per_patient = 2;
  spec.seed = 11;
  const auto a = synth_generate(spec);
  const auto b = synth_generate(spec);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(write_cube(a[i]), write_cube(b[i]));
  spec.seed = 12;
  EXPECT_NE(write_cube(synth_generate(spec)[0]), write_cube(a[0]));
  std::size_t malignant = 0;
  for (std::size_t i = 0; i < a.size(); i += 2) {
    EXPECT_EQ(a[i].patient_id, a[i + 1].patient_id);
    EXPECT_EQ(a[i].label, a[i + 1].label);
    malignant += a[i].label;
  }
  EXPECT_EQ(malignant, 3u);
}

TEST(Synth, InvalidRatio) {
  SynthSpec spec;
  for (double r : {0.0, 1.0, -0.2, 1.5}) {
    spec.class_ratio = r;
    EXPECT_EQ(code_of([&] { synth_generate(spec); }), ErrorCode::kInvalidArgument);
  }
  EXPECT_EQ(code_of([] { parse_signal_kind("wavelet"); }), ErrorCode::kUnknownMode);
}

TEST(Synth, RgbInvisibleTemplatesHaveEqualBinMeans) {
  SynthSpec spec;
  spec.signal = SignalKind::kRgbInvisible;
  const SynthTemplates t = synth_templates(spec);
  const auto benign = t.class_mean(0), malignant = t.class_mean(1);
  for (const auto& [lo, hi] : kRgbBins) {
    double mb = 0.0, mm = 0.0;
    int n = 0;
    for (std::size_t s = 0; s < spec.wavelengths.size(); ++s) {
      if (spec.wavelengths[s] < lo || spec.wavelengths[s] > hi) continue;
      mb += benign[s];
      mm += malignant[s];
      ++n;
    }
    EXPECT_NEAR(mb / n, mm / n, 1e-12);
  }
  double differing = 0;
  for (std::size_t s = 0; s < benign.size(); ++s) differing += benign[s] != malignant[s];
  EXPECT_GE(differing, 20);
}

TEST(Synth, NoiseFreeBandDifferenceIsSeparableAtZero) {
  SynthSpec spec;
  spec.signal = SignalKind::kBandDifference;
  spec.noise = 0.0;
  spec.patients = 8;
  spec.signal_bands = {3, 9};
  for (const HsiCube& c : synth_generate(spec)) {
    for (std::size_t p = 0; p < c.height * c.width; ++p) {
      if (c.mask[p] == kBackground) continue;
      const double d = c.reflectance[p * c.bands() + 3] - c.reflectance[p * c.bands() + 9];
      if (c.label == 1) {
        EXPECT_GT(d, 0.0);
      } else {
        EXPECT_LT(d, 0.0);
      }
    }
  }
}

TEST(Synth, ClassesDifferOnlyInsideTheLesion) {
  SynthSpec spec;
  spec.noise = 0.0;
  const SynthTemplates t = synth_templates(spec);
  for (const HsiCube& c : synth_generate(spec)) {
    for (std::size_t p = 0; p < c.height * c.width; ++p) {
      if (c.mask[p] != kBackground) continue;
      // Background pixels are a positive multiple of the shared template.
      const double ratio = c.reflectance[p * c.bands()] / t.background[0];
      for (std::size_t s = 1; s < c.bands(); ++s) {
        EXPECT_NEAR(c.reflectance[p * c.bands() + s], ratio * t.background[s], 1e-6);
      }
    }
  }
}

namespace {

std::vector<PatientRecord> cohort(std::size_t malignant, std::size_t benign) {
  std::vector<PatientRecord> out;
  for (std::size_t i = 0; i < malignant + benign; ++i) {
    out.push_back({"pt" + std::to_string(i), i < malignant ? 1 : 0});
  }
  return out;
}

using Tally = std::pair<std::size_t, std::size_t>;

Tally tally(const std::vector<PatientRecord>& v) {
  std::size_t m = 0;
  for (const auto& p : v) m += p.label;
  return {m, v.size() - m};
}

}  // namespace

TEST(Splits, ClinicalQuotas) {
  const SplitPlan plan = make_splits(cohort(15, 83), 1);
  for (const auto& s : plan.subsets) {
    EXPECT_EQ(tally(s.test), Tally(3, 8));
    EXPECT_EQ(tally(s.validation), Tally(2, 6));
  }
  EXPECT_EQ(plan.remainder.size(), 41u);
  EXPECT_EQ(tally(plan.remainder), Tally(0, 41));
}

TEST(Splits, DisjointAndDeterministic) {
  for (RemainderPolicy policy : {RemainderPolicy::kTrain, RemainderPolicy::kExclude}) {
    const SplitPlan plan = make_splits(cohort(15, 83), 7, policy);
    EXPECT_EQ(plan.to_tsv(), make_splits(cohort(15, 83), 7, policy).to_tsv());
    EXPECT_NE(plan.to_tsv(), make_splits(cohort(15, 83), 8, policy).to_tsv());
    std::multiset<std::string> ids;
    for (const auto& s : plan.subsets) {
      for (const auto& p : s.test) ids.insert(p.id);
      for (const auto& p : s.validation) ids.insert(p.id);
    }
    for (const auto& p : plan.remainder) ids.insert(p.id);
    EXPECT_EQ(ids.size(), 98u);
    EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 98u);
    for (std::size_t k = 0; k < 3; ++k) {
      const Fold f = plan.fold(k);
      std::multiset<std::string> roles(f.train.begin(), f.train.end());
      roles.insert(f.validation.begin(), f.validation.end());
      roles.insert(f.test.begin(), f.test.end());
      EXPECT_EQ(std::set<std::string>(roles.begin(), roles.end()).size(), roles.size());
      EXPECT_EQ(f.train.size(), policy == RemainderPolicy::kTrain ? 38u + 41u : 38u);
    }
  }
}

TEST(Splits, ProportionalAndInfeasible) {
  const SplitPlan plan = make_splits(cohort(15, 15), 3);
  for (const auto& s : plan.subsets) {
    EXPECT_GE(tally(s.test).first, 1u);
    EXPECT_GE(tally(s.test).second, 1u);
    EXPECT_GE(tally(s.validation).first, 1u);
    EXPECT_GE(tally(s.validation).second, 1u);
  }
  EXPECT_EQ(code_of([] { make_splits(cohort(3, 40), 1); }), ErrorCode::kInfeasibleQuota);
  EXPECT_EQ(code_of([] { make_splits(cohort(10, 4), 1); }), ErrorCode::kInfeasibleQuota);
  auto dup = cohort(10, 10);
  dup[1].id = dup[0].id;
  EXPECT_EQ(code_of([&] { make_splits(dup, 1); }), ErrorCode::kInvalidArgument);
}

TEST(Splits, TsvRows) {
  const SplitPlan plan = make_splits(cohort(15, 83), 2, RemainderPolicy::kExclude);
  const std::string tsv = plan.to_tsv();
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 98);
  EXPECT_NE(tsv.find("\t-\texcluded\tbenign\n"), std::string::npos);
  EXPECT_NE(tsv.find("\t0\ttest\tmalignant\n"), std::string::npos);
}
