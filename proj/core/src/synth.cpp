#include "ssrc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "ssrc/error.hpp"
#include "ssrc/rng.hpp"

namespace ssrc {

SignalKind parse_signal_kind(std::string_view name) {
  if (name == "spectral-slope") return SignalKind::kSpectralSlope;
  if (name == "band-difference") return SignalKind::kBandDifference;
  if (name == "rgb-invisible") return SignalKind::kRgbInvisible;
  fail(ErrorCode::kUnknownMode, "unknown signal kind '" + std::string(name) + "'");
}

std::string_view to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::kSpectralSlope: return "spectral-slope";
    case SignalKind::kBandDifference: return "band-difference";
    case SignalKind::kRgbInvisible: return "rgb-invisible";
  }
  return "unknown";
}

std::vector<double> SynthTemplates::class_mean(Label label) const {
  const double sign = label == 1 ? 1.0 : -1.0;
  std::vector<double> m(lesion.size());
  for (std::size_t s = 0; s < m.size(); ++s) m[s] = lesion[s] + sign * signature[s];
  return m;
}

SynthTemplates synth_templates(const SynthSpec& spec) {
  const auto& nm = spec.wavelengths;
  const std::size_t n = nm.size();
  require(n >= 1, ErrorCode::kInvalidArgument, "need at least one band");
  const double lo = nm.front(), hi = nm.back();
  const double span = std::max(hi - lo, 1.0);

  SynthTemplates t;
  t.background.resize(n);
  t.lesion.resize(n);
  t.signature.assign(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = (nm[s] - lo) / span;
    t.background[s] = 0.50 + 0.15 * u;
    t.lesion[s] = 0.35 + 0.05 * std::sin(2.0 * std::numbers::pi * u);
  }

  switch (spec.signal) {
    case SignalKind::kSpectralSlope:
      for (std::size_t s = 0; s < n; ++s) {
        t.signature[s] = spec.amplitude * (2.0 * (nm[s] - lo) / span - 1.0);
      }
      break;
    case SignalKind::kBandDifference: {
      double level = 0.0;
      for (std::size_t b : spec.signal_bands) {
        require(b < n, ErrorCode::kInvalidArgument,
                "signal band " + std::to_string(b) + " outside the " + std::to_string(n) + "-band grid");
        level += t.lesion[b];
      }
      level /= static_cast<double>(std::max<std::size_t>(spec.signal_bands.size(), 1));
      // A common base level on the signal bands makes the sign of any
      // signal-band difference a noise-free class indicator.
      for (std::size_t k = 0; k < spec.signal_bands.size(); ++k) {
        t.lesion[spec.signal_bands[k]] = level;
        t.signature[spec.signal_bands[k]] = k % 2 == 0 ? spec.amplitude : -spec.amplitude;
      }
      break;
    }
    case SignalKind::kRgbInvisible:
      for (const auto& bin : rgb_bin_bands(nm)) {
        for (std::size_t k = 0; k + 1 < bin.size(); k += 2) {
          t.signature[bin[k]] = spec.amplitude;
          t.signature[bin[k + 1]] = -spec.amplitude;
        }
      }
      break;
  }
  return t;
}

namespace {

std::string patient_name(std::size_t p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%04zu", p);
  return buf;
}

HsiCube make_cube(const SynthSpec& spec, const SynthTemplates& t, const std::string& id, Label label,
                  double patient_gain, Rng& rng) {
  HsiCube c;
  c.height = spec.height;
  c.width = spec.width;
  c.wavelengths = spec.wavelengths;
  c.label = label;
  c.patient_id = id;
  const std::size_t S = c.bands();
  const double h = static_cast<double>(c.height), w = static_cast<double>(c.width);
  const double extent = std::min(h, w);

  const double ci = 0.5 * h + rng.uniform(-0.1, 0.1) * h;
  const double cj = 0.5 * w + rng.uniform(-0.1, 0.1) * w;
  const double radius = rng.uniform(0.30, 0.40) * extent;

  // Smooth multiplicative texture: two random plane waves.
  double kx[2], ky[2], phase[2];
  for (int k = 0; k < 2; ++k) {
    kx[k] = rng.uniform(-1.0, 1.0) * 2.0 * std::numbers::pi / extent * 2.0;
    ky[k] = rng.uniform(-1.0, 1.0) * 2.0 * std::numbers::pi / extent * 2.0;
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  const std::vector<double> lesion = t.class_mean(label);
  const std::uint8_t lesion_value = label == 1 ? kMalignantLesion : kBenignLesion;
  c.mask.assign(c.height * c.width, kBackground);
  c.reflectance.resize(c.height * c.width * S);
  for (std::size_t i = 0; i < c.height; ++i) {
    for (std::size_t j = 0; j < c.width; ++j) {
      const double di = static_cast<double>(i) + 0.5 - ci, dj = static_cast<double>(j) + 0.5 - cj;
      const bool inside = di * di + dj * dj <= radius * radius;
      if (inside) c.mask[i * c.width + j] = lesion_value;
      double gain = patient_gain;
      for (int k = 0; k < 2; ++k) {
        gain *= 1.0 + 0.05 * std::sin(kx[k] * static_cast<double>(i) + ky[k] * static_cast<double>(j) + phase[k]);
      }
      const std::vector<double>& mean = inside ? lesion : t.background;
      for (std::size_t s = 0; s < S; ++s) {
        const double v = gain * mean[s] + spec.noise * rng.normal();
        c.at(i, j, s) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return c;
}

}  // namespace

std::vector<HsiCube> synth_generate(const SynthSpec& spec) {
  require(spec.class_ratio > 0.0 && spec.class_ratio < 1.0, ErrorCode::kInvalidArgument,
          "class ratio must lie strictly between 0 and 1");
  require(spec.patients >= 1 && spec.cubes_per_patient >= 1, ErrorCode::kInvalidArgument,
          "need at least one patient and one cube per patient");
  require(spec.height >= 4 && spec.width >= 4, ErrorCode::kInvalidArgument, "cube too small");
  require(spec.noise >= 0.0 && spec.amplitude >= 0.0, ErrorCode::kInvalidArgument,
          "noise and amplitude must be non-negative");
  const SynthTemplates t = synth_templates(spec);

  auto malignant = static_cast<std::size_t>(
      std::llround(spec.class_ratio * static_cast<double>(spec.patients)));
  if (spec.patients >= 2) malignant = std::clamp<std::size_t>(malignant, 1, spec.patients - 1);
  std::vector<Label> labels(spec.patients, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(malignant), 1);
  Rng label_rng(derive_seed(spec.seed, 0));
  label_rng.shuffle(labels);

  std::vector<HsiCube> cubes;
  cubes.reserve(spec.patients * spec.cubes_per_patient);
  for (std::size_t p = 0; p < spec.patients; ++p) {
    Rng rng(derive_seed(spec.seed, p + 1));
    const double gain = rng.uniform(0.9, 1.1);
    for (std::size_t k = 0; k < spec.cubes_per_patient; ++k) {
      cubes.push_back(make_cube(spec, t, patient_name(p), labels[p], gain, rng));
    }
  }
  return cubes;
}

}  // namespace ssrc
