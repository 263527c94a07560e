#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ssrc/hsi.hpp"

namespace ssrc {

/// How malignant lesions differ spectrally from benign ones.
enum class SignalKind {
  /// A linear tilt across the whole range; visible in RGB.
  kSpectralSlope,
  /// Alternating ±amplitude offsets on a chosen set of bands.
  kBandDifference,
  /// ±amplitude on adjacent band pairs inside each RGB bin, so every bin
  /// average is identical between classes.
  kRgbInvisible,
};

SignalKind parse_signal_kind(std::string_view name);
std::string_view to_string(SignalKind kind);

struct SynthSpec {
  std::size_t patients = 30;
  std::size_t cubes_per_patient = 1;
  /// Fraction of malignant patients, in (0, 1).
  double class_ratio = 0.5;
  SignalKind signal = SignalKind::kRgbInvisible;
  /// Standard deviation of per-voxel Gaussian noise.
  double noise = 0.02;
  /// Half the class separation of the signature, in reflectance units.
  double amplitude = 0.04;
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<double> wavelengths = default_wavelengths();
  /// Band indices carrying the band-difference signal.
  std::vector<std::size_t> signal_bands = {2, 6, 10, 14, 18, 22};
  std::uint64_t seed = 0;
};

/// Noise-free spectra the generator draws from. A lesion pixel of class y
/// has mean gain * (lesion + (2y - 1) * signature); background pixels have
/// mean gain * background. The gain is class independent.
struct SynthTemplates {
  std::vector<double> background;
  std::vector<double> lesion;
  std::vector<double> signature;

  std::vector<double> class_mean(Label label) const;
};

SynthTemplates synth_templates(const SynthSpec& spec);

/// Patient ids are "P0000", "P0001", ...; every cube of a patient shares its
/// label. Throws kInvalidArgument for a class ratio outside (0, 1).
std::vector<HsiCube> synth_generate(const SynthSpec& spec);

}  // namespace ssrc
