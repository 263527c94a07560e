#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssrc/binary_io.hpp"
#include "ssrc/tensor.hpp"

namespace ssrc {

/// Lesion mask values.
enum : std::uint8_t { kBackground = 0, kBenignLesion = 1, kMalignantLesion = 2 };

/// Patient label: 0 benign, 1 malignant.
using Label = int;

/// 430..680 nm in 10 nm steps.
std::vector<double> default_wavelengths();

/// One hyperspectral acquisition. Reflectance is stored as 32-bit floats,
/// row-major with the band index innermost.
struct HsiCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> wavelengths;
  std::vector<float> reflectance;
  std::vector<std::uint8_t> mask;
  Label label = 0;
  std::string patient_id;

  std::size_t bands() const noexcept { return wavelengths.size(); }
  float at(std::size_t i, std::size_t j, std::size_t s) const {
    return reflectance[(i * width + j) * bands() + s];
  }
  float& at(std::size_t i, std::size_t j, std::size_t s) {
    return reflectance[(i * width + j) * bands() + s];
  }
  std::uint8_t mask_at(std::size_t i, std::size_t j) const { return mask[i * width + j]; }
};

/// Checks every HsiCube invariant: positive extents, consistent sizes,
/// strictly increasing wavelengths, reflectance in [0, 1] (±1e-6), and one
/// nonempty 8-connected lesion whose mask value agrees with the label.
void validate_cube(const HsiCube& cube);

/// "HSICUBE1" container; see the README for the byte layout.
Bytes write_cube(const HsiCube& cube);
HsiCube read_cube(std::span<const std::uint8_t> bytes);

/// Wavelength bins averaged into R, G and B.
struct ColorBin {
  double lo_nm;
  double hi_nm;
};
inline constexpr std::array<ColorBin, 3> kRgbBins = {{{600.0, 680.0}, {500.0, 590.0}, {430.0, 490.0}}};

/// Band indices falling in each of kRgbBins (R, G, B order).
std::array<std::vector<std::size_t>, 3> rgb_bin_bands(std::span<const double> wavelengths);

/// H x W x 3 image (R, G, B) of per-bin mean reflectance.
Tensor derive_rgb(const HsiCube& cube);

/// Keeps band indices 0, n, 2n, ...
HsiCube subsample_bands(const HsiCube& cube, std::size_t every_nth);

enum class Containment {
  kCenter,  ///< the patch center lies in the eroded lesion
  kFull,    ///< every patch pixel lies in the eroded lesion
};

struct PatchOptions {
  std::size_t size = 32;
  std::size_t margin = 4;
  std::size_t stride = 8;
  Containment containment = Containment::kCenter;
};

/// A flat collection of equally sized patches, count x P x P x S, with
/// per-patch provenance.
struct PatchSet {
  std::size_t size = 0;
  std::vector<double> wavelengths;
  std::vector<double> data;
  std::vector<Label> labels;
  std::vector<std::string> patient_ids;
  /// Top-left pixel of each patch in its source cube.
  std::vector<std::array<std::size_t, 2>> offsets;

  std::size_t count() const noexcept { return labels.size(); }
  std::size_t bands() const noexcept { return wavelengths.size(); }
  std::size_t patch_values() const noexcept { return size * size * bands(); }

  /// Stacks the chosen patches into a B x P x P x S tensor.
  Tensor batch(std::span<const std::size_t> indices) const;
  PatchSet select(std::span<const std::size_t> indices) const;
  void append(const PatchSet& other);
};

/// Lesion pixels whose whole (2·margin+1)² neighbourhood is lesion; pixels
/// outside the image count as background.
std::vector<std::uint8_t> erode_mask(const HsiCube& cube, std::size_t margin);

/// Patches centred on the grid size/2 + k·stride (both axes) that fit inside
/// the image and satisfy the containment rule. A patch centred at c covers
/// [c - size/2, c - size/2 + size).
PatchSet extract_patches(const HsiCube& cube, const PatchOptions& options);

PatchSet subsample_bands(const PatchSet& patches, std::size_t every_nth);
PatchSet derive_rgb(const PatchSet& patches);

}  // namespace ssrc
