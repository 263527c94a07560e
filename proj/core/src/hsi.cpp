#include "ssrc/hsi.hpp"

#include <algorithm>
#include <cmath>

#include "ssrc/error.hpp"

namespace ssrc {
namespace {

constexpr std::string_view kCubeMagic = "HSICUBE1";
constexpr double kReflectanceSlack = 1e-6;

std::size_t count_components(const HsiCube& cube) {
  std::vector<std::uint8_t> seen(cube.mask.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t components = 0;
  const long h = static_cast<long>(cube.height), w = static_cast<long>(cube.width);
  for (std::size_t start = 0; start < cube.mask.size(); ++start) {
    if (cube.mask[start] == kBackground || seen[start]) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const long i = static_cast<long>(p) / w, j = static_cast<long>(p) % w;
      for (long di = -1; di <= 1; ++di)
        for (long dj = -1; dj <= 1; ++dj) {
          const long ni = i + di, nj = j + dj;
          if (ni < 0 || nj < 0 || ni >= h || nj >= w) continue;
          const auto q = static_cast<std::size_t>(ni * w + nj);
          if (cube.mask[q] != kBackground && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
    }
  }
  return components;
}

}  // namespace

std::vector<double> default_wavelengths() {
  std::vector<double> w;
  for (int nm = 430; nm <= 680; nm += 10) w.push_back(nm);
  return w;
}

void validate_cube(const HsiCube& c) {
  require(c.height > 0 && c.width > 0 && c.bands() > 0, ErrorCode::kMalformed,
          "cube extents must be positive");
  require(c.reflectance.size() == c.height * c.width * c.bands(), ErrorCode::kMalformed,
          "reflectance size does not match H x W x S");
  require(c.mask.size() == c.height * c.width, ErrorCode::kMalformed,
          "mask size does not match H x W");
  for (std::size_t s = 0; s < c.bands(); ++s) {
    require(std::isfinite(c.wavelengths[s]), ErrorCode::kNonIncreasingWavelengths,
            "non-finite wavelength");
    require(s == 0 || c.wavelengths[s] > c.wavelengths[s - 1],
            ErrorCode::kNonIncreasingWavelengths,
            "wavelength " + std::to_string(s) + " does not increase");
  }
  for (float r : c.reflectance) {
    require(r >= -kReflectanceSlack && r <= 1.0 + kReflectanceSlack,
            ErrorCode::kReflectanceOutOfRange, "reflectance " + std::to_string(r) + " outside [0, 1]");
  }
  require(c.label == 0 || c.label == 1, ErrorCode::kMalformed, "label must be 0 or 1");
  const std::uint8_t lesion = c.label == 1 ? kMalignantLesion : kBenignLesion;
  bool any = false;
  for (std::uint8_t m : c.mask) {
    require(m == kBackground || m == lesion, ErrorCode::kMalformed,
            "mask value " + std::to_string(m) + " disagrees with label " + std::to_string(c.label));
    any = any || m != kBackground;
  }
  require(any, ErrorCode::kMalformed, "cube has no lesion pixels");
  require(count_components(c) == 1, ErrorCode::kMalformed, "cube must hold exactly one lesion region");
}

Bytes write_cube(const HsiCube& c) {
  validate_cube(c);
  ByteWriter w;
  w.raw(kCubeMagic);
  w.u32(static_cast<std::uint32_t>(c.height));
  w.u32(static_cast<std::uint32_t>(c.width));
  w.u32(static_cast<std::uint32_t>(c.bands()));
  for (double nm : c.wavelengths) w.f64(nm);
  for (float r : c.reflectance) w.f32(r);
  for (std::uint8_t m : c.mask) w.u8(m);
  w.u8(static_cast<std::uint8_t>(c.label));
  w.u32(static_cast<std::uint32_t>(c.patient_id.size()));
  w.raw(c.patient_id);
  return w.take();
}

HsiCube read_cube(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  require(r.remaining() >= kCubeMagic.size() && r.raw(kCubeMagic.size()) == kCubeMagic,
          ErrorCode::kBadMagic, "not an HSICUBE1 file");
  HsiCube c;
  c.height = r.u32();
  c.width = r.u32();
  const std::size_t bands = r.u32();
  const std::size_t pixels = c.height * c.width;
  // Check the payload length before allocating anything sized by the header.
  r.need(bands * 8 + pixels * bands * 4 + pixels + 1 + 4);
  c.wavelengths.resize(bands);
  for (double& nm : c.wavelengths) nm = r.f64();
  c.reflectance.resize(pixels * bands);
  for (float& v : c.reflectance) v = r.f32();
  c.mask.resize(pixels);
  for (std::uint8_t& m : c.mask) m = r.u8();
  c.label = r.u8();
  c.patient_id = r.raw(r.u32());
  require(r.at_end(), ErrorCode::kMalformed,
          std::to_string(r.remaining()) + " trailing bytes after cube payload");
  validate_cube(c);
  return c;
}

std::array<std::vector<std::size_t>, 3> rgb_bin_bands(std::span<const double> wavelengths) {
  std::array<std::vector<std::size_t>, 3> bins;
  for (std::size_t s = 0; s < wavelengths.size(); ++s) {
    for (std::size_t b = 0; b < 3; ++b) {
      if (wavelengths[s] >= kRgbBins[b].lo_nm && wavelengths[s] <= kRgbBins[b].hi_nm) {
        bins[b].push_back(s);
      }
    }
  }
  static constexpr const char* kNames[] = {"R", "G", "B"};
  for (std::size_t b = 0; b < 3; ++b) {
    require(!bins[b].empty(), ErrorCode::kEmptyColorBin,
            std::string("no band falls in the ") + kNames[b] + " bin");
  }
  return bins;
}

namespace {

// Averages each pixel's spectrum over the three color bins. `spectra` holds
// `pixels` consecutive spectra of length `bands`.
void bin_average(const auto* spectra, std::size_t pixels, std::size_t bands,
                 const std::array<std::vector<std::size_t>, 3>& bins, double* out) {
  for (std::size_t p = 0; p < pixels; ++p) {
    const auto* spectrum = spectra + p * bands;
    for (std::size_t b = 0; b < 3; ++b) {
      double acc = 0.0;
      for (std::size_t s : bins[b]) acc += static_cast<double>(spectrum[s]);
      out[p * 3 + b] = acc / static_cast<double>(bins[b].size());
    }
  }
}

}  // namespace

Tensor derive_rgb(const HsiCube& cube) {
  const auto bins = rgb_bin_bands(cube.wavelengths);
  Tensor rgb(Shape{cube.height, cube.width, 3});
  bin_average(cube.reflectance.data(), cube.height * cube.width, cube.bands(), bins, rgb.data());
  return rgb;
}

PatchSet derive_rgb(const PatchSet& patches) {
  const auto bins = rgb_bin_bands(patches.wavelengths);
  PatchSet out = patches;
  out.wavelengths.clear();
  for (const ColorBin& bin : kRgbBins) out.wavelengths.push_back(0.5 * (bin.lo_nm + bin.hi_nm));
  const std::size_t pixels = patches.count() * patches.size * patches.size;
  out.data.assign(pixels * 3, 0.0);
  bin_average(patches.data.data(), pixels, patches.bands(), bins, out.data.data());
  return out;
}

HsiCube subsample_bands(const HsiCube& cube, std::size_t every_nth) {
  require(every_nth >= 1, ErrorCode::kInvalidArgument, "subsampling factor must be >= 1");
  HsiCube out = cube;
  out.wavelengths.clear();
  for (std::size_t s = 0; s < cube.bands(); s += every_nth) out.wavelengths.push_back(cube.wavelengths[s]);
  out.reflectance.clear();
  out.reflectance.reserve(cube.height * cube.width * out.bands());
  for (std::size_t p = 0; p < cube.height * cube.width; ++p) {
    for (std::size_t s = 0; s < cube.bands(); s += every_nth) {
      out.reflectance.push_back(cube.reflectance[p * cube.bands() + s]);
    }
  }
  return out;
}

PatchSet subsample_bands(const PatchSet& patches, std::size_t every_nth) {
  require(every_nth >= 1, ErrorCode::kInvalidArgument, "subsampling factor must be >= 1");
  PatchSet out = patches;
  out.wavelengths.clear();
  for (std::size_t s = 0; s < patches.bands(); s += every_nth) {
    out.wavelengths.push_back(patches.wavelengths[s]);
  }
  out.data.clear();
  const std::size_t pixels = patches.count() * patches.size * patches.size;
  out.data.reserve(pixels * out.bands());
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t s = 0; s < patches.bands(); s += every_nth) {
      out.data.push_back(patches.data[p * patches.bands() + s]);
    }
  }
  return out;
}

std::vector<std::uint8_t> erode_mask(const HsiCube& cube, std::size_t margin) {
  const std::size_t h = cube.height, w = cube.width;
  std::vector<std::uint8_t> lesion(h * w);
  for (std::size_t p = 0; p < h * w; ++p) lesion[p] = cube.mask[p] != kBackground;
  if (margin == 0) return lesion;
  // Separable min filter: a pixel survives when its row window and then its
  // column window are all lesion.
  auto erode_axis = [&](const std::vector<std::uint8_t>& in, bool rows) {
    std::vector<std::uint8_t> out(h * w, 0);
    const std::size_t n = rows ? w : h, lines = rows ? h : w;
    for (std::size_t line = 0; line < lines; ++line) {
      auto at = [&](std::size_t k) { return rows ? in[line * w + k] : in[k * w + line]; };
      for (std::size_t k = 0; k < n; ++k) {
        if (k < margin || k + margin >= n) continue;
        bool keep = true;
        for (std::size_t t = k - margin; t <= k + margin && keep; ++t) keep = at(t) != 0;
        (rows ? out[line * w + k] : out[k * w + line]) = keep;
      }
    }
    return out;
  };
  return erode_axis(erode_axis(lesion, true), false);
}

PatchSet extract_patches(const HsiCube& cube, const PatchOptions& o) {
  require(o.size >= 1 && o.stride >= 1, ErrorCode::kInvalidArgument,
          "patch size and stride must be positive");
  const std::vector<std::uint8_t> eroded = erode_mask(cube, o.margin);
  const std::size_t half = o.size / 2;
  const std::size_t bands = cube.bands();

  // Summed-area table of the eroded mask for the full-containment test.
  std::vector<std::size_t> sat((cube.height + 1) * (cube.width + 1), 0);
  const std::size_t sw = cube.width + 1;
  for (std::size_t i = 0; i < cube.height; ++i)
    for (std::size_t j = 0; j < cube.width; ++j)
      sat[(i + 1) * sw + j + 1] =
          eroded[i * cube.width + j] + sat[i * sw + j + 1] + sat[(i + 1) * sw + j] - sat[i * sw + j];

  PatchSet out;
  out.size = o.size;
  out.wavelengths = cube.wavelengths;
  for (std::size_t ci = half; ci + o.size - half <= cube.height; ci += o.stride) {
    for (std::size_t cj = half; cj + o.size - half <= cube.width; cj += o.stride) {
      const std::size_t top = ci - half, left = cj - half;
      bool ok;
      if (o.containment == Containment::kCenter) {
        ok = eroded[ci * cube.width + cj] != 0;
      } else {
        const std::size_t b = top + o.size, r = left + o.size;
        ok = sat[b * sw + r] - sat[top * sw + r] - sat[b * sw + left] + sat[top * sw + left] ==
             o.size * o.size;
      }
      if (!ok) continue;
      for (std::size_t i = 0; i < o.size; ++i) {
        const float* row = &cube.reflectance[((top + i) * cube.width + left) * bands];
        out.data.insert(out.data.end(), row, row + o.size * bands);
      }
      out.labels.push_back(cube.label);
      out.patient_ids.push_back(cube.patient_id);
      out.offsets.push_back({top, left});
    }
  }
  require(out.count() > 0, ErrorCode::kLesionTooSmall,
          "lesion of patient '" + cube.patient_id + "' admits no " + std::to_string(o.size) + "x" +
              std::to_string(o.size) + " patch after a " + std::to_string(o.margin) +
              "-pixel margin");
  return out;
}

Tensor PatchSet::batch(std::span<const std::size_t> indices) const {
  require(!indices.empty(), ErrorCode::kEmptyInput, "empty batch");
  const std::size_t n = patch_values();
  std::vector<double> values;
  values.reserve(indices.size() * n);
  for (std::size_t k : indices) {
    require(k < count(), ErrorCode::kInvalidArgument, "patch index out of range");
    values.insert(values.end(), data.begin() + static_cast<std::ptrdiff_t>(k * n),
                  data.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
  }
  return Tensor(Shape{indices.size(), size, size, bands()}, std::move(values));
}

PatchSet PatchSet::select(std::span<const std::size_t> indices) const {
  PatchSet out;
  out.size = size;
  out.wavelengths = wavelengths;
  const std::size_t n = patch_values();
  for (std::size_t k : indices) {
    require(k < count(), ErrorCode::kInvalidArgument, "patch index out of range");
    out.data.insert(out.data.end(), data.begin() + static_cast<std::ptrdiff_t>(k * n),
                    data.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
    out.labels.push_back(labels[k]);
    out.patient_ids.push_back(patient_ids[k]);
    out.offsets.push_back(offsets[k]);
  }
  return out;
}

void PatchSet::append(const PatchSet& other) {
  if (count() == 0 && wavelengths.empty()) {
    *this = other;
    return;
  }
  require(other.size == size && other.wavelengths == wavelengths, ErrorCode::kShapeMismatch,
          "cannot append patches of a different size or band grid");
  data.insert(data.end(), other.data.begin(), other.data.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  patient_ids.insert(patient_ids.end(), other.patient_ids.begin(), other.patient_ids.end());
  offsets.insert(offsets.end(), other.offsets.begin(), other.offsets.end());
}

}  // namespace ssrc
