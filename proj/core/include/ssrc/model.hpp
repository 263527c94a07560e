#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssrc/autograd.hpp"
#include "ssrc/binary_io.hpp"
#include "ssrc/cgru.hpp"
#include "ssrc/nn.hpp"

namespace ssrc {

/// The deep-learning variants under comparison.
enum class Variant { kCnn2dRgb, kCnn2dHsi, kCnn3dHsi, kCgruOnly, kCgruCnn, kCnnCgru };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant variant);
std::span<const Variant> all_variants();

/// True for variants whose spectral states go through a selectable f_sel.
bool has_aggregation(Variant variant);

struct ModelConfig {
  Variant variant = Variant::kCgruCnn;
  /// Required for cgru-cnn and cnn-cgru, forbidden otherwise.
  std::optional<Aggregation> aggregation;
  std::size_t bands = 26;
  /// Hidden dimension N_C of each CGRU direction.
  std::size_t hidden = 16;
  std::size_t gate_kernel = 3;
  bool bidirectional = false;
  std::size_t initial_filters = 16;
  std::size_t dense_blocks = 3;
  /// `dims` is derived from the variant and ignored here.
  nn::DenseBlockConfig dense{};
  std::uint64_t seed = 0;

  /// Throws kInvalidConfig on an inconsistent field combination.
  void validate() const;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(std::string_view json);

struct NamedTensor {
  std::string name;
  Tensor value;
};

enum class InitKind { kUniformFanIn, kZeros };

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = product of all but
/// the last extent; zeros for biases. Reproducible per seed.
Tensor parameter_init(const Shape& shape, InitKind kind, std::uint64_t seed);

class Model {
 public:
  /// Instantiates parameters for a validated configuration.
  static Model build(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  std::span<const NamedTensor> parameters() const noexcept { return params_; }
  std::span<NamedTensor> parameters() noexcept { return params_; }
  std::size_t parameter_count() const;

  /// Replaces parameter values; names and shapes must match exactly.
  void load_parameters(std::vector<NamedTensor> params);

  /// Places every parameter on `graph`, in parameters() order.
  std::vector<Var> bind(Graph& graph, bool trainable) const;

  /// Logits B x 2 for a B x H x W x S batch.
  Var forward(Graph& graph, std::span<const Var> params, Var batch) const;

  /// Convenience forward pass without gradients.
  Tensor logits(const Tensor& batch) const;

  struct ConvRef {
    std::size_t kernel;
    std::size_t bias;
  };
  struct TrunkRef {
    int dims = 2;
    ConvRef initial{};
    std::vector<std::vector<ConvRef>> blocks;
  };
  struct CgruRef {
    std::size_t w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h;
  };
  struct Layout {
    std::optional<TrunkRef> trunk;
    std::optional<CgruRef> forward_cgru;
    std::optional<CgruRef> backward_cgru;
    std::size_t head_weight = 0;
    std::size_t head_bias = 0;
  };

 private:
  Model() = default;

  std::size_t add_param(std::string name, Shape shape, InitKind kind);
  TrunkRef add_trunk(const std::string& prefix, std::size_t in_channels, int dims,
                     std::size_t* out_channels);
  CgruRef add_cgru(const std::string& prefix, std::size_t in_channels);

  Var run_trunk(const TrunkRef& trunk, std::span<const Var> p, Var x) const;
  SpectralStates run_cgru(std::span<const Var> p, Var x) const;

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  Layout layout_;
};

/// Flat "SSRCNET1" container: per record u32 name length, name bytes, u32 rank,
/// u32 extents, f64 values; all little-endian.
Bytes write_checkpoint(std::span<const NamedTensor> params);
std::vector<NamedTensor> read_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes `<path>` (parameters) and `<path>.json` (configuration).
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace ssrc
