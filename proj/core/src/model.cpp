#include "ssrc/model.hpp"

#include <array>
#include <cmath>

#include "json.hpp"
#include "ssrc/error.hpp"
#include "ssrc/rng.hpp"

namespace ssrc {
namespace {

constexpr std::array<Variant, 6> kVariants = {Variant::kCnn2dRgb, Variant::kCnn2dHsi,
                                              Variant::kCnn3dHsi, Variant::kCgruOnly,
                                              Variant::kCgruCnn,  Variant::kCnnCgru};

constexpr std::string_view kCheckpointMagic = "SSRCNET1";

}  // namespace

Variant parse_variant(std::string_view name) {
  for (Variant v : kVariants) {
    if (to_string(v) == name) return v;
  }
  fail(ErrorCode::kInvalidConfig, "unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::kCnn2dRgb: return "cnn2d-rgb";
    case Variant::kCnn2dHsi: return "cnn2d-hsi";
    case Variant::kCnn3dHsi: return "cnn3d-hsi";
    case Variant::kCgruOnly: return "cgru-only";
    case Variant::kCgruCnn: return "cgru-cnn";
    case Variant::kCnnCgru: return "cnn-cgru";
  }
  return "unknown";
}

std::span<const Variant> all_variants() { return kVariants; }

bool has_aggregation(Variant variant) {
  return variant == Variant::kCgruCnn || variant == Variant::kCnnCgru;
}

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::kInvalidConfig, what); };
  check(aggregation.has_value() == has_aggregation(variant),
        std::string(to_string(variant)) +
            (has_aggregation(variant) ? " requires an aggregation mode"
                                      : " does not take an aggregation mode"));
  check(variant != Variant::kCnn2dRgb || bands == 3, "cnn2d-rgb requires 3 input bands, got " +
                                                         std::to_string(bands));
  check(bands >= 1, "band count must be positive");
  check(hidden >= 1, "hidden dimension must be positive");
  check(gate_kernel % 2 == 1, "gate kernel must be odd");
  check(dense.kernel % 2 == 1, "dense kernel must be odd");
  check(initial_filters >= 1, "initial filter count must be positive");
  check(dense_blocks >= 1, "at least one dense block is required");
  check(dense.layers == 0 || dense.growth >= 1, "growth rate must be positive");
  const bool recurrent = variant == Variant::kCgruOnly || variant == Variant::kCgruCnn ||
                         variant == Variant::kCnnCgru;
  check(recurrent || !bidirectional, "bidirectional applies to recurrent variants only");
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["variant"] = to_string(c.variant);
  j["aggregation"] = c.aggregation ? nlohmann::ordered_json(std::string(to_string(*c.aggregation)))
                                   : nlohmann::ordered_json(nullptr);
  j["bands"] = c.bands;
  j["hidden"] = c.hidden;
  j["gate_kernel"] = c.gate_kernel;
  j["bidirectional"] = c.bidirectional;
  j["initial_filters"] = c.initial_filters;
  j["dense_blocks"] = c.dense_blocks;
  j["dense_layers"] = c.dense.layers;
  j["growth"] = c.dense.growth;
  j["dense_kernel"] = c.dense.kernel;
  j["seed"] = c.seed;
  return j.dump(2);
}

ModelConfig config_from_json(std::string_view text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.variant = parse_variant(j.at("variant").get<std::string>());
    if (!j.at("aggregation").is_null()) {
      c.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    }
    c.bands = j.at("bands").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.gate_kernel = j.at("gate_kernel").get<std::size_t>();
    c.bidirectional = j.at("bidirectional").get<bool>();
    c.initial_filters = j.at("initial_filters").get<std::size_t>();
    c.dense_blocks = j.at("dense_blocks").get<std::size_t>();
    c.dense.layers = j.at("dense_layers").get<std::size_t>();
    c.dense.growth = j.at("growth").get<std::size_t>();
    c.dense.kernel = j.at("dense_kernel").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("model configuration: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor parameter_init(const Shape& shape, InitKind kind, std::uint64_t seed) {
  Tensor t(shape, 0.0);
  if (kind == InitKind::kZeros) return t;
  const std::size_t fan_in = shape.empty() ? 1 : t.size() / shape.back();
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Rng rng(seed);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

std::size_t Model::add_param(std::string name, Shape shape, InitKind kind) {
  const std::size_t index = params_.size();
  params_.push_back({std::move(name), parameter_init(shape, kind, derive_seed(config_.seed, index))});
  return index;
}

Model::TrunkRef Model::add_trunk(const std::string& prefix, std::size_t in_channels, int dims,
                                 std::size_t* out_channels) {
  TrunkRef trunk;
  trunk.dims = dims;
  const std::size_t k = config_.dense.kernel;
  auto kernel_shape = [&](std::size_t cin, std::size_t cout) {
    return dims == 2 ? Shape{k, k, cin, cout} : Shape{k, k, k, cin, cout};
  };
  std::size_t channels = config_.initial_filters;
  trunk.initial = {add_param(prefix + ".init.weight", kernel_shape(in_channels, channels),
                             InitKind::kUniformFanIn),
                   add_param(prefix + ".init.bias", Shape{channels}, InitKind::kZeros)};
  for (std::size_t b = 0; b < config_.dense_blocks; ++b) {
    std::vector<ConvRef> layers;
    for (std::size_t l = 0; l < config_.dense.layers; ++l) {
      const std::string name = prefix + ".block" + std::to_string(b) + ".layer" + std::to_string(l);
      layers.push_back({add_param(name + ".weight", kernel_shape(channels, config_.dense.growth),
                                  InitKind::kUniformFanIn),
                        add_param(name + ".bias", Shape{config_.dense.growth}, InitKind::kZeros)});
      channels += config_.dense.growth;
    }
    trunk.blocks.push_back(std::move(layers));
  }
  *out_channels = channels;
  return trunk;
}

Model::CgruRef Model::add_cgru(const std::string& prefix, std::size_t in_channels) {
  const std::size_t k = config_.gate_kernel;
  const std::size_t n = config_.hidden;
  auto w = [&](const char* gate) {
    return add_param(prefix + ".W_" + gate, Shape{k, k, in_channels, n}, InitKind::kUniformFanIn);
  };
  auto u = [&](const char* gate) {
    return add_param(prefix + ".U_" + gate, Shape{k, k, n, n}, InitKind::kUniformFanIn);
  };
  auto b = [&](const char* gate) {
    return add_param(prefix + ".b_" + gate, Shape{n}, InitKind::kZeros);
  };
  CgruRef ref{};
  ref.w_z = w("z");
  ref.w_r = w("r");
  ref.w_h = w("h");
  ref.u_z = u("z");
  ref.u_r = u("r");
  ref.u_h = u("h");
  ref.b_z = b("z");
  ref.b_r = b("r");
  ref.b_h = b("h");
  return ref;
}

Model Model::build(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config_ = config;
  const std::size_t directions = config.bidirectional ? 2 : 1;
  std::size_t features = 0;
  auto add_cgrus = [&](std::size_t in_channels) {
    m.layout_.forward_cgru = m.add_cgru("cgru.fwd", in_channels);
    if (config.bidirectional) m.layout_.backward_cgru = m.add_cgru("cgru.bwd", in_channels);
  };
  switch (config.variant) {
    case Variant::kCnn2dRgb:
    case Variant::kCnn2dHsi:
      m.layout_.trunk = m.add_trunk("trunk", config.bands, 2, &features);
      break;
    case Variant::kCnn3dHsi:
      m.layout_.trunk = m.add_trunk("trunk", 1, 3, &features);
      break;
    case Variant::kCgruOnly:
      add_cgrus(1);
      features = config.hidden * directions;
      break;
    case Variant::kCgruCnn:
      add_cgrus(1);
      m.layout_.trunk = m.add_trunk("trunk", config.hidden * directions, 2, &features);
      break;
    case Variant::kCnnCgru: {
      std::size_t trunk_channels = 0;
      m.layout_.trunk = m.add_trunk("trunk", 1, 2, &trunk_channels);
      add_cgrus(trunk_channels);
      features = config.hidden * directions;
      break;
    }
  }
  m.layout_.head_weight = m.add_param("head.weight", Shape{features, 2}, InitKind::kUniformFanIn);
  m.layout_.head_bias = m.add_param("head.bias", Shape{2}, InitKind::kZeros);
  return m;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void Model::load_parameters(std::vector<NamedTensor> params) {
  require(params.size() == params_.size(), ErrorCode::kMalformed,
          "checkpoint has " + std::to_string(params.size()) + " parameters, model expects " +
              std::to_string(params_.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].name == params_[i].name, ErrorCode::kMalformed,
            "parameter " + std::to_string(i) + " is '" + params[i].name + "', expected '" +
                params_[i].name + "'");
    require(params[i].value.shape() == params_[i].value.shape(), ErrorCode::kMalformed,
            "parameter '" + params[i].name + "' has shape " +
                shape_string(params[i].value.shape()));
  }
  params_ = std::move(params);
}

std::vector<Var> Model::bind(Graph& graph, bool trainable) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) vars.push_back(graph.leaf(p.value, trainable));
  return vars;
}

Var Model::run_trunk(const TrunkRef& trunk, std::span<const Var> p, Var x) const {
  Var h = trunk.dims == 2
              ? nn::conv2d(x, nn::Conv2dParams{p[trunk.initial.kernel], p[trunk.initial.bias]})
              : nn::conv3d(x, nn::Conv3dParams{p[trunk.initial.kernel], p[trunk.initial.bias]});
  for (std::size_t b = 0; b < trunk.blocks.size(); ++b) {
    std::vector<nn::DenseLayer> layers;
    for (const ConvRef& c : trunk.blocks[b]) layers.push_back({p[c.kernel], p[c.bias]});
    h = nn::dense_block(h, layers, trunk.dims);
    if (b + 1 == trunk.blocks.size()) break;
    h = trunk.dims == 2 ? nn::avg_pool2d(h) : nn::avg_pool3d(h, h.extent(3) >= 2);
  }
  return ops::relu(h);
}

SpectralStates Model::run_cgru(std::span<const Var> p, Var x) const {
  auto bind_cgru = [&](const CgruRef& r) {
    return CgruParams{p[r.w_z], p[r.w_r], p[r.w_h], p[r.u_z], p[r.u_r],
                      p[r.u_h], p[r.b_z], p[r.b_r], p[r.b_h]};
  };
  if (layout_.backward_cgru) {
    return bidirectional_cgru(x, bind_cgru(*layout_.forward_cgru),
                              bind_cgru(*layout_.backward_cgru));
  }
  return cgru_scan(x, bind_cgru(*layout_.forward_cgru), ScanDirection::kForward);
}

Var Model::forward(Graph&, std::span<const Var> p, Var batch) const {
  require(p.size() == params_.size(), ErrorCode::kInvalidArgument, "parameter binding mismatch");
  require(batch.rank() == 4, ErrorCode::kShapeMismatch,
          "batch must be B x H x W x S, got " + shape_string(batch.shape()));
  const Shape s = batch.shape();
  require(s[3] == config_.bands, ErrorCode::kBandCountMismatch,
          std::string(to_string(config_.variant)) + " expects " + std::to_string(config_.bands) +
              " bands, batch has " + std::to_string(s[3]));
  const Shape as_volume{s[0], s[1], s[2], s[3], 1};

  Var features;
  switch (config_.variant) {
    case Variant::kCnn2dRgb:
    case Variant::kCnn2dHsi:
      features = run_trunk(*layout_.trunk, p, batch);
      break;
    case Variant::kCnn3dHsi:
      features = run_trunk(*layout_.trunk, p, ops::reshape(batch, as_volume));
      break;
    case Variant::kCgruOnly:
      features = select_state(run_cgru(p, ops::reshape(batch, as_volume)), Aggregation::kLast);
      break;
    case Variant::kCgruCnn: {
      Var selected = select_state(run_cgru(p, ops::reshape(batch, as_volume)), *config_.aggregation);
      features = run_trunk(*layout_.trunk, p, selected);
      break;
    }
    case Variant::kCnnCgru: {
      // Every band goes through the shared trunk in one pass, stacked on the
      // batch axis, then the per-band feature maps are regrouped as a sequence.
      std::vector<Var> bands;
      for (std::size_t b = 0; b < s[3]; ++b) bands.push_back(ops::slice(batch, 3, b, b + 1));
      Var stacked = s[3] == 1 ? bands[0] : ops::concat(bands, 0);
      Var maps = run_trunk(*layout_.trunk, p, stacked);
      const Shape& ms = maps.shape();
      std::vector<Var> sequence;
      for (std::size_t b = 0; b < s[3]; ++b) {
        Var one = s[3] == 1 ? maps : ops::slice(maps, 0, b * s[0], (b + 1) * s[0]);
        sequence.push_back(ops::reshape(one, Shape{s[0], ms[1], ms[2], 1, ms[3]}));
      }
      Var seq = s[3] == 1 ? sequence[0] : ops::concat(sequence, 3);
      features = select_state(run_cgru(p, seq), *config_.aggregation);
      break;
    }
  }
  return nn::classifier_head(features, p[layout_.head_weight], p[layout_.head_bias]);
}

Tensor Model::logits(const Tensor& batch) const {
  Graph graph;
  std::vector<Var> p = bind(graph, false);
  return forward(graph, p, graph.constant(batch)).value();
}

Bytes write_checkpoint(std::span<const NamedTensor> params) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.raw(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t e : p.value.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (double v : p.value.values()) w.f64(v);
  }
  return w.take();
}

std::vector<NamedTensor> read_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  require(r.remaining() >= kCheckpointMagic.size() && r.raw(kCheckpointMagic.size()) == kCheckpointMagic,
          ErrorCode::kBadMagic, "not an SSRCNET1 checkpoint");
  std::vector<NamedTensor> params;
  while (!r.at_end()) {
    NamedTensor p;
    p.name = r.raw(r.u32());
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& e : shape) {
      e = r.u32();
      require(e > 0, ErrorCode::kMalformed, "zero extent in parameter '" + p.name + "'");
    }
    const std::size_t n = element_count(shape);
    r.need(n * sizeof(double));
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    p.value = Tensor(std::move(shape), std::move(values));
    params.push_back(std::move(p));
  }
  return params;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  write_file(path, write_checkpoint(model.parameters()));
  write_text(path.string() + ".json", config_to_json(model.config()) + "\n");
}

Model load_model(const std::filesystem::path& path) {
  Model model = Model::build(config_from_json(read_text(path.string() + ".json")));
  model.load_parameters(read_checkpoint(read_file(path)));
  return model;
}

}  // namespace ssrc
