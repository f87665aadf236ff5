#include "lfqv/tokenizer.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "lfqv/causal_ops.hpp"
#include "lfqv/errors.hpp"
#include "lfqv/rng.hpp"

namespace lfqv::tok {

namespace {

enum class Init { kFanIn, kZero };

using Declare = std::function<void(const std::string& name, const Shape& shape, Init init,
                                   double gain)>;

bool downsamples(const TokenizerConfig& c, std::int64_t stage) {
  const auto i = static_cast<std::size_t>(stage);
  return c.spatial_strides[i] > 1 || c.temporal_strides[i] > 1;
}

std::string stage_name(const char* side, std::int64_t stage) {
  return std::string(side) + ".s" + std::to_string(stage);
}

Shape conv_shape(const TokenizerConfig& c, std::int64_t cin, std::int64_t cout) {
  return {c.temporal_kernel, c.spatial_kernel, c.spatial_kernel, cin, cout};
}

void declare_conv(const Declare& d, const std::string& name, Shape shape, double gain = 1.0) {
  const std::int64_t cout = shape.back();
  d(name + ".w", shape, Init::kFanIn, gain);
  d(name + ".b", Shape{cout}, Init::kZero, 0.0);
}

void declare_res(const TokenizerConfig& c, const Declare& d, const std::string& prefix,
                 std::int64_t cin, std::int64_t cout) {
  declare_conv(d, prefix + ".conv1", conv_shape(c, cin, cout));
  declare_conv(d, prefix + ".conv2", conv_shape(c, cout, cout));
  if (cin != cout) declare_conv(d, prefix + ".skip", Shape{1, 1, 1, cin, cout});
}

// Single source of truth for parameter names, shapes and init.
void declare_all(const TokenizerConfig& c, const Declare& d) {
  const std::int64_t dim = c.latent_dim();
  declare_conv(d, "enc.conv_in", conv_shape(c, 3, c.stage_channels(0)));
  std::int64_t ch = c.stage_channels(0);
  for (std::int64_t i = 0; i < c.stages(); ++i) {
    const std::int64_t ci = c.stage_channels(i);
    for (std::int64_t j = 0; j < c.res_blocks; ++j) {
      declare_res(c, d, stage_name("enc", i) + ".res" + std::to_string(j), ch, ci);
      ch = ci;
    }
    if (downsamples(c, i)) declare_conv(d, stage_name("enc", i) + ".down", conv_shape(c, ch, ch));
  }
  declare_conv(d, "enc.conv_out", conv_shape(c, ch, dim), c.latent_init_scale);

  declare_conv(d, "dec.conv_in", conv_shape(c, dim, ch));
  for (std::int64_t i = c.stages() - 1; i >= 0; --i) {
    const std::string s = stage_name("dec", i);
    if (downsamples(c, i)) {
      const std::int64_t r = c.spatial_strides[static_cast<std::size_t>(i)];
      declare_conv(d, s + ".up", conv_shape(c, ch, ch * r * r));
    }
    d(s + ".agn.w_gamma", Shape{dim, ch}, Init::kZero, 0.0);
    d(s + ".agn.b_gamma", Shape{ch}, Init::kZero, 0.0);
    d(s + ".agn.w_beta", Shape{dim, ch}, Init::kZero, 0.0);
    d(s + ".agn.b_beta", Shape{ch}, Init::kZero, 0.0);
    const std::int64_t ci = c.stage_channels(i);
    for (std::int64_t j = 0; j < c.res_blocks; ++j) {
      declare_res(c, d, s + ".res" + std::to_string(j), ch, ci);
      ch = ci;
    }
  }
  declare_conv(d, "dec.conv_out", conv_shape(c, ch, 3));
}

Var conv(const BoundParams& p, const std::string& name, const Var& x,
         const causal::Stride3& stride = {1, 1, 1}) {
  return bias_add(causal::causal_conv3d(x, p(name + ".w"), stride), p(name + ".b"));
}

Var norm_act(const TokenizerConfig& c, const Var& x) {
  const std::int64_t ch = x.shape().back();
  return leaky_relu(causal::group_norm(x, causal::default_groups(ch)), c.leaky_slope);
}

Var res_block(const TokenizerConfig& c, const BoundParams& p, const std::string& prefix,
              const Var& x, std::int64_t cin, std::int64_t cout) {
  Var h = conv(p, prefix + ".conv1", norm_act(c, x));
  h = conv(p, prefix + ".conv2", norm_act(c, h));
  Var skip = cin == cout ? x : conv(p, prefix + ".skip", x);
  return add(skip, h);
}

std::vector<std::int64_t> parse_list(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoll(item));
  }
  return out;
}

std::string join_list(const std::vector<std::int64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ---- config ----

std::int64_t TokenizerConfig::stage_channels(std::int64_t stage) const {
  return base_channels * channel_multipliers.at(static_cast<std::size_t>(stage));
}

std::int64_t TokenizerConfig::spatial_factor() const {
  std::int64_t f = 1;
  for (auto s : spatial_strides) f *= s;
  return f;
}

std::int64_t TokenizerConfig::temporal_factor() const {
  std::int64_t f = 1;
  for (auto s : temporal_strides) f *= s;
  return f;
}

void TokenizerConfig::validate() const {
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (channel_multipliers.empty()) throw ConfigError("channel_multipliers must not be empty");
  for (auto m : channel_multipliers)
    if (m < 1) throw ConfigError("channel multipliers must be >= 1");
  if (spatial_strides.size() != channel_multipliers.size() ||
      temporal_strides.size() != channel_multipliers.size()) {
    throw ConfigError("spatial_strides and temporal_strides need one entry per stage");
  }
  if (res_blocks < 1) throw ConfigError("res_blocks must be >= 1");
  if (temporal_kernel < 1 || spatial_kernel < 1) throw ConfigError("kernel sizes must be >= 1");
  bool temporal_seen = false;
  for (std::size_t i = 0; i < temporal_strides.size(); ++i) {
    if (spatial_strides[i] < 1 || temporal_strides[i] < 1) {
      throw ConfigError("strides must be >= 1");
    }
    if (temporal_strides[i] > 1) {
      temporal_seen = true;
    } else if (temporal_seen && spatial_strides[i] > 1) {
      throw ConfigError("temporal downsampling must occupy the last downsampling stages");
    }
  }
  lfq.validate();
}

TokenizerConfig TokenizerConfig::toy() { return TokenizerConfig{}; }

TokenizerConfig TokenizerConfig::tiny() {
  TokenizerConfig c;
  c.base_channels = 4;
  c.channel_multipliers = {1, 1};
  c.spatial_strides = {2, 2};
  c.temporal_strides = {1, 2};
  c.latent_init_scale = 1.0;
  c.lfq.dim = 4;
  c.lfq.subgroup_size = 4;
  c.lfq.num_subspaces = 2;
  return c;
}

std::map<std::string, std::string> TokenizerConfig::to_kv() const {
  return {
      {"model.base_channels", std::to_string(base_channels)},
      {"model.channel_multipliers", join_list(channel_multipliers)},
      {"model.res_blocks", std::to_string(res_blocks)},
      {"model.spatial_strides", join_list(spatial_strides)},
      {"model.temporal_strides", join_list(temporal_strides)},
      {"model.temporal_kernel", std::to_string(temporal_kernel)},
      {"model.spatial_kernel", std::to_string(spatial_kernel)},
      {"model.leaky_slope", fmt_double(leaky_slope)},
      {"model.latent_init_scale", fmt_double(latent_init_scale)},
      {"model.latent_dim", std::to_string(lfq.dim)},
      {"model.entropy_temperature", fmt_double(lfq.entropy_temperature)},
      {"model.entropy_subgroup", std::to_string(lfq.subgroup_size)},
      {"model.num_subspaces", std::to_string(lfq.num_subspaces)},
  };
}

TokenizerConfig TokenizerConfig::from_kv(const std::map<std::string, std::string>& kv) {
  TokenizerConfig c;
  bool subgroup_given = false;
  for (const auto& [key, value] : kv) {
    if (key.rfind("model.", 0) != 0) continue;
    const std::string k = key.substr(6);
    try {
      if (k == "base_channels") c.base_channels = std::stoll(value);
      else if (k == "channel_multipliers") c.channel_multipliers = parse_list(value);
      else if (k == "res_blocks") c.res_blocks = std::stoll(value);
      else if (k == "spatial_strides") c.spatial_strides = parse_list(value);
      else if (k == "temporal_strides") c.temporal_strides = parse_list(value);
      else if (k == "temporal_kernel") c.temporal_kernel = std::stoll(value);
      else if (k == "spatial_kernel") c.spatial_kernel = std::stoll(value);
      else if (k == "leaky_slope") c.leaky_slope = std::stod(value);
      else if (k == "latent_init_scale") c.latent_init_scale = std::stod(value);
      else if (k == "latent_dim") c.lfq.dim = static_cast<int>(std::stoll(value));
      else if (k == "entropy_temperature") c.lfq.entropy_temperature = std::stod(value);
      else if (k == "entropy_subgroup") {
        c.lfq.subgroup_size = static_cast<int>(std::stoll(value));
        subgroup_given = true;
      } else if (k == "num_subspaces") c.lfq.num_subspaces = static_cast<int>(std::stoll(value));
      else throw ConfigError("unknown model key '" + key + "'");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    }
  }
  if (!subgroup_given) c.lfq.subgroup_size = c.lfq.dim;
  c.validate();
  return c;
}

// ---- parameters ----

void ParameterSet::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
  index_.emplace(name, items_.size());
  items_.push_back(Parameter{std::move(name), std::move(value)});
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return items_[it->second].value;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return items_[it->second].value;
}

std::int64_t ParameterSet::total_elements() const {
  std::int64_t n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

TokenizerModel::TokenizerModel(TokenizerConfig config, ParameterSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  declare_all(config_, [this](const std::string& name, const Shape& shape, Init, double) {
    if (!params_.contains(name)) throw FormatError("missing parameter '" + name + "'");
    if (params_.at(name).shape() != shape) {
      throw FormatError("parameter '" + name + "' has shape " +
                        shape_str(params_.at(name).shape()) + ", expected " + shape_str(shape));
    }
  });
  std::size_t declared = 0;
  declare_all(config_, [&declared](const std::string&, const Shape&, Init, double) { ++declared; });
  if (declared != params_.size()) throw FormatError("unexpected extra parameters in model");
}

TokenizerModel TokenizerModel::initialize(const TokenizerConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParameterSet params;
  declare_all(config, [&](const std::string& name, const Shape& shape, Init init, double gain) {
    Tensor t(shape);
    if (init == Init::kFanIn) {
      std::int64_t fan_in = 1;
      for (std::size_t a = 0; a + 1 < shape.size(); ++a) fan_in *= shape[a];
      const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
      for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    }
    params.add(name, std::move(t));
  });
  return TokenizerModel(config, std::move(params));
}

BoundParams::BoundParams(Tape& tape, const ParameterSet& params, bool trainable) {
  vars_.reserve(params.size());
  for (const auto& p : params.items()) {
    index_.emplace(p.name, vars_.size());
    vars_.push_back(trainable ? tape.leaf(p.value) : tape.constant(p.value));
  }
}

BoundParams::BoundParams(const ParameterSet& params, std::span<const Var> vars) {
  if (vars.size() != params.size()) {
    throw ContractError("BoundParams: " + std::to_string(vars.size()) + " vars for " +
                        std::to_string(params.size()) + " parameters");
  }
  vars_.assign(vars.begin(), vars.end());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto& p = params.items()[i];
    if (vars_[i].shape() != p.value.shape()) {
      throw DimensionError("BoundParams: '" + p.name + "' bound to shape " +
                           shape_str(vars_[i].shape()));
    }
    index_.emplace(p.name, i);
  }
}

Var BoundParams::operator()(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unbound parameter '" + name + "'");
  return vars_[it->second];
}

// ---- forward ----

LatentDims latent_dims(const TokenizerConfig& config, std::int64_t t, std::int64_t h,
                       std::int64_t w) {
  const std::int64_t s = config.temporal_factor();
  const std::int64_t f = config.spatial_factor();
  if (t < 1 || (t - 1) % s != 0) {
    throw ShapeError("axis T: frame count " + std::to_string(t) +
                     " must satisfy (T - 1) % " + std::to_string(s) + " == 0");
  }
  if (h < 1 || h % f != 0) {
    throw ShapeError("axis H: height " + std::to_string(h) + " must be a multiple of " +
                     std::to_string(f));
  }
  if (w < 1 || w % f != 0) {
    throw ShapeError("axis W: width " + std::to_string(w) + " must be a multiple of " +
                     std::to_string(f));
  }
  return {1 + (t - 1) / s, h / f, w / f};
}

Var encoder_forward(const TokenizerConfig& c, const BoundParams& p, const Var& video) {
  const auto v = video_dims(video.shape(), "encode");
  if (v.c != 3) throw DimensionError("encode: expected 3 colour channels, got " + std::to_string(v.c));
  latent_dims(c, v.t, v.h, v.w);

  Var x = conv(p, "enc.conv_in", video);
  std::int64_t ch = c.stage_channels(0);
  for (std::int64_t i = 0; i < c.stages(); ++i) {
    const std::int64_t ci = c.stage_channels(i);
    for (std::int64_t j = 0; j < c.res_blocks; ++j) {
      x = res_block(c, p, stage_name("enc", i) + ".res" + std::to_string(j), x, ch, ci);
      ch = ci;
    }
    if (downsamples(c, i)) {
      const std::string name = stage_name("enc", i) + ".down";
      const auto ts = c.temporal_strides[static_cast<std::size_t>(i)];
      const auto ss = c.spatial_strides[static_cast<std::size_t>(i)];
      x = bias_add(causal::temporal_downsample(x, p(name + ".w"), ts, ss), p(name + ".b"));
    }
  }
  return conv(p, "enc.conv_out", norm_act(c, x));
}

Var decoder_forward(const TokenizerConfig& c, const BoundParams& p, const Var& codes) {
  const auto v = video_dims(codes.shape(), "decode");
  if (v.c != c.latent_dim()) {
    throw DimensionError("decode: code width " + std::to_string(v.c) + " != latent dim " +
                         std::to_string(c.latent_dim()));
  }
  Var x = conv(p, "dec.conv_in", codes);
  std::int64_t ch = c.stage_channels(c.stages() - 1);
  for (std::int64_t i = c.stages() - 1; i >= 0; --i) {
    const std::string s = stage_name("dec", i);
    if (downsamples(c, i)) {
      const auto r = c.spatial_strides[static_cast<std::size_t>(i)];
      const auto ts = c.temporal_strides[static_cast<std::size_t>(i)];
      x = conv(p, s + ".up", x);
      if (r > 1) x = causal::depth_to_space(x, r);
      if (ts > 1) x = causal::temporal_upsample(x, ts);
    }
    causal::AdaptiveNormParams agn{p(s + ".agn.w_gamma"), p(s + ".agn.b_gamma"),
                                   p(s + ".agn.w_beta"), p(s + ".agn.b_beta")};
    x = causal::adaptive_group_norm(x, codes, causal::default_groups(ch), agn);
    const std::int64_t ci = c.stage_channels(i);
    for (std::int64_t j = 0; j < c.res_blocks; ++j) {
      x = res_block(c, p, s + ".res" + std::to_string(j), x, ch, ci);
      ch = ci;
    }
  }
  return conv(p, "dec.conv_out", norm_act(c, x));
}

ForwardResult autoencode(const TokenizerConfig& config, const BoundParams& params,
                         const Var& video, bool bypass_quantizer) {
  ForwardResult r;
  r.latents = encoder_forward(config, params, video);
  r.codes = bypass_quantizer ? r.latents : lfq::quantize(r.latents);
  r.reconstruction = decoder_forward(config, params, r.codes);
  return r;
}

EncodeResult encode(const TokenizerModel& model, const Tensor& video) {
  if (video.rank() != 4) {
    throw DimensionError("encode expects a single clip [T,H,W,3], got " + shape_str(video.shape()));
  }
  Tape tape;
  BoundParams p(tape, model.params(), false);
  Var z = encoder_forward(model.config(), p, tape.constant(video));
  EncodeResult r{lfq::token_index(lfq::quantize(z.value())), z.value()};
  return r;
}

Tensor decode(const TokenizerModel& model, const lfq::TokenGrid& tokens) {
  if (tokens.dim != model.config().latent_dim()) {
    throw ShapeError("decode: token grid has D = " + std::to_string(tokens.dim) +
                     " but the model expects " + std::to_string(model.config().latent_dim()));
  }
  Tape tape;
  BoundParams p(tape, model.params(), false);
  return decoder_forward(model.config(), p, tape.constant(lfq::grid_to_codes(tokens))).value();
}

// ---- inflation ----

Tensor inflate_kernel(const Tensor& kernel2d, std::int64_t kt) {
  if (kt < 1) throw DimensionError("inflate_kernel: kt must be >= 1");
  Shape s = kernel2d.shape();
  if (s.size() == 5) {
    if (s[0] != 1) throw DimensionError("inflate_kernel: 2D kernel must have temporal extent 1");
    s.erase(s.begin());
  }
  if (s.size() != 4) {
    throw DimensionError("inflate_kernel: expected [kh,kw,Cin,Cout], got " +
                         shape_str(kernel2d.shape()));
  }
  Tensor out(Shape{kt, s[0], s[1], s[2], s[3]});
  const std::int64_t slice = kernel2d.size();
  for (std::int64_t i = 0; i < slice; ++i) out[(kt - 1) * slice + i] = kernel2d[i];
  return out;
}

TokenizerModel inflate_2d_to_3d(const TokenizerModel& image_model, std::int64_t kt) {
  const TokenizerConfig& src = image_model.config();
  if (src.temporal_kernel != 1) {
    throw DimensionError("inflate_2d_to_3d: source model must have temporal_kernel 1");
  }
  TokenizerConfig dst = src;
  dst.temporal_kernel = kt;
  ParameterSet params;
  declare_all(dst, [&](const std::string& name, const Shape& shape, Init, double) {
    const Tensor& w = image_model.params().at(name);
    if (w.shape() == shape) {
      params.add(name, w);
      return;
    }
    Tensor inflated = inflate_kernel(w, kt);
    if (inflated.shape() != shape) {
      throw DimensionError("inflate_2d_to_3d: '" + name + "' " + shape_str(w.shape()) +
                           " cannot inflate to " + shape_str(shape));
    }
    params.add(name, std::move(inflated));
  });
  return TokenizerModel(dst, std::move(params));
}

}  // namespace lfqv::tok
