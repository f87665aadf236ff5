#pragma once

// Joint image-video tokenizer: a temporally causal 3D CNN encoder, the LFQ
// bottleneck, and a mirrored decoder with depth-to-space upsamplers and
// adaptive group norms driven by the quantized latents.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfqv/autograd.hpp"
#include "lfqv/lfq.hpp"
#include "lfqv/tensor.hpp"

namespace lfqv::tok {

struct TokenizerConfig {
  std::int64_t base_channels = 16;
  std::vector<std::int64_t> channel_multipliers{1, 2, 4};
  std::int64_t res_blocks = 1;
  // Per-stage downsampling applied after that stage's residual blocks.
  std::vector<std::int64_t> spatial_strides{2, 2, 2};
  // Temporal strides must form a suffix: once a stage downsamples time, every
  // later stage that downsamples does too.
  std::vector<std::int64_t> temporal_strides{1, 2, 2};
  std::int64_t temporal_kernel = 3;  // 1 gives a per-frame (image) model
  std::int64_t spatial_kernel = 3;
  double leaky_slope = 0.2;
  double latent_init_scale = 0.1;    // shrinks the last encoder conv at init
  lfq::LfqConfig lfq;

  std::int64_t stages() const { return static_cast<std::int64_t>(channel_multipliers.size()); }
  std::int64_t stage_channels(std::int64_t stage) const;
  std::int64_t spatial_factor() const;
  std::int64_t temporal_factor() const;
  std::int64_t latent_dim() const { return lfq.dim; }

  // Throws ConfigError.
  void validate() const;

  // Default CPU-trainable configuration.
  static TokenizerConfig toy();
  // Two stages, four channels: used for gradient checks.
  static TokenizerConfig tiny();

  std::map<std::string, std::string> to_kv() const;
  // Keys not present keep their defaults. Unknown keys with a "model."
  // prefix are rejected.
  static TokenizerConfig from_kv(const std::map<std::string, std::string>& kv);
};

struct Parameter {
  std::string name;
  Tensor value;
};

// Ordered registry; every name appears exactly once.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return items_.size(); }
  std::int64_t total_elements() const;

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }

 private:
  std::vector<Parameter> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

class TokenizerModel {
 public:
  TokenizerModel(TokenizerConfig config, ParameterSet params);

  // Fan-in scaled uniform init; adaptive norm projections start at zero.
  static TokenizerModel initialize(const TokenizerConfig& config, std::uint64_t seed);

  const TokenizerConfig& config() const { return config_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }

 private:
  TokenizerConfig config_;
  ParameterSet params_;
};

// Parameters placed on a tape, as leaves (trainable) or constants.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParameterSet& params, bool trainable);
  // Binds existing Vars, one per registry entry in order.
  BoundParams(const ParameterSet& params, std::span<const Var> vars);
  Var operator()(const std::string& name) const;
  const std::vector<Var>& vars() const { return vars_; }

 private:
  std::vector<Var> vars_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Output extents for an input of T x H x W; throws ShapeError naming the
// offending axis.
struct LatentDims {
  std::int64_t t, h, w;
};
LatentDims latent_dims(const TokenizerConfig& config, std::int64_t t, std::int64_t h,
                       std::int64_t w);

// video [T,H,W,3] or [N,T,H,W,3] -> pre-quantization latents [..,T',H',W',D].
Var encoder_forward(const TokenizerConfig& config, const BoundParams& params, const Var& video);
// codes [..,T',H',W',D] -> pixels [..,T,H,W,3]. The codes also drive every
// adaptive group norm.
Var decoder_forward(const TokenizerConfig& config, const BoundParams& params, const Var& codes);

struct ForwardResult {
  Var latents;         // pre-quantization
  Var codes;           // quantized (straight-through) or latents if bypassed
  Var reconstruction;
};

// Full autoencoder pass. With bypass_quantizer the decoder sees the raw
// latents, which makes the whole path smooth for finite-difference checks.
ForwardResult autoencode(const TokenizerConfig& config, const BoundParams& params,
                         const Var& video, bool bypass_quantizer = false);

struct EncodeResult {
  lfq::TokenGrid tokens;
  Tensor latents;  // [T',H',W',D]
};

EncodeResult encode(const TokenizerModel& model, const Tensor& video);
Tensor decode(const TokenizerModel& model, const lfq::TokenGrid& tokens);

// [kh,kw,Cin,Cout] or [1,kh,kw,Cin,Cout] -> [kt,kh,kw,Cin,Cout] with the 2D
// kernel in the last temporal slice and zeros elsewhere.
Tensor inflate_kernel(const Tensor& kernel2d, std::int64_t kt);

// Builds a temporal_kernel = kt model from a temporal_kernel = 1 image
// model with otherwise identical structure.
TokenizerModel inflate_2d_to_3d(const TokenizerModel& image_model, std::int64_t kt);

}  // namespace lfqv::tok
