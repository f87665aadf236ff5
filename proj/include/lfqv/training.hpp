#pragma once

// Desk-scale tokenizer training: reconstruction + commitment + annealed
// entropy loss, Adam, warmup/cosine learning rate, EMA weights, and a
// deterministic synthetic video source.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "lfqv/autograd.hpp"
#include "lfqv/checkpoint.hpp"
#include "lfqv/tokenizer.hpp"

namespace lfqv::train {

struct TrainConfig {
  std::int64_t steps = 500;
  std::int64_t batch_size = 8;
  double peak_lr = 2e-3;
  std::int64_t warmup_steps = 25;

  double reconstruction_weight = 5.0;
  double commitment_weight = 0.25;
  double entropy_weight = 0.1;
  double entropy_anneal_factor = 3.0;
  std::int64_t entropy_anneal_steps = 200;

  double adam_beta1 = 0.0;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  double ema_decay = 0.999;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping

  std::uint64_t seed = 0;
  std::int64_t clip_frames = 5;
  std::int64_t clip_height = 16;
  std::int64_t clip_width = 16;
  std::int64_t heldout_clips = 16;

  tok::TokenizerConfig model = tok::TokenizerConfig::toy();

  // Throws ConfigError.
  void validate() const;

  // Keys are the field names above (e.g. "peak_lr"); model fields use the
  // "model." prefix. Unknown keys are rejected.
  static TrainConfig from_kv(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_kv() const;
};

// ---- synthetic data ----

// Clips of moving coloured rectangles over smooth colour gradients. Every
// rectangle in a clip shares one integer velocity and wraps around the frame
// edges, so frame t+1 is frame t with the rectangle layer shifted. Values lie
// in [-1, 1]. Clip i is a pure function of (seed, i).
class SynthVideoSource {
 public:
  SynthVideoSource(std::uint64_t seed, std::int64_t frames, std::int64_t height,
                   std::int64_t width);

  Tensor clip(std::uint64_t index) const;                        // [T,H,W,3]
  Tensor batch(std::uint64_t first, std::int64_t count) const;   // [N,T,H,W,3]

  struct Motion {
    std::int64_t vy, vx;
  };
  Motion motion(std::uint64_t index) const;
  // The static gradient layer of clip `index`, [H,W,3].
  Tensor background(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::int64_t t_, h_, w_;
};

// `count` clips starting at clip 0 of the stream.
std::vector<Tensor> synth_dataset(std::uint64_t seed, std::int64_t count, std::int64_t t,
                                  std::int64_t h, std::int64_t w);

// Seed of the held-out stream, disjoint from the training stream.
std::uint64_t heldout_seed(std::uint64_t seed);

// ---- losses ----

struct LossBreakdown {
  double reconstruction = 0.0;  // MSE in [-1, 1] pixel space
  double commitment = 0.0;
  double entropy = 0.0;         // per_sample - batch entropy
  double entropy_weight = 0.0;  // annealed weight at this step
  double total = 0.0;
};

struct LossGraph {
  Var total;
  Var latents;
  LossBreakdown parts;
};

// Builds the weighted loss on `tape`. Throws TrainingFault naming the
// component if any term is not finite.
LossGraph total_loss(Tape& tape, const tok::TokenizerConfig& model_config,
                     const tok::BoundParams& params, const Tensor& batch, std::int64_t step,
                     const TrainConfig& config, bool bypass_quantizer = false);

// ---- optimizer pieces ----

double lr_schedule(std::int64_t step, double peak, std::int64_t warmup, std::int64_t total);

struct AdamState {
  std::int64_t t = 0;
  std::vector<Tensor> m, v;
};

// One bias-corrected Adam update of `params` in place. grads must match
// params one-to-one in order and shape (ContractError otherwise).
void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps);

// shadow = decay * shadow + (1 - decay) * params
void ema_update(std::vector<Tensor>& shadow, const std::vector<const Tensor*>& params, double decay);

// Scales grads so their joint L2 norm is at most max_norm. Returns the norm
// before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

// ---- training state ----

struct StepRecord {
  std::int64_t step = 0;
  LossBreakdown loss;
  double lr = 0.0;
  double grad_norm = 0.0;
  std::int64_t distinct_tokens = 0;  // in this step's batch

  std::string to_json() const;
};

struct TrainState {
  std::int64_t step = 0;
  tok::TokenizerModel model;
  AdamState adam;
  std::vector<Tensor> ema;
  std::vector<StepRecord> history;
};

TrainState init_state(const TrainConfig& config);

// One optimisation step on batch number state.step of the training stream.
StepRecord train_step(TrainState& state, const TrainConfig& config);

// Runs until state.step == config.steps. on_step is called after each step.
void train(TrainState& state, const TrainConfig& config,
           const std::function<void(const StepRecord&)>& on_step = {});

// Model with EMA weights substituted.
tok::TokenizerModel ema_model(const TrainState& state);

// Full state, including optimizer moments, EMA and loss history.
io::Container state_to_container(const TrainState& state, const TrainConfig& config);
TrainState state_from_container(const io::Container& c);
void save_state(const std::filesystem::path& path, const TrainState& state,
                const TrainConfig& config);
TrainState load_state(const std::filesystem::path& path);

struct EvalResult {
  double reconstruction_mse = 0.0;
  std::int64_t distinct_tokens = 0;
  std::int64_t total_tokens = 0;
};

// Reconstruction MSE (quantizer active) and codebook usage over the held-out
// stream: config.heldout_clips clips.
EvalResult evaluate_heldout(const tok::TokenizerModel& model, const TrainConfig& config);

}  // namespace lfqv::train
