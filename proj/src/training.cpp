#include "lfqv/training.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

#include "lfqv/errors.hpp"
#include "lfqv/lfq.hpp"

namespace lfqv::train {

namespace {

void check_finite(double v, const char* component) {
  if (!std::isfinite(v)) throw TrainingFault(component, "non-finite value " + std::to_string(v));
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::int64_t distinct_codes(const Tensor& latents) {
  const std::int64_t d = latents.dim(-1);
  std::set<std::uint64_t> seen;
  for (std::int64_t i = 0; i < latents.size(); i += d) {
    seen.insert(lfq::token_index(latents.data().subspan(static_cast<std::size_t>(i),
                                                        static_cast<std::size_t>(d))));
  }
  return static_cast<std::int64_t>(seen.size());
}

constexpr int kHistoryColumns = 9;

}  // namespace

// ---- config ----

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(peak_lr >= 0.0)) throw ConfigError("peak_lr must be >= 0");
  if (warmup_steps < 1 || (steps > 0 && warmup_steps >= steps)) {
    throw ConfigError("warmup_steps must satisfy 0 < warmup < steps");
  }
  if (reconstruction_weight < 0 || commitment_weight < 0 || entropy_weight < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (entropy_anneal_steps <= 0) throw ConfigError("entropy_anneal_steps must be > 0");
  if (entropy_anneal_factor < 0) throw ConfigError("entropy_anneal_factor must be >= 0");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must be in [0, 1)");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be > 0");
  if (heldout_clips < 1) throw ConfigError("heldout_clips must be >= 1");
  model.validate();
  tok::latent_dims(model, clip_frames, clip_height, clip_width);
}

TrainConfig TrainConfig::from_kv(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  c.model = tok::TokenizerConfig::from_kv(kv);
  for (const auto& [key, value] : kv) {
    if (key.rfind("model.", 0) == 0) continue;
    try {
      if (key == "steps") c.steps = std::stoll(value);
      else if (key == "batch_size") c.batch_size = std::stoll(value);
      else if (key == "peak_lr") c.peak_lr = std::stod(value);
      else if (key == "warmup_steps") c.warmup_steps = std::stoll(value);
      else if (key == "reconstruction_weight") c.reconstruction_weight = std::stod(value);
      else if (key == "commitment_weight") c.commitment_weight = std::stod(value);
      else if (key == "entropy_weight") c.entropy_weight = std::stod(value);
      else if (key == "entropy_anneal_factor") c.entropy_anneal_factor = std::stod(value);
      else if (key == "entropy_anneal_steps") c.entropy_anneal_steps = std::stoll(value);
      else if (key == "adam_beta1") c.adam_beta1 = std::stod(value);
      else if (key == "adam_beta2") c.adam_beta2 = std::stod(value);
      else if (key == "adam_eps") c.adam_eps = std::stod(value);
      else if (key == "ema_decay") c.ema_decay = std::stod(value);
      else if (key == "grad_clip_norm") c.grad_clip_norm = std::stod(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "clip_frames") c.clip_frames = std::stoll(value);
      else if (key == "clip_height") c.clip_height = std::stoll(value);
      else if (key == "clip_width") c.clip_width = std::stoll(value);
      else if (key == "heldout_clips") c.heldout_clips = std::stoll(value);
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::logic_error&) {
      throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  std::map<std::string, std::string> kv = model.to_kv();
  kv["steps"] = std::to_string(steps);
  kv["batch_size"] = std::to_string(batch_size);
  kv["peak_lr"] = fmt_double(peak_lr);
  kv["warmup_steps"] = std::to_string(warmup_steps);
  kv["reconstruction_weight"] = fmt_double(reconstruction_weight);
  kv["commitment_weight"] = fmt_double(commitment_weight);
  kv["entropy_weight"] = fmt_double(entropy_weight);
  kv["entropy_anneal_factor"] = fmt_double(entropy_anneal_factor);
  kv["entropy_anneal_steps"] = std::to_string(entropy_anneal_steps);
  kv["adam_beta1"] = fmt_double(adam_beta1);
  kv["adam_beta2"] = fmt_double(adam_beta2);
  kv["adam_eps"] = fmt_double(adam_eps);
  kv["ema_decay"] = fmt_double(ema_decay);
  kv["grad_clip_norm"] = fmt_double(grad_clip_norm);
  kv["seed"] = std::to_string(seed);
  kv["clip_frames"] = std::to_string(clip_frames);
  kv["clip_height"] = std::to_string(clip_height);
  kv["clip_width"] = std::to_string(clip_width);
  kv["heldout_clips"] = std::to_string(heldout_clips);
  return kv;
}

// ---- losses ----

LossGraph total_loss(Tape& tape, const tok::TokenizerConfig& mc, const tok::BoundParams& params,
                     const Tensor& batch, std::int64_t step, const TrainConfig& config,
                     bool bypass_quantizer) {
  Var x = tape.constant(batch);
  auto fwd = tok::autoencode(mc, params, x, bypass_quantizer);

  LossGraph g;
  g.latents = fwd.latents;
  Var rec = reduce_mean(square(sub(fwd.reconstruction, x)));
  Var commit = lfq::commitment_loss(fwd.latents);
  Var ent = lfq::entropy_loss(fwd.latents, mc.lfq.entropy_temperature, mc.lfq.subgroup_size);

  g.parts.reconstruction = rec.value().item();
  g.parts.commitment = commit.value().item();
  g.parts.entropy = ent.value().item();
  g.parts.entropy_weight = lfq::entropy_weight(step, config.entropy_weight,
                                               config.entropy_anneal_steps,
                                               config.entropy_anneal_factor);
  check_finite(g.parts.reconstruction, "reconstruction");
  check_finite(g.parts.commitment, "commitment");
  check_finite(g.parts.entropy, "entropy");

  g.total = add(add(affine(rec, config.reconstruction_weight, 0.0),
                    affine(commit, config.commitment_weight, 0.0)),
                affine(ent, g.parts.entropy_weight, 0.0));
  g.parts.total = g.total.value().item();
  check_finite(g.parts.total, "total");
  return g;
}

// ---- optimizer pieces ----

double lr_schedule(std::int64_t step, double peak, std::int64_t warmup, std::int64_t total) {
  if (step <= 0) return 0.0;
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (step >= total) return 0.0;
  const double frac =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (grads.size() != params.size()) {
    throw ContractError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: moment count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.shape() != p.shape() || state.m[i].shape() != p.shape()) {
      throw ContractError("adam_step: gradient " + std::to_string(i) + " shape mismatch");
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::int64_t k = 0; k < p.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void ema_update(std::vector<Tensor>& shadow, const std::vector<const Tensor*>& params,
                double decay) {
  if (shadow.size() != params.size()) throw ContractError("ema_update: count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (shadow[i].shape() != params[i]->shape()) {
      throw DimensionError("ema_update: shape mismatch at parameter " + std::to_string(i));
    }
    for (std::int64_t k = 0; k < shadow[i].size(); ++k) {
      shadow[i][k] = decay * shadow[i][k] + (1.0 - decay) * (*params[i])[k];
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.data()) v *= scale;
  }
  return norm;
}

// ---- state ----

std::string StepRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["reconstruction"] = loss.reconstruction;
  j["commitment"] = loss.commitment;
  j["entropy"] = loss.entropy;
  j["entropy_weight"] = loss.entropy_weight;
  j["total"] = loss.total;
  j["lr"] = lr;
  j["grad_norm"] = grad_norm;
  j["distinct_tokens"] = distinct_tokens;
  return j.dump();
}

TrainState init_state(const TrainConfig& config) {
  config.validate();
  TrainState s{0, tok::TokenizerModel::initialize(config.model, config.seed), {}, {}, {}};
  for (const auto& p : s.model.params().items()) s.ema.push_back(p.value);
  return s;
}

StepRecord train_step(TrainState& state, const TrainConfig& config) {
  const SynthVideoSource source(config.seed, config.clip_frames, config.clip_height,
                                config.clip_width);
  const Tensor batch =
      source.batch(static_cast<std::uint64_t>(state.step * config.batch_size), config.batch_size);

  Tape tape;
  tok::BoundParams bound(tape, state.model.params(), true);
  LossGraph g = total_loss(tape, state.model.config(), bound, batch, state.step, config);
  Gradients grads = tape.backward(g.total);

  std::vector<Tensor> gvec;
  gvec.reserve(bound.vars().size());
  for (const auto& v : bound.vars()) gvec.push_back(grads.of(v));

  StepRecord rec;
  rec.step = state.step;
  rec.loss = g.parts;
  rec.grad_norm = clip_global_norm(gvec, config.grad_clip_norm);
  check_finite(rec.grad_norm, "gradient");
  rec.lr = lr_schedule(state.step, config.peak_lr, config.warmup_steps, config.steps);
  rec.distinct_tokens = distinct_codes(g.latents.value());

  std::vector<Tensor*> ptrs;
  std::vector<const Tensor*> cptrs;
  for (auto& p : state.model.params().items()) {
    ptrs.push_back(&p.value);
    cptrs.push_back(&p.value);
  }
  adam_step(ptrs, gvec, state.adam, rec.lr, config.adam_beta1, config.adam_beta2,
            config.adam_eps);
  for (const auto* p : cptrs)
    for (double v : p->data()) check_finite(v, "parameters");
  ema_update(state.ema, cptrs, config.ema_decay);

  state.history.push_back(rec);
  state.step += 1;
  return rec;
}

void train(TrainState& state, const TrainConfig& config,
           const std::function<void(const StepRecord&)>& on_step) {
  while (state.step < config.steps) {
    StepRecord r = train_step(state, config);
    if (on_step) on_step(r);
  }
}

tok::TokenizerModel ema_model(const TrainState& state) {
  tok::ParameterSet params;
  const auto& items = state.model.params().items();
  for (std::size_t i = 0; i < items.size(); ++i) params.add(items[i].name, state.ema[i]);
  return tok::TokenizerModel(state.model.config(), std::move(params));
}

io::Container state_to_container(const TrainState& state, const TrainConfig& config) {
  io::Container c;
  c.meta = config.to_kv();
  c.meta["state.step"] = std::to_string(state.step);
  c.meta["state.adam_t"] = std::to_string(state.adam.t);
  io::add_model(c, state.model);
  const auto& items = state.model.params().items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!state.adam.m.empty()) {
      c.tensors.emplace_back("adam_m/" + items[i].name, state.adam.m[i]);
      c.tensors.emplace_back("adam_v/" + items[i].name, state.adam.v[i]);
    }
    c.tensors.emplace_back("ema/" + items[i].name, state.ema[i]);
  }
  if (!state.history.empty()) {
    const auto n = static_cast<std::int64_t>(state.history.size());
    Tensor h(Shape{n, kHistoryColumns});
    for (std::int64_t r = 0; r < n; ++r) {
      const auto& s = state.history[static_cast<std::size_t>(r)];
      const double row[kHistoryColumns] = {static_cast<double>(s.step), s.loss.reconstruction,
                                           s.loss.commitment, s.loss.entropy,
                                           s.loss.entropy_weight, s.loss.total, s.lr, s.grad_norm,
                                           static_cast<double>(s.distinct_tokens)};
      for (int k = 0; k < kHistoryColumns; ++k) h[r * kHistoryColumns + k] = row[k];
    }
    c.tensors.emplace_back("history", std::move(h));
  }
  return c;
}

TrainState state_from_container(const io::Container& c) {
  auto get = [&](const char* key) {
    auto it = c.meta.find(key);
    if (it == c.meta.end()) throw FormatError(std::string("train state: missing field ") + key);
    return std::stoll(it->second);
  };
  TrainState s{get("state.step"), io::model_from_container(c, "param/"), {}, {}, {}};
  s.adam.t = get("state.adam_t");
  for (const auto& p : s.model.params().items()) {
    const Tensor* e = c.find("ema/" + p.name);
    if (!e) throw FormatError("train state: missing ema/" + p.name);
    s.ema.push_back(*e);
    const Tensor* m = c.find("adam_m/" + p.name);
    const Tensor* v = c.find("adam_v/" + p.name);
    if (s.adam.t > 0) {
      if (!m || !v) throw FormatError("train state: missing Adam moments for " + p.name);
      if (m->shape() != p.value.shape() || v->shape() != p.value.shape()) {
        throw FormatError("train state: Adam moment shape mismatch for " + p.name);
      }
      s.adam.m.push_back(*m);
      s.adam.v.push_back(*v);
    }
  }
  if (const Tensor* h = c.find("history")) {
    if (h->rank() != 2 || h->dim(1) != kHistoryColumns) throw FormatError("train state: history");
    for (std::int64_t r = 0; r < h->dim(0); ++r) {
      const double* row = h->data().data() + r * kHistoryColumns;
      StepRecord rec;
      rec.step = static_cast<std::int64_t>(row[0]);
      rec.loss = {row[1], row[2], row[3], row[4], row[5]};
      rec.lr = row[6];
      rec.grad_norm = row[7];
      rec.distinct_tokens = static_cast<std::int64_t>(row[8]);
      s.history.push_back(rec);
    }
  }
  return s;
}

void save_state(const std::filesystem::path& path, const TrainState& state,
                const TrainConfig& config) {
  io::save_container(path, state_to_container(state, config));
}

TrainState load_state(const std::filesystem::path& path) {
  return state_from_container(io::load_container(path));
}

EvalResult evaluate_heldout(const tok::TokenizerModel& model, const TrainConfig& config) {
  const SynthVideoSource source(heldout_seed(config.seed), config.clip_frames, config.clip_height,
                                config.clip_width);
  const Tensor batch = source.batch(0, config.heldout_clips);
  Tape tape;
  tok::BoundParams bound(tape, model.params(), false);
  Var x = tape.constant(batch);
  auto fwd = tok::autoencode(model.config(), bound, x);
  EvalResult r;
  r.reconstruction_mse = reduce_mean(square(sub(fwd.reconstruction, x))).value().item();
  r.distinct_tokens = distinct_codes(fwd.latents.value());
  r.total_tokens = fwd.latents.value().size() / fwd.latents.value().dim(-1);
  return r;
}

}  // namespace lfqv::train
