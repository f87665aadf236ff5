// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Usage: acceptance [work_dir [criterion...]]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "lfqv/causal_ops.hpp"
#include "lfqv/checkpoint.hpp"
#include "lfqv/codec.hpp"
#include "lfqv/gradcheck.hpp"
#include "lfqv/lfq.hpp"
#include "lfqv/tokenizer.hpp"
#include "lfqv/training.hpp"
#include "lfqv/video_io.hpp"
#include "unit/test_util.hpp"

namespace fs = std::filesystem;
using namespace lfqv;
using lfqv::testing::random_tensor;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

tok::TokenizerModel randomized(const tok::TokenizerConfig& c, std::uint64_t seed, double scale) {
  auto m = tok::TokenizerModel::initialize(c, seed);
  Rng rng(seed + 100);
  for (auto& p : m.params().items())
    for (double& v : p.value.data()) v += rng.uniform(-scale, scale);
  return m;
}

// ---- 1: token index ----

// argmin over the whole codebook of the squared distance, first index on ties.
std::uint64_t codebook_argmin(std::span<const double> z) {
  const int d = static_cast<int>(z.size());
  std::uint64_t best = 0;
  double best_dist = INFINITY;
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << d); ++k) {
    double dist = 0.0;
    for (int i = 0; i < d; ++i) {
      const double c = (k >> i) & 1 ? 1.0 : -1.0;
      dist += (z[static_cast<std::size_t>(i)] - c) * (z[static_cast<std::size_t>(i)] - c);
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

Outcome criterion_token_index() {
  const auto start = Clock::now();
  Rng rng(1);
  std::vector<double> z(10);
  std::int64_t mismatches = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    for (double& v : z) v = rng.uniform(-2.0, 2.0);
    if (trial % 5 == 0) z[static_cast<std::size_t>(trial % 10)] = 0.0;
    mismatches += lfq::token_index(z) != codebook_argmin(z);
  }
  std::int64_t bijection_errors = 0;
  for (int d = 1; d <= 12; ++d) {
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << d); ++i) {
      const auto codes = lfq::index_to_codes(i, d);
      bijection_errors += lfq::token_index(codes) != i;
      bijection_errors += lfq::index_to_codes(lfq::token_index(codes), d) != codes;
    }
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && bijection_errors == 0 && t < 10.0,
          "argmin mismatches " + std::to_string(mismatches) + "/10000, bijection errors " +
              std::to_string(bijection_errors) + " for D<=12, " + fmt("%.2f s", t)};
}

// ---- 2: entropy ----

double brute_force_batch_entropy(const Tensor& p) {
  const std::int64_t n = p.dim(0), d = p.dim(1);
  double h = 0.0;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << d); ++code) {
    double mean = 0.0;
    for (std::int64_t s = 0; s < n; ++s) {
      double prob = 1.0;
      for (std::int64_t i = 0; i < d; ++i) {
        const double pi = p[s * d + i];
        prob *= (code >> i) & 1 ? pi : 1.0 - pi;
      }
      mean += prob / static_cast<double>(n);
    }
    if (mean > 0.0) h -= mean * std::log(mean);
  }
  return h;
}

double brute_force_per_sample(const Tensor& p) {
  double h = 0.0;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    if (v > 0.0) h -= v * std::log(v);
    if (v < 1.0) h -= (1.0 - v) * std::log(1.0 - v);
  }
  return h / static_cast<double>(p.dim(0));
}

Outcome criterion_entropy() {
  const auto start = Clock::now();
  Rng rng(2);
  double worst = 0.0;
  for (int d = 1; d <= 8; ++d) {
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor p = random_tensor({16, d}, rng, 0.0, 1.0);
      const auto e = lfq::entropy_terms(p, d);
      const double want = brute_force_per_sample(p) - brute_force_batch_entropy(p);
      worst = std::max(worst, std::abs(e.loss() - want));
    }
  }
  double uniform_err = 0.0, diverse_err = 0.0;
  for (int d = 1; d <= 8; ++d) {
    Tape tape;
    const Var z = tape.constant(Tensor({32, d}, 0.0));
    uniform_err = std::max(uniform_err, std::abs(lfq::entropy_loss(z, 1.0, d).value().item()));
    const auto k = std::int64_t{1} << d;
    Tensor hard({k, d});
    for (std::int64_t s = 0; s < k; ++s)
      for (std::int64_t i = 0; i < d; ++i) hard[s * d + i] = (s >> i) & 1 ? 1.0 : 0.0;
    diverse_err = std::max(diverse_err,
                           std::abs(lfq::entropy_terms(hard, d).loss() + d * std::numbers::ln2));
  }
  const double t = seconds_since(start);
  return {worst <= 1e-10 && uniform_err <= 1e-12 && diverse_err <= 1e-12 && t < 5.0,
          "brute force max err " + fmt("%.2e", worst) + ", uniform loss err " +
              fmt("%.2e", uniform_err) + ", hard-diverse err " + fmt("%.2e", diverse_err) + ", " +
              fmt("%.2f s", t)};
}

// ---- 3: gradients ----

Outcome criterion_gradients() {
  const auto start = Clock::now();
  Rng rng(3);
  struct Case {
    std::string name;
    LossBuilder loss;
    std::vector<Tensor> inputs;
    double tolerance = 1e-4;
  };
  auto weighted = [](const Var& x, const Var& w) { return reduce_sum(mul(x, w)); };
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  const Tensor w = random_tensor({3, 4}, rng);
  std::vector<Case> cases;
  cases.push_back({"add", [=](Tape&, std::span<const Var> v) { return weighted(add(v[0], v[1]), v[2]); },
                   {a, b, w}});
  cases.push_back({"sub", [=](Tape&, std::span<const Var> v) { return weighted(sub(v[0], v[1]), v[2]); },
                   {a, b, w}});
  cases.push_back({"mul", [=](Tape&, std::span<const Var> v) { return weighted(mul(v[0], v[1]), v[2]); },
                   {a, b, w}});
  cases.push_back({"affine",
                   [=](Tape&, std::span<const Var> v) { return weighted(affine(v[0], -1.3, 0.2), v[1]); },
                   {a, w}});
  cases.push_back({"leaky_relu",
                   [=](Tape&, std::span<const Var> v) { return weighted(leaky_relu(v[0]), v[1]); },
                   {random_tensor({3, 4}, rng, 0.1, 1.0), w}});
  cases.push_back({"tanh", [=](Tape&, std::span<const Var> v) { return weighted(tanh(v[0]), v[1]); },
                   {a, w}});
  cases.push_back({"sigmoid",
                   [=](Tape&, std::span<const Var> v) { return weighted(sigmoid(v[0]), v[1]); },
                   {a, w}});
  cases.push_back({"square",
                   [=](Tape&, std::span<const Var> v) { return weighted(square(v[0]), v[1]); },
                   {a, w}});
  cases.push_back({"reduce_mean",
                   [](Tape&, std::span<const Var> v) { return square(reduce_mean(v[0])); }, {a}});
  cases.push_back({"pad_slice_reshape",
                   [](Tape&, std::span<const Var> v) {
                     const Var p = pad_explicit(tanh(v[0]), {{1, 2}, {0, 1}});
                     return reduce_sum(square(reshape(slice(p, {0, 0}, {4, 4}), {16})));
                   },
                   {a}});
  cases.push_back({"bias_add",
                   [=](Tape&, std::span<const Var> v) {
                     return weighted(tanh(bias_add(v[0], v[1])), v[2]);
                   },
                   {a, random_tensor({4}, rng), w}});
  cases.push_back({"conv3d",
                   [](Tape&, std::span<const Var> v) {
                     return reduce_sum(tanh(conv3d(v[0], v[1], {1, 2, 1}, {{{2, 0}, {1, 1}, {0, 1}}})));
                   },
                   {random_tensor({2, 4, 5, 5, 3}, rng), random_tensor({3, 3, 3, 3, 2}, rng)}});
  const Tensor x = random_tensor({5, 4, 4, 4}, rng);
  cases.push_back({"causal_conv3d",
                   [](Tape&, std::span<const Var> v) {
                     return reduce_sum(tanh(causal::causal_conv3d(v[0], v[1])));
                   },
                   {x, random_tensor({3, 3, 3, 4, 2}, rng)}});
  cases.push_back({"temporal_downsample",
                   [](Tape&, std::span<const Var> v) {
                     return reduce_sum(tanh(causal::temporal_downsample(v[0], v[1], 2, 2)));
                   },
                   {x, random_tensor({3, 3, 3, 4, 2}, rng)}});
  cases.push_back({"temporal_upsample",
                   [](Tape&, std::span<const Var> v) {
                     return reduce_sum(mul(causal::temporal_upsample(v[0], 2), v[1]));
                   },
                   {random_tensor({3, 2, 2, 2}, rng), random_tensor({5, 2, 2, 2}, rng)}});
  cases.push_back({"depth_to_space",
                   [](Tape&, std::span<const Var> v) {
                     return reduce_sum(mul(causal::depth_to_space(v[0], 2), v[1]));
                   },
                   {random_tensor({2, 2, 2, 8}, rng), random_tensor({2, 4, 4, 2}, rng)}});
  cases.push_back({"group_norm",
                   [](Tape&, std::span<const Var> v) {
                     return reduce_sum(mul(causal::group_norm(v[0], 2), v[1]));
                   },
                   {x, random_tensor({5, 4, 4, 4}, rng)}});
  cases.push_back({"adaptive_group_norm",
                   [](Tape&, std::span<const Var> v) {
                     const causal::AdaptiveNormParams p{v[2], v[3], v[4], v[5]};
                     return reduce_sum(mul(causal::adaptive_group_norm(v[0], v[1], 2, p), v[6]));
                   },
                   {random_tensor({5, 4, 4, 4}, rng), random_tensor({3, 2, 2, 3}, rng),
                    random_tensor({3, 4}, rng), random_tensor({4}, rng), random_tensor({3, 4}, rng),
                    random_tensor({4}, rng), random_tensor({5, 4, 4, 4}, rng)}});
  cases.push_back({"soft_code_probabilities",
                   [=](Tape&, std::span<const Var> v) {
                     return weighted(lfq::soft_code_probabilities(v[0], 0.7), v[1]);
                   },
                   {a, w}});
  for (int g : {1, 2, 3, 6}) {
    cases.push_back({"entropy_loss_g" + std::to_string(g),
                     [g](Tape&, std::span<const Var> v) { return lfq::entropy_loss(v[0], 1.0, g); },
                     {random_tensor({10, 6}, rng)}});
  }
  cases.push_back({"commitment_loss",
                   [](Tape&, std::span<const Var> v) { return lfq::commitment_loss(v[0]); },
                   {random_tensor({6, 5}, rng, 0.1, 1.0)}});

  train::TrainConfig cfg;
  cfg.model = tok::TokenizerConfig::tiny();
  cfg.clip_frames = 3;
  cfg.clip_height = 8;
  cfg.clip_width = 8;
  const auto tiny = randomized(cfg.model, 4, 0.1);
  const Tensor batch = train::SynthVideoSource(5, 3, 8, 8).batch(0, 2);
  std::vector<Tensor> params;
  for (const auto& p : tiny.params().items()) params.push_back(p.value);
  cases.push_back({"total_loss",
                   [&](Tape& tape, std::span<const Var> v) {
                     const tok::BoundParams bound(tiny.params(), v);
                     return train::total_loss(tape, cfg.model, bound, batch, 3, cfg, true).total;
                   },
                   params});
  std::vector<Tensor> model_inputs{random_tensor({3, 8, 8, 3}, rng)};
  for (const auto& p : params) model_inputs.push_back(p);
  cases.push_back({"tiny_model",
                   [&](Tape&, std::span<const Var> v) {
                     const tok::BoundParams bound(tiny.params(), v.subspan(1));
                     const auto r = tok::autoencode(cfg.model, bound, v[0], true);
                     return reduce_mean(square(sub(r.reconstruction, v[0])));
                   },
                   model_inputs, 1e-3});

  bool ok = true;
  double worst = 0.0;
  int redrawn = 0;
  std::string failed;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    GradCheckOptions opts;
    opts.tolerance = cases[i].tolerance;
    opts.seed = i;
    const auto r = grad_check(cases[i].loss, cases[i].inputs, opts);
    worst = std::max(worst, r.max_rel_error / cases[i].tolerance);
    redrawn += r.redrawn;
    if (!r.ok() || r.probes != 100) {
      ok = false;
      failed += " " + cases[i].name + fmt("(%.2e)", r.max_rel_error);
    }
  }
  const double t = seconds_since(start);
  return {ok && t < 60.0,
          std::to_string(cases.size()) + " ops x 100 probes, worst error/tolerance " +
              fmt("%.3f", worst) + ", " + std::to_string(redrawn) +
              " kink-crossing stencils redrawn, " + fmt("%.1f s", t) +
              (failed.empty() ? "" : ", failed:" + failed)};
}

// ---- 4: causality ----

Outcome criterion_causality() {
  const auto model = randomized(tok::TokenizerConfig::toy(), 5, 0.05);
  Rng rng(6);
  const Tensor video = random_tensor({17, 32, 32, 3}, rng);
  const auto base = tok::encode(model, video);
  const std::int64_t frame = 32 * 32 * 3;
  const std::int64_t per_token_frame = base.tokens.h * base.tokens.w;
  const std::int64_t s = model.config().temporal_factor();
  std::int64_t violations = 0, later_changes = 0;
  for (std::int64_t t : {1, 2, 3}) {
    // Perturb input frames after t and, separately, every input frame after
    // the receptive field of token frame t.
    for (std::int64_t last_kept : {t, s * t}) {
      Tensor perturbed = video;
      for (std::int64_t i = (last_kept + 1) * frame; i < perturbed.size(); ++i) {
        perturbed[i] = rng.uniform(-1.0, 1.0);
      }
      const auto enc = tok::encode(model, perturbed);
      for (std::int64_t j = 0; j < enc.tokens.t; ++j) {
        for (std::int64_t p = 0; p < per_token_frame; ++p) {
          const auto k = static_cast<std::size_t>(j * per_token_frame + p);
          const bool changed = enc.tokens.indices[k] != base.tokens.indices[k];
          if (s * j <= last_kept) violations += changed;
          else later_changes += changed;
        }
      }
    }
  }
  Tensor image({1, 32, 32, 3});
  for (std::int64_t i = 0; i < frame; ++i) image[i] = video[i];
  const auto im = tok::encode(model, image);
  std::int64_t image_mismatch = 0;
  for (std::int64_t p = 0; p < per_token_frame; ++p) {
    image_mismatch += im.tokens.indices[static_cast<std::size_t>(p)] !=
                      base.tokens.indices[static_cast<std::size_t>(p)];
  }
  return {violations == 0 && image_mismatch == 0,
          "17x32x32 toy: violations " + std::to_string(violations) +
              ", later-token changes " + std::to_string(later_changes) +
              ", image/first-frame token mismatches " + std::to_string(image_mismatch)};
}

// ---- 5: temporal shape law ----

Outcome criterion_shape_law() {
  bool ok = true;
  std::string detail;
  for (const auto& [t, s] : std::vector<std::pair<std::int64_t, std::int64_t>>{
           {1, 4}, {5, 4}, {17, 4}, {9, 2}}) {
    auto cfg = tok::TokenizerConfig::toy();
    if (s == 2) cfg.temporal_strides = {1, 1, 2};
    const auto model = tok::TokenizerModel::initialize(cfg, 7);
    Rng rng(static_cast<std::uint64_t>(t));
    const auto enc = tok::encode(model, random_tensor({t, 16, 16, 3}, rng));
    const Tensor dec = tok::decode(model, enc.tokens);
    const std::int64_t want = 1 + (t - 1) / s;
    ok = ok && cfg.temporal_factor() == s && enc.tokens.t == want && dec.dim(0) == t &&
         dec.shape() == Shape({t, 16, 16, 3});
    if (t == 17 && s == 4) ok = ok && enc.tokens.t == 5;
    detail += (detail.empty() ? "" : ", ") + std::to_string(t) + "->" +
              std::to_string(enc.tokens.t) + "->" + std::to_string(dec.dim(0)) + " (s=" +
              std::to_string(s) + ")";
  }
  return {ok, detail};
}

// ---- 6: training ----

Outcome criterion_training() {
  train::TrainConfig base;
  base.seed = 2024;
  double worst_time = 0.0;
  struct Run {
    double initial_mse, final_mse;
    std::int64_t distinct;
  };
  auto run = [&](double entropy_weight) {
    auto cfg = base;
    cfg.entropy_weight = entropy_weight;
    const auto start = Clock::now();
    auto state = train::init_state(cfg);
    const auto before = train::evaluate_heldout(state.model, cfg);
    train::train(state, cfg);
    const auto after = train::evaluate_heldout(state.model, cfg);
    worst_time = std::max(worst_time, seconds_since(start));
    return Run{before.reconstruction_mse, after.reconstruction_mse, after.distinct_tokens};
  };
  const Run with = run(0.1);
  const Run without = run(0.0);
  const bool ok = with.final_mse < 0.5 * with.initial_mse && with.distinct > without.distinct &&
                  worst_time < 15 * 60.0;
  return {ok, "500 steps x batch 8: heldout mse " + fmt("%.5f", with.initial_mse) + " -> " +
                  fmt("%.5f", with.final_mse) + fmt(" (%.1f%%)", 100 * with.final_mse / with.initial_mse) +
                  ", distinct tokens " + std::to_string(with.distinct) + " (w=0.1) vs " +
                  std::to_string(without.distinct) + " (w=0), slowest run " +
                  fmt("%.0f s", worst_time)};
}

// ---- 7: inflation ----

Outcome criterion_inflation() {
  auto c = tok::TokenizerConfig::toy();
  c.temporal_kernel = 1;
  const auto image_model = randomized(c, 8, 0.05);
  const auto video_model = tok::inflate_2d_to_3d(image_model, 3);
  Rng rng(9);
  double worst = 0.0;
  std::int64_t token_mismatch = 0;
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor image = random_tensor({1, 32, 32, 3}, rng);
    const auto a = tok::encode(image_model, image), b = tok::encode(video_model, image);
    worst = std::max(worst, max_abs_diff(a.latents, b.latents));
    token_mismatch += !(a.tokens == b.tokens);
    auto recon = [&](const tok::TokenizerModel& m) {
      Tape tape;
      tok::BoundParams p(tape, m.params(), false);
      return tok::autoencode(m.config(), p, tape.constant(image)).reconstruction.value();
    };
    worst = std::max(worst, max_abs_diff(recon(image_model), recon(video_model)));
    worst = std::max(worst, max_abs_diff(tok::decode(image_model, a.tokens),
                                         tok::decode(video_model, a.tokens)));
  }
  return {worst <= 1e-12 && token_mismatch == 0,
          "max abs diff " + fmt("%.2e", worst) + ", token mismatches " +
              std::to_string(token_mismatch)};
}

// ---- 8: bitstream ----

Outcome criterion_bitstream() {
  Rng rng(10);
  std::int64_t failures = 0;
  for (int d = 1; d <= 18; ++d) {
    for (int trial = 0; trial < 25; ++trial) {
      lfq::TokenGrid g{static_cast<std::int64_t>(1 + rng.below(5)),
                       static_cast<std::int64_t>(1 + rng.below(9)),
                       static_cast<std::int64_t>(1 + rng.below(9)), d, {}};
      for (std::int64_t i = 0; i < g.count(); ++i) {
        g.indices.push_back(static_cast<std::uint32_t>(rng.below(g.codebook_size())));
      }
      const auto bytes = codec::pack(g, 4 * (g.t - 1) + 1, 8 * g.h, 8 * g.w);
      failures += !(codec::unpack(bytes) == g);
    }
  }
  codec::BitstreamHeader h{18, 5, 16, 16, 17, 128, 128};
  const double bpp = codec::bits_per_pixel(h);
  return {failures == 0 && std::abs(bpp - 0.08272) <= 1e-5,
          "round-trip failures " + std::to_string(failures) + " over D=1..18, bpp " +
              fmt("%.7f", bpp)};
}

// ---- 9: reproducible pipeline ----

int run_command(const std::string& cmd) { return std::system(cmd.c_str()); }

Outcome criterion_pipeline(const fs::path& work) {
  auto cfg = train::TrainConfig{};
  cfg.steps = 20;
  cfg.warmup_steps = 5;
  cfg.seed = 99;
  cfg.heldout_clips = 4;
  fs::create_directories(work);
  {
    std::ofstream os(work / "train.cfg");
    for (const auto& [k, v] : cfg.to_kv()) os << k << " = " << v << '\n';
  }
  video::write_raw(work / "input.raw", train::SynthVideoSource(123, 17, 32, 32).clip(0));

  const std::string cli = LFQV_CLI_PATH;
  const std::vector<std::string> artifacts{"model.ckpt", "model.ckpt.metrics.jsonl",
                                           "train.out", "tokens.lfqt", "tokenize.out",
                                           "recon.raw"};
  for (const char* name : {"run_a", "run_b"}) {
    const fs::path dir = work / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = "\"" + dir.string() + "\"";
    const std::string in = "\"" + (work / "input.raw").string() + "\"";
    const std::string steps[] = {
        "\"" + cli + "\" train --config \"" + (work / "train.cfg").string() + "\" --out " + d +
            "/model.ckpt > " + d + "/train.out",
        "\"" + cli + "\" tokenize --ckpt " + d + "/model.ckpt --in " + in + " --out " + d +
            "/tokens.lfqt > " + d + "/tokenize.out",
        "\"" + cli + "\" detokenize --ckpt " + d + "/model.ckpt --in " + d + "/tokens.lfqt --out " +
            d + "/recon.raw",
    };
    for (const auto& s : steps) {
      if (run_command(s) != 0) return {false, "command failed: " + s};
    }
  }
  std::int64_t differing = 0;
  std::string names;
  for (const auto& a : artifacts) {
    const auto x = codec::read_bytes(work / "run_a" / a);
    const auto y = codec::read_bytes(work / "run_b" / a);
    if (x != y || x.empty()) {
      ++differing;
      names += " " + a;
    }
  }
  return {differing == 0, std::to_string(artifacts.size() - differing) + "/" +
                              std::to_string(artifacts.size()) + " artifacts byte-identical" +
                              (names.empty() ? "" : ", differing:" + names)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "lfqv_acceptance";
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"token index", criterion_token_index},
      {"entropy", criterion_entropy},
      {"gradients", criterion_gradients},
      {"causality", criterion_causality},
      {"temporal shape law", criterion_shape_law},
      {"training", criterion_training},
      {"inflation", criterion_inflation},
      {"bitstream", criterion_bitstream},
      {"reproducible pipeline", [&] { return criterion_pipeline(work); }},
  };
  std::vector<bool> selected(criteria.size(), argc <= 2);
  for (int a = 2; a < argc; ++a) {
    const auto n = static_cast<std::size_t>(std::atoi(argv[a]));
    if (n >= 1 && n <= criteria.size()) selected[n - 1] = true;
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("%s %zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
