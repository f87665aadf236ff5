// lfqv: train, tokenize, detokenize, metrics, inspect, selftest, synth.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "lfqv/checkpoint.hpp"
#include "lfqv/codec.hpp"
#include "lfqv/errors.hpp"
#include "lfqv/selftest.hpp"
#include "lfqv/tokenizer.hpp"
#include "lfqv/training.hpp"
#include "lfqv/video_io.hpp"

namespace {

using namespace lfqv;

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("LFQV_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(lvl));
  }
}

int cmd_train(const std::string& config_path, const std::string& out, std::string log_path) {
  const auto cfg = train::TrainConfig::from_kv(io::load_kv(config_path));
  if (log_path.empty()) log_path = out + ".metrics.jsonl";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw FormatError("cannot open metrics log '" + log_path + "'");

  auto state = train::init_state(cfg);
  spdlog::info("training {} steps, {} parameters", cfg.steps,
               state.model.params().total_elements());
  train::train(state, cfg, [&](const train::StepRecord& r) {
    log << r.to_json() << '\n';
    if (r.step % 25 == 0 || r.step + 1 == cfg.steps) {
      spdlog::info("step {} total {:.5f} rec {:.5f} tokens {}", r.step, r.loss.total,
                   r.loss.reconstruction, r.distinct_tokens);
    }
  });
  train::save_state(out, state, cfg);
  const auto eval = train::evaluate_heldout(state.model, cfg);
  std::printf("steps=%lld\nheldout_mse=%.9g\nheldout_distinct_tokens=%lld\n",
              static_cast<long long>(state.step), eval.reconstruction_mse,
              static_cast<long long>(eval.distinct_tokens));
  return 0;
}

int cmd_tokenize(const std::string& ckpt, const std::string& in, const std::string& out, bool ema) {
  const auto model = io::load_model(ckpt, ema);
  const Tensor video = video::read_video(in);
  const auto enc = tok::encode(model, video);
  const auto bytes = codec::pack(enc.tokens, video.dim(0), video.dim(1), video.dim(2));
  codec::write_bytes(out, bytes);
  const auto hdr = codec::parse(bytes).header;
  std::printf("tokens=%lldx%lldx%lld\nD=%d\nbpp=%.6f\n", static_cast<long long>(hdr.t),
              static_cast<long long>(hdr.h), static_cast<long long>(hdr.w), hdr.dim,
              codec::bits_per_pixel(hdr));
  return 0;
}

int cmd_detokenize(const std::string& ckpt, const std::string& in, const std::string& out,
                   bool ema) {
  const auto model = io::load_model(ckpt, ema);
  const auto stream = codec::parse(codec::read_bytes(in));
  const auto& h = stream.header;
  if (h.dim != model.config().latent_dim()) {
    throw FormatError("bitstream field D: " + std::to_string(h.dim) + " does not match model D " +
                      std::to_string(model.config().latent_dim()));
  }
  const auto lat = tok::latent_dims(model.config(), h.orig_t, h.orig_h, h.orig_w);
  if (lat.t != h.t || lat.h != h.h || lat.w != h.w) {
    throw FormatError("bitstream token grid does not match the original dimensions for this model");
  }
  const auto grid = codec::unpack_payload(stream.payload, h.dim, h.t, h.h, h.w);
  video::write_video(out, tok::decode(model, grid));
  return 0;
}

int cmd_metrics(const std::string& ref, const std::string& test) {
  const Tensor a = video::read_video(ref);
  const Tensor b = video::read_video(test);
  std::printf("mse=%.9g\npsnr=%s\n", codec::mse(a, b), codec::format_psnr(codec::psnr(a, b)).c_str());
  return 0;
}

int cmd_inspect(const std::string& in) {
  const auto bytes = codec::read_bytes(in);
  const auto s = codec::parse(bytes);
  const auto& h = s.header;
  const auto grid = codec::unpack_payload(s.payload, h.dim, h.t, h.h, h.w);
  const auto hist = codec::histogram(grid);
  std::printf("magic=LFQT\nversion=%d\nD=%d\nT'=%lld\nH'=%lld\nW'=%lld\nT=%lld\nH=%lld\nW=%lld\n",
              codec::kBitstreamVersion, h.dim, static_cast<long long>(h.t),
              static_cast<long long>(h.h), static_cast<long long>(h.w),
              static_cast<long long>(h.orig_t), static_cast<long long>(h.orig_h),
              static_cast<long long>(h.orig_w));
  std::printf("payload_bytes=%zu\nbpp=%.6f\ntokens=%lld\ndistinct=%lld\n", s.payload.size(),
              codec::bits_per_pixel(h), static_cast<long long>(hist.total),
              static_cast<long long>(hist.distinct));
  for (std::size_t i = 0; i < hist.top.size(); ++i) {
    std::printf("top%zu=%u:%lld\n", i + 1, hist.top[i].first,
                static_cast<long long>(hist.top[i].second));
  }
  return 0;
}

int cmd_synth(const std::string& out, std::uint64_t seed, std::uint64_t index, std::int64_t t,
              std::int64_t h, std::int64_t w) {
  if (t < 1 || h < 1 || w < 1) throw ConfigError("synth: frames, height and width must be >= 1");
  video::write_video(out, train::SynthVideoSource(seed, t, h, w).clip(index));
  return 0;
}

int cmd_selftest() {
  bool ok = true;
  for (const auto& c : run_selftest()) {
    std::printf("%s %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"LFQ video tokenizer"};
  app.require_subcommand(1);

  std::string config, out, ckpt, in, ref, test, log_path;
  bool ema = false;

  auto* train = app.add_subcommand("train", "Train a tokenizer on synthetic clips");
  train->add_option("--config", config, "Key = value training config")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--log", log_path, "Metrics log (default <out>.metrics.jsonl)");

  auto* tokenize = app.add_subcommand("tokenize", "Encode a video into a token bitstream");
  tokenize->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  tokenize->add_option("--in", in)->required();
  tokenize->add_option("--out", out)->required();
  tokenize->add_flag("--ema", ema, "Use EMA weights");

  auto* detokenize = app.add_subcommand("detokenize", "Decode a token bitstream into a video");
  detokenize->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  detokenize->add_option("--in", in)->required()->check(CLI::ExistingFile);
  detokenize->add_option("--out", out)->required();
  detokenize->add_flag("--ema", ema, "Use EMA weights");

  auto* metrics = app.add_subcommand("metrics", "PSNR and MSE between two videos");
  metrics->add_option("--ref", ref)->required();
  metrics->add_option("--test", test)->required();

  auto* inspect = app.add_subcommand("inspect", "Print bitstream header and token histogram");
  inspect->add_option("--in", in)->required()->check(CLI::ExistingFile);

  auto* selftest = app.add_subcommand("selftest", "Run the invariant suite");

  std::uint64_t seed = 0, index = 0;
  std::int64_t frames = 17, height = 32, width = 32;
  auto* synth = app.add_subcommand("synth", "Write one synthetic training-style clip");
  synth->add_option("--out", out)->required();
  synth->add_option("--seed", seed);
  synth->add_option("--index", index, "Clip index within the seeded stream");
  synth->add_option("--frames", frames);
  synth->add_option("--height", height);
  synth->add_option("--width", width);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config, out, log_path);
    if (tokenize->parsed()) return cmd_tokenize(ckpt, in, out, ema);
    if (detokenize->parsed()) return cmd_detokenize(ckpt, in, out, ema);
    if (metrics->parsed()) return cmd_metrics(ref, test);
    if (inspect->parsed()) return cmd_inspect(in);
    if (selftest->parsed()) return cmd_selftest();
    if (synth->parsed()) return cmd_synth(out, seed, index, frames, height, width);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
