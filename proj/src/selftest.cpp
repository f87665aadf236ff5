#include "lfqv/selftest.hpp"

#include <cmath>
#include <exception>
#include <functional>
#include <sstream>

#include "lfqv/causal_ops.hpp"
#include "lfqv/codec.hpp"
#include "lfqv/gradcheck.hpp"
#include "lfqv/lfq.hpp"
#include "lfqv/rng.hpp"
#include "lfqv/tokenizer.hpp"

namespace lfqv {

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

SelftestCheck bijection() {
  constexpr int kDim = 10;
  std::int64_t bad = 0;
  for (std::uint64_t i = 0; i < (1u << kDim); ++i) {
    if (lfq::token_index(lfq::index_to_codes(i, kDim)) != i) ++bad;
  }
  return {"bijection D=10", bad == 0, std::to_string(bad) + " mismatches"};
}

SelftestCheck causality() {
  const auto cfg = tok::TokenizerConfig::tiny();
  const auto model = tok::TokenizerModel::initialize(cfg, 7);
  Rng rng(11);
  const Tensor video = random_tensor({5, 8, 8, 3}, rng);
  Tensor perturbed = video;
  const std::int64_t frame = 8 * 8 * 3;
  for (std::int64_t i = frame; i < perturbed.size(); ++i) perturbed[i] = rng.uniform(-1.0, 1.0);

  const auto a = tok::encode(model, video);
  const auto b = tok::encode(model, perturbed);
  const std::int64_t per_frame = a.tokens.h * a.tokens.w;
  std::int64_t bad = 0;
  for (std::int64_t i = 0; i < per_frame; ++i) {
    if (a.tokens.indices[static_cast<std::size_t>(i)] != b.tokens.indices[static_cast<std::size_t>(i)]) ++bad;
  }
  const std::int64_t latent_frame = per_frame * cfg.latent_dim();
  for (std::int64_t i = 0; i < latent_frame; ++i) {
    if (a.latents[i] != b.latents[i]) ++bad;
  }
  return {"causality first frame", bad == 0, std::to_string(bad) + " first-frame changes"};
}

SelftestCheck gradient_spot_checks() {
  GradCheckOptions opts;
  opts.probes = 20;
  Rng rng(3);
  std::ostringstream detail;
  bool ok = true;

  auto run = [&](const char* name, const LossBuilder& f, const std::vector<Tensor>& in) {
    const auto r = grad_check(f, in, opts);
    detail << name << " max_rel=" << r.max_rel_error << ' ';
    ok = ok && r.ok();
  };
  run("conv3d",
      [](Tape&, std::span<const Var> v) {
        return reduce_sum(tanh(causal::causal_conv3d(v[0], v[1])));
      },
      {random_tensor({3, 4, 4, 2}, rng), random_tensor({3, 3, 3, 2, 2}, rng)});
  run("entropy",
      [](Tape&, std::span<const Var> v) { return lfq::entropy_loss(v[0], 1.0, 2); },
      {random_tensor({6, 4}, rng)});
  run("group_norm",
      [](Tape&, std::span<const Var> v) {
        return reduce_sum(mul(causal::group_norm(v[0], 2), v[1]));
      },
      {random_tensor({2, 3, 3, 4}, rng), random_tensor({2, 3, 3, 4}, rng)});
  return {"gradient spot checks", ok, detail.str()};
}

SelftestCheck bitstream() {
  Rng rng(5);
  std::int64_t bad = 0;
  for (int d = 1; d <= 18; ++d) {
    lfq::TokenGrid g{2, 3, 5, d, {}};
    for (std::int64_t i = 0; i < g.count(); ++i) {
      g.indices.push_back(static_cast<std::uint32_t>(rng.below(g.codebook_size())));
    }
    if (codec::unpack(codec::pack(g, 5, 12, 20)) != g) ++bad;
  }
  return {"bitstream round trip", bad == 0, std::to_string(bad) + " mismatches"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest() {
  std::vector<std::function<SelftestCheck()>> checks{bijection, causality, gradient_spot_checks,
                                                     bitstream};
  std::vector<SelftestCheck> out;
  for (const auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"exception", false, e.what()});
    }
  }
  return out;
}

}  // namespace lfqv
