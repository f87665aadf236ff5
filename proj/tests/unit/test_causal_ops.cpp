#include <cmath>

#include "doctest.h"
#include "lfqv/causal_ops.hpp"
#include "lfqv/errors.hpp"
#include "lfqv/gradcheck.hpp"
#include "test_util.hpp"

using namespace lfqv;
using lfqv::testing::random_tensor;

namespace {

double l2(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::int64_t frame_size(const Tensor& x) { return x.size() / x.dim(0); }

// Element count of the leading `n` frames that differ between a and b.
std::int64_t changed_in_first(const Tensor& a, const Tensor& b, std::int64_t n) {
  std::int64_t bad = 0;
  for (std::int64_t i = 0; i < n * frame_size(a); ++i) bad += a[i] != b[i];
  return bad;
}

Tensor perturb_after(const Tensor& x, std::int64_t frame, Rng& rng) {
  Tensor y = x;
  for (std::int64_t i = (frame + 1) * frame_size(x); i < y.size(); ++i) y[i] = rng.uniform(-1, 1);
  return y;
}

struct Stack {
  Tensor k1, k2, kdown;
};

// conv -> group norm -> leaky relu -> strided causal conv (s = 2).
Tensor encode_stack(const Stack& s, const Tensor& x) {
  Tape tape;
  const Var h = causal::causal_conv3d(tape.constant(x), tape.constant(s.k1));
  const Var n = leaky_relu(causal::group_norm(h, 2));
  const Var c = causal::causal_conv3d(n, tape.constant(s.k2));
  return causal::temporal_downsample(c, tape.constant(s.kdown), 2).value();
}

causal::AdaptiveNormParams agn_params(Tape& tape, std::int64_t cz, std::int64_t c, Rng* rng) {
  auto make = [&](Shape shape) {
    return tape.leaf(rng ? random_tensor(std::move(shape), *rng) : Tensor(std::move(shape)));
  };
  return {make({cz, c}), make({c}), make({cz, c}), make({c})};
}

}  // namespace

TEST_CASE("causal padding pairs") {
  const auto p = causal::causal_padding({3, 3, 4, 1, 1});
  CHECK(p[0] == std::array<std::int64_t, 2>{2, 0});
  CHECK(p[1] == std::array<std::int64_t, 2>{1, 1});
  CHECK(p[2] == std::array<std::int64_t, 2>{1, 2});
  CHECK(causal::regular_padding({3, 3, 3, 1, 1})[0] == std::array<std::int64_t, 2>{1, 1});
  CHECK(causal::causal_padding({1, 3, 3, 1, 1}) == causal::regular_padding({1, 3, 3, 1, 1}));
  causal::CausalConv3dLayer layer{{3, 3, 3, 2, 2}};
  CHECK(layer.padding()[0][1] == 0);
}

TEST_CASE("causal conv equals regular conv with past-only taps") {
  Rng rng(1);
  const Tensor x = random_tensor({6, 5, 5, 2}, rng);
  const Tensor k = random_tensor({3, 3, 3, 2, 3}, rng);
  // A 5-tap centered kernel whose last two taps are zero sees t-2..t.
  Tensor wide({5, 3, 3, 2, 3});
  const std::int64_t slice = k.size() / 3;
  for (std::int64_t i = 0; i < k.size(); ++i) wide[i] = k[i];
  CHECK(wide[3 * slice] == 0.0);
  const Tensor regular =
      kernels::serial::conv3d_forward(x, wide, {1, 1, 1}, causal::regular_padding(wide.shape()));
  const Tensor got = causal::causal_conv3d(x, k);
  CHECK(got.shape() == Shape{6, 5, 5, 3});
  CHECK(max_abs_diff(got, regular) <= 1e-12);
}

TEST_CASE("causal conv output frame t ignores later frames") {
  Rng rng(2);
  const Tensor x = random_tensor({7, 4, 4, 3}, rng);
  const Tensor k = random_tensor({3, 3, 3, 3, 4}, rng);
  const Tensor y = causal::causal_conv3d(x, k);
  for (std::int64_t t = 0; t < 7; ++t) {
    const Tensor y2 = causal::causal_conv3d(perturb_after(x, t, rng), k);
    CAPTURE(t);
    CHECK(changed_in_first(y, y2, t + 1) == 0);
  }
}

TEST_CASE("frame map arithmetic") {
  CHECK(causal::FrameMap::downsample(17, 4).output_frames == 5);
  CHECK(causal::FrameMap::downsample(1, 4).output_frames == 1);
  CHECK(causal::FrameMap::downsample(9, 2).output_frames == 5);
  CHECK(causal::FrameMap::upsample(5, 4).output_frames == 17);
  CHECK(causal::FrameMap::upsample(1, 3).output_frames == 1);
  CHECK_THROWS_AS(causal::FrameMap::downsample(8, 4), ShapeError);
  for (std::int64_t s = 1; s <= 4; ++s)
    for (std::int64_t t = 1; t <= 25; t += s) {
      const auto d = causal::FrameMap::downsample(t, s);
      CHECK(causal::FrameMap::upsample(d.output_frames, s).output_frames == t);
    }
}

TEST_CASE("temporal downsample impulse alignment") {
  Tensor x({9, 1, 1, 1});
  x[2] = 1.0;  // third frame
  Tensor k({3, 1, 1, 1, 1}, 1.0);
  Tape tape;
  const Var y = causal::temporal_downsample(tape.constant(x), tape.constant(k), 2);
  REQUIRE(y.shape() == Shape{5, 1, 1, 1});
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 1.0);  // second output frame, aligned with input frame 2 * 1
  CHECK_THROWS_AS(causal::temporal_downsample(tape.constant(Tensor({8, 1, 1, 1})),
                                              tape.constant(k), 2),
                  ShapeError);
  const Var img = causal::temporal_downsample(tape.constant(Tensor({1, 2, 2, 1})),
                                              tape.constant(k), 4);
  CHECK(img.shape()[0] == 1);
}

TEST_CASE("temporal upsample repeats and drops leading frames") {
  const Tensor x({2, 1, 1, 1}, std::vector<double>{3.0, 7.0});
  CHECK(causal::temporal_upsample(x, 2) == Tensor({3, 1, 1, 1}, std::vector<double>{3, 7, 7}));
  Rng rng(3);
  const Tensor y = random_tensor({5, 2, 2, 2}, rng);
  const Tensor u = causal::temporal_upsample(y, 4);
  CHECK(u.shape()[0] == 17);
  const Tensor img = random_tensor({1, 3, 3, 2}, rng);
  CHECK(causal::temporal_upsample(img, 4) == img);
}

TEST_CASE("depth to space") {
  const Tensor x({1, 1, 1, 4}, std::vector<double>{1, 2, 3, 4});
  const Tensor y = causal::depth_to_space(x, 2);
  CHECK(y == Tensor({1, 2, 2, 1}, std::vector<double>{1, 2, 3, 4}));
  Rng rng(4);
  const Tensor r = random_tensor({2, 3, 4, 12}, rng);
  CHECK(causal::depth_to_space(r, 1) == r);
  CHECK(causal::space_to_depth(causal::depth_to_space(r, 2), 2) == r);
  const Tensor big = random_tensor({2, 2, 6, 6, 2}, rng);
  CHECK(causal::depth_to_space(causal::space_to_depth(big, 3), 3) == big);
  CHECK_THROWS_AS(causal::depth_to_space(random_tensor({1, 2, 2, 6}, rng), 2), ShapeError);
}

TEST_CASE("blur pool") {
  Rng rng(5);
  const Tensor c({5, 6, 7, 2}, 0.37);
  for (bool causal_t : {false, true}) {
    const Tensor y = causal::blur_pool3d(c, {2, 2, 2}, causal_t);
    for (double v : y.data()) CHECK(v == 0.37);
  }
  const Tensor line({1, 1, 5, 1}, std::vector<double>{0, 0, 4, 0, 0});
  CHECK(causal::blur_pool3d(line, {1, 1, 1}, false) ==
        Tensor({1, 1, 5, 1}, std::vector<double>{0, 1, 2, 1, 0}));

  // Causal temporal taps never look ahead.
  const Tensor x = random_tensor({6, 3, 3, 1}, rng);
  const Tensor y = causal::blur_pool3d(x, {1, 1, 1}, true);
  for (std::int64_t t = 0; t < 6; ++t) {
    CHECK(changed_in_first(y, causal::blur_pool3d(perturb_after(x, t, rng), {1, 1, 1}, true),
                           t + 1) == 0);
  }
}

TEST_CASE("blur pool is more shift robust than strided subsampling") {
  Rng rng(6);
  const std::int64_t n = 16;
  double pooled = 0.0, strided = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    // Smooth field of low-frequency cosines; b is a shifted by one column.
    double amp[3], fy[3], fx[3], ph[3];
    for (int j = 0; j < 3; ++j) {
      amp[j] = rng.uniform(0.2, 1.0);
      fy[j] = rng.uniform(0.1, 0.8);
      fx[j] = rng.uniform(0.1, 0.8);
      ph[j] = rng.uniform(0.0, 6.283185307179586);
    }
    auto field = [&](std::int64_t offset) {
      Tensor t({1, n, n, 1});
      for (std::int64_t y = 0; y < n; ++y)
        for (std::int64_t x = 0; x < n; ++x) {
          double v = 0.0;
          for (int j = 0; j < 3; ++j) {
            v += amp[j] * std::cos(fy[j] * y + fx[j] * static_cast<double>(x + offset) + ph[j]);
          }
          t[y * n + x] = v;
        }
      return t;
    };
    const Tensor a = field(0), b = field(1);
    pooled += l2(causal::blur_pool3d(a, {1, 2, 2}, false),
                 causal::blur_pool3d(b, {1, 2, 2}, false));
    Tensor sa({1, n / 2, n / 2, 1}), sb({1, n / 2, n / 2, 1});
    for (std::int64_t y = 0; y < n / 2; ++y)
      for (std::int64_t x = 0; x < n / 2; ++x) {
        sa[y * (n / 2) + x] = a[(2 * y) * n + 2 * x];
        sb[y * (n / 2) + x] = b[(2 * y) * n + 2 * x];
      }
    strided += l2(sa, sb);
  }
  CAPTURE(pooled / 50);
  CAPTURE(strided / 50);
  CHECK(pooled <= strided);
}

TEST_CASE("group norm statistics") {
  Rng rng(7);
  // Wide input range keeps eps / variance below 1e-6.
  const Tensor x = random_tensor({2, 3, 4, 5, 8}, rng, -10.0, 10.0);
  for (std::int64_t groups : {1, 2, 4, 8}) {
    const Tensor y = causal::group_norm(x, groups);
    const std::int64_t c = 8, cg = c / groups, hw = 4 * 5;
    for (std::int64_t f = 0; f < 2 * 3; ++f)
      for (std::int64_t g = 0; g < groups; ++g) {
        double sum = 0.0, sq = 0.0;
        for (std::int64_t p = 0; p < hw; ++p)
          for (std::int64_t k = 0; k < cg; ++k) {
            const double v = y[(f * hw + p) * c + g * cg + k];
            sum += v;
            sq += v * v;
          }
        const double m = sum / static_cast<double>(hw * cg);
        CHECK(std::abs(m) < 1e-10);
        CHECK(std::abs(sq / static_cast<double>(hw * cg) - m * m - 1.0) <= 1e-6);
      }
  }
  CHECK_THROWS_AS(causal::group_norm(x, 3), ShapeError);
}

TEST_CASE("adaptive group norm") {
  Rng rng(8);
  const Tensor xv = random_tensor({5, 4, 4, 8}, rng);
  const Tensor zv = random_tensor({2, 2, 2, 3}, rng);
  Tape tape;
  const Var x = tape.constant(xv), z = tape.constant(zv);
  const Var plain = causal::group_norm(x, 4);
  const Var zero = causal::adaptive_group_norm(x, z, 4, agn_params(tape, 3, 8, nullptr));
  CHECK(max_abs_diff(zero.value(), plain.value()) == 0.0);

  const Var one = causal::adaptive_group_norm(x, z, 1, agn_params(tape, 3, 8, nullptr));
  for (std::int64_t f = 0; f < 5; ++f) {
    double m = 0.0;
    for (std::int64_t i = 0; i < 4 * 4 * 8; ++i) m += one.value()[f * 128 + i];
    CHECK(std::abs(m / 128.0) < 1e-12);
  }
  CHECK_THROWS_AS(causal::adaptive_group_norm(x, z, 3, agn_params(tape, 3, 8, nullptr)),
                  ShapeError);
}

TEST_CASE("control resize follows the causal frame map") {
  Tensor c({3, 1, 1, 1}, std::vector<double>{10, 20, 30});
  Tape tape;
  const Var r = causal::resize_control(tape.constant(c), 9, 2, 2);
  REQUIRE(r.shape() == Shape{9, 2, 2, 1});
  // Output frame j reads control frame ceil(j / 4).
  const double expect[9] = {10, 20, 20, 20, 20, 30, 30, 30, 30};
  for (std::int64_t j = 0; j < 9; ++j) CHECK(r.value()[j * 4] == expect[j]);
}

TEST_CASE("causal stacks: later frames never reach earlier outputs") {
  Rng rng(9);
  const Stack s{random_tensor({3, 3, 3, 3, 4}, rng), random_tensor({3, 3, 3, 4, 4}, rng),
                random_tensor({3, 3, 3, 4, 5}, rng)};
  const Tensor x = random_tensor({9, 4, 4, 3}, rng);
  const Tensor y = encode_stack(s, x);
  REQUIRE(y.shape() == Shape{5, 4, 4, 5});
  for (std::int64_t t = 0; t < 5; ++t) {
    // Latent frame t is aligned with input frame 2t.
    const Tensor y2 = encode_stack(s, perturb_after(x, 2 * t, rng));
    CAPTURE(t);
    CHECK(changed_in_first(y, y2, t + 1) == 0);
  }
  // First frame alone gives the same first latent frame.
  Tensor first({1, 4, 4, 3});
  for (std::int64_t i = 0; i < first.size(); ++i) first[i] = x[i];
  CHECK(changed_in_first(y, encode_stack(s, first), 1) == 0);

  // Decoder side: upsample -> conv -> adaptive norm driven by the latents.
  const Tensor k = random_tensor({3, 3, 3, 5, 4}, rng);
  auto decode = [&](const Tensor& z) {
    Tape tape;
    Rng prng(10);
    const Var zv = tape.constant(z);
    const Var h = causal::causal_conv3d(causal::temporal_upsample(zv, 2), tape.constant(k));
    return causal::adaptive_group_norm(h, zv, 2, agn_params(tape, 5, 4, &prng)).value();
  };
  const Tensor d = decode(y);
  REQUIRE(d.shape()[0] == 9);
  for (std::int64_t t = 0; t < 5; ++t) {
    // Output frames up to 2t read latent frames up to t.
    CHECK(changed_in_first(d, decode(perturb_after(y, t, rng)), 2 * t + 1) == 0);
  }
}

TEST_CASE("causal op gradients match finite differences") {
  Rng rng(11);
  GradCheckOptions opts;
  auto check = [&](const char* name, const LossBuilder& f, const std::vector<Tensor>& in) {
    CAPTURE(name);
    const auto r = grad_check(f, in, opts);
    CAPTURE(r.max_rel_error);
    CHECK(r.ok());
  };
  const Tensor x = random_tensor({5, 4, 4, 4}, rng);
  check("causal_conv3d",
        [](Tape&, std::span<const Var> v) {
          return reduce_sum(tanh(causal::causal_conv3d(v[0], v[1])));
        },
        {x, random_tensor({3, 3, 3, 4, 2}, rng)});
  check("temporal_downsample",
        [](Tape&, std::span<const Var> v) {
          return reduce_sum(tanh(causal::temporal_downsample(v[0], v[1], 2, 2)));
        },
        {x, random_tensor({3, 3, 3, 4, 2}, rng)});
  check("temporal_upsample",
        [](Tape&, std::span<const Var> v) {
          return reduce_sum(mul(causal::temporal_upsample(v[0], 2), v[1]));
        },
        {random_tensor({3, 2, 2, 2}, rng), random_tensor({5, 2, 2, 2}, rng)});
  check("depth_to_space",
        [](Tape&, std::span<const Var> v) {
          return reduce_sum(mul(causal::depth_to_space(v[0], 2), v[1]));
        },
        {random_tensor({2, 2, 2, 8}, rng), random_tensor({2, 4, 4, 2}, rng)});
  check("group_norm",
        [](Tape&, std::span<const Var> v) {
          return reduce_sum(mul(causal::group_norm(v[0], 2), v[1]));
        },
        {x, random_tensor({5, 4, 4, 4}, rng)});
  check("adaptive_group_norm",
        [](Tape&, std::span<const Var> v) {
          const causal::AdaptiveNormParams p{v[2], v[3], v[4], v[5]};
          return reduce_sum(mul(causal::adaptive_group_norm(v[0], v[1], 2, p), v[6]));
        },
        {random_tensor({5, 4, 4, 4}, rng), random_tensor({3, 2, 2, 3}, rng),
         random_tensor({3, 4}, rng), random_tensor({4}, rng), random_tensor({3, 4}, rng),
         random_tensor({4}, rng), random_tensor({5, 4, 4, 4}, rng)});
}
