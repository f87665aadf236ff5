#include <algorithm>

#include "lfqv/errors.hpp"
#include "lfqv/rng.hpp"
#include "lfqv/training.hpp"

namespace lfqv::train {

namespace {

constexpr int kRects = 2;

struct ClipSpec {
  double base[3], gx[3], gy[3];
  std::int64_t vy, vx;
  struct Rect {
    std::int64_t y0, x0, h, w;
    double color[3];
  } rects[kRects];
};

ClipSpec make_spec(std::uint64_t seed, std::uint64_t index, std::int64_t h, std::int64_t w) {
  Rng rng(mix_seed(seed, index));
  ClipSpec s{};
  for (int c = 0; c < 3; ++c) {
    s.base[c] = rng.uniform(-0.5, 0.5);
    s.gx[c] = rng.uniform(-0.4, 0.4);
    s.gy[c] = rng.uniform(-0.4, 0.4);
  }
  s.vy = static_cast<std::int64_t>(rng.below(5)) - 2;
  s.vx = static_cast<std::int64_t>(rng.below(5)) - 2;
  for (auto& r : s.rects) {
    const std::int64_t hmin = std::max<std::int64_t>(1, h / 4);
    const std::int64_t wmin = std::max<std::int64_t>(1, w / 4);
    const std::int64_t hmax = std::max(hmin, h / 2), wmax = std::max(wmin, w / 2);
    r.h = hmin + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hmax - hmin + 1)));
    r.w = wmin + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(wmax - wmin + 1)));
    r.y0 = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(h)));
    r.x0 = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(w)));
    for (double& c : r.color) c = rng.uniform(-1.0, 1.0);
  }
  return s;
}

std::int64_t wrap(std::int64_t v, std::int64_t n) { return ((v % n) + n) % n; }

void background_at(const ClipSpec& s, std::int64_t y, std::int64_t x, std::int64_t h,
                   std::int64_t w, double* px) {
  const double u = w > 1 ? static_cast<double>(x) / static_cast<double>(w - 1) - 0.5 : 0.0;
  const double v = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) - 0.5 : 0.0;
  for (int c = 0; c < 3; ++c) px[c] = s.base[c] + s.gx[c] * u + s.gy[c] * v;
}

void render(const ClipSpec& s, std::int64_t t, std::int64_t h, std::int64_t w, double* out) {
  for (std::int64_t f = 0; f < t; ++f)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        double px[3];
        background_at(s, y, x, h, w, px);
        for (const auto& r : s.rects) {
          if (wrap(y - (r.y0 + s.vy * f), h) < r.h && wrap(x - (r.x0 + s.vx * f), w) < r.w) {
            for (int c = 0; c < 3; ++c) px[c] = r.color[c];
          }
        }
        double* o = out + ((f * h + y) * w + x) * 3;
        for (int c = 0; c < 3; ++c) o[c] = px[c];
      }
}

}  // namespace

SynthVideoSource::SynthVideoSource(std::uint64_t seed, std::int64_t frames, std::int64_t height,
                                   std::int64_t width)
    : seed_(seed), t_(frames), h_(height), w_(width) {
  if (frames < 1 || height < 1 || width < 1) throw ShapeError("synthetic clip extents must be >= 1");
}

Tensor SynthVideoSource::clip(std::uint64_t index) const {
  Tensor out(Shape{t_, h_, w_, 3});
  render(make_spec(seed_, index, h_, w_), t_, h_, w_, out.data().data());
  return out;
}

Tensor SynthVideoSource::batch(std::uint64_t first, std::int64_t count) const {
  if (count < 1) throw ShapeError("batch count must be >= 1");
  Tensor out(Shape{count, t_, h_, w_, 3});
  const std::int64_t clip_size = t_ * h_ * w_ * 3;
  for (std::int64_t i = 0; i < count; ++i) {
    render(make_spec(seed_, first + static_cast<std::uint64_t>(i), h_, w_), t_, h_, w_,
           out.data().data() + i * clip_size);
  }
  return out;
}

SynthVideoSource::Motion SynthVideoSource::motion(std::uint64_t index) const {
  const ClipSpec s = make_spec(seed_, index, h_, w_);
  return {s.vy, s.vx};
}

Tensor SynthVideoSource::background(std::uint64_t index) const {
  const ClipSpec s = make_spec(seed_, index, h_, w_);
  Tensor out(Shape{h_, w_, 3});
  for (std::int64_t y = 0; y < h_; ++y)
    for (std::int64_t x = 0; x < w_; ++x) background_at(s, y, x, h_, w_, &out[(y * w_ + x) * 3]);
  return out;
}

std::vector<Tensor> synth_dataset(std::uint64_t seed, std::int64_t count, std::int64_t t,
                                  std::int64_t h, std::int64_t w) {
  SynthVideoSource src(seed, t, h, w);
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(src.clip(static_cast<std::uint64_t>(i)));
  return out;
}

std::uint64_t heldout_seed(std::uint64_t seed) { return mix_seed(seed, 0xC0FFEEull); }

}  // namespace lfqv::train
