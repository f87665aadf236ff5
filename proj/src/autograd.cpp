#include "lfqv/autograd.hpp"

#include <cmath>
#include <string>

#include "lfqv/errors.hpp"

namespace lfqv {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Tensor Gradients::of(const Var& v) const {
  if (v.tape() != tape_) throw ContractError("gradient requested for a Var from another tape");
  const auto& g = grads_[static_cast<std::size_t>(v.id())];
  if (g) return *g;
  return Tensor(v.shape());
}

bool Gradients::touched(const Var& v) const {
  return v.tape() == tape_ && grads_[static_cast<std::size_t>(v.id())].has_value();
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape() != this) throw ContractError("op input recorded on a different tape");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || requires_grad(in.id());
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw ContractError("backward: loss is not on this tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  Gradients out;
  out.tape_ = this;
  out.grads_.resize(nodes_.size());
  const auto root = static_cast<std::size_t>(loss.id());
  if (!nodes_[root].requires_grad) return out;
  out.grads_[root] = Tensor(loss.shape(), 1.0);

  std::vector<Tensor*> slots;
  for (std::size_t i = root + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward || !out.grads_[i]) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto j = static_cast<std::size_t>(node.inputs[k]);
      if (!nodes_[j].requires_grad) continue;
      if (!out.grads_[j]) out.grads_[j] = Tensor(nodes_[j].value.shape());
      slots[k] = &*out.grads_[j];
    }
    node.backward(*out.grads_[i], slots);
  }
  return out;
}

namespace {

enum class Bcast { kSame, kScalarA, kScalarB };

Bcast broadcast_kind(const Var& a, const Var& b, const char* op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa == sb) return Bcast::kSame;
  if (sa.empty()) return Bcast::kScalarA;
  if (sb.empty()) return Bcast::kScalarB;
  throw DimensionError(std::string(op) + ": shapes " + shape_str(sa) + " and " + shape_str(sb) +
                       " are neither identical nor scalar");
}

// Reduces a full-shape gradient onto an operand that was broadcast from a
// scalar, or accumulates it directly.
void accumulate(Tensor* dst, const Tensor& g, bool scalar_operand) {
  if (!dst) return;
  if (scalar_operand) {
    double s = 0.0;
    for (double v : g.data()) s += v;
    (*dst)[0] += s;
  } else {
    for (std::int64_t i = 0; i < g.size(); ++i) (*dst)[i] += g[i];
  }
}

template <typename F>
Tensor binary_map(const Tensor& a, const Tensor& b, Bcast kind, F f) {
  const Tensor& full = kind == Bcast::kScalarA ? b : a;
  Tensor out(full.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const double av = kind == Bcast::kScalarA ? a[0] : a[i];
    const double bv = kind == Bcast::kScalarB ? b[0] : b[i];
    out[i] = f(av, bv);
  }
  return out;
}

template <typename F, typename D>
Var unary(const Var& x, F f, D dfdx) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return x.tape()->record(std::move(out), {x},
                          [x, dfdx](const Tensor& g, std::span<Tensor* const> grads) {
                            const Tensor& xv = x.value();
                            Tensor& gx = *grads[0];
                            for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xv[i]);
                          });
}

// Row-major strides for a shape.
std::vector<std::int64_t> strides_of(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  const Bcast k = broadcast_kind(a, b, "add");
  Tensor out = binary_map(a.value(), b.value(), k, [](double x, double y) { return x + y; });
  return a.tape()->record(std::move(out), {a, b},
                          [k](const Tensor& g, std::span<Tensor* const> grads) {
                            accumulate(grads[0], g, k == Bcast::kScalarA);
                            accumulate(grads[1], g, k == Bcast::kScalarB);
                          });
}

Var sub(const Var& a, const Var& b) {
  const Bcast k = broadcast_kind(a, b, "sub");
  Tensor out = binary_map(a.value(), b.value(), k, [](double x, double y) { return x - y; });
  return a.tape()->record(std::move(out), {a, b},
                          [k](const Tensor& g, std::span<Tensor* const> grads) {
                            accumulate(grads[0], g, k == Bcast::kScalarA);
                            if (grads[1]) {
                              Tensor neg(g.shape());
                              for (std::int64_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
                              accumulate(grads[1], neg, k == Bcast::kScalarB);
                            }
                          });
}

Var mul(const Var& a, const Var& b) {
  const Bcast k = broadcast_kind(a, b, "mul");
  Tensor out = binary_map(a.value(), b.value(), k, [](double x, double y) { return x * y; });
  return a.tape()->record(
      std::move(out), {a, b}, [a, b, k](const Tensor& g, std::span<Tensor* const> grads) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        if (grads[0]) {
          Tensor ga(g.shape());
          for (std::int64_t i = 0; i < g.size(); ++i)
            ga[i] = g[i] * (k == Bcast::kScalarB ? bv[0] : bv[i]);
          accumulate(grads[0], ga, k == Bcast::kScalarA);
        }
        if (grads[1]) {
          Tensor gb(g.shape());
          for (std::int64_t i = 0; i < g.size(); ++i)
            gb[i] = g[i] * (k == Bcast::kScalarA ? av[0] : av[i]);
          accumulate(grads[1], gb, k == Bcast::kScalarB);
        }
      });
}

Var affine(const Var& x, double scale, double shift) {
  return unary(
      x, [scale, shift](double v) { return scale * v + shift; },
      [scale](double) { return scale; });
}

Var leaky_relu(const Var& x, double slope) {
  if (x.tape()->branch_logging()) {
    for (double v : x.value().data()) x.tape()->log_branch(v > 0.0);
  }
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Var tanh(const Var& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

Var sigmoid(const Var& x) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  return unary(x, sig, [sig](double v) {
    const double s = sig(v);
    return s * (1.0 - s);
  });
}

Var square(const Var& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var reduce_sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape()->record(Tensor::scalar(s), {x},
                          [](const Tensor& g, std::span<Tensor* const> grads) {
                            Tensor& gx = *grads[0];
                            for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
                          });
}

Var reduce_mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape()->record(Tensor::scalar(s / n), {x},
                          [n](const Tensor& g, std::span<Tensor* const> grads) {
                            Tensor& gx = *grads[0];
                            for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g[0] / n;
                          });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape()->record(std::move(out), {x},
                          [](const Tensor& g, std::span<Tensor* const> grads) {
                            Tensor& gx = *grads[0];
                            for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          });
}

Var gather(const Var& x, Shape out_shape, std::vector<std::int64_t> src) {
  const Tensor& xv = x.value();
  if (static_cast<std::int64_t>(src.size()) != shape_numel(out_shape)) {
    throw DimensionError("gather: index count does not match output shape " +
                         shape_str(out_shape));
  }
  Tensor out(std::move(out_shape));
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] < 0 || src[i] >= xv.size()) throw DimensionError("gather: source index out of range");
    out[static_cast<std::int64_t>(i)] = xv[src[i]];
  }
  return x.tape()->record(std::move(out), {x},
                          [src = std::move(src)](const Tensor& g, std::span<Tensor* const> grads) {
                            Tensor& gx = *grads[0];
                            for (std::size_t i = 0; i < src.size(); ++i)
                              gx[src[i]] += g[static_cast<std::int64_t>(i)];
                          });
}

Var slice(const Var& x, const Shape& begin, const Shape& extent) {
  const Shape& s = x.shape();
  if (begin.size() != s.size() || extent.size() != s.size()) {
    throw DimensionError("slice: begin/extent rank does not match input rank");
  }
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (begin[a] < 0 || extent[a] < 1 || begin[a] + extent[a] > s[a]) {
      throw DimensionError("slice: window exceeds input shape " + shape_str(s));
    }
  }
  const auto in_st = strides_of(s);
  const auto out_n = shape_numel(extent);
  const auto out_st = strides_of(extent);
  std::vector<std::int64_t> src(static_cast<std::size_t>(out_n));
  for (std::int64_t i = 0; i < out_n; ++i) {
    std::int64_t rem = i, off = 0;
    for (std::size_t a = 0; a < s.size(); ++a) {
      const std::int64_t c = rem / out_st[a];
      rem %= out_st[a];
      off += (c + begin[a]) * in_st[a];
    }
    src[static_cast<std::size_t>(i)] = off;
  }
  return gather(x, extent, std::move(src));
}

Var pad_explicit(const Var& x, const std::vector<std::array<std::int64_t, 2>>& pads) {
  const Shape& s = x.shape();
  if (pads.size() != s.size()) throw DimensionError("pad_explicit: one (before, after) per axis");
  Shape out_shape = s;
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (pads[a][0] < 0 || pads[a][1] < 0) throw DimensionError("pad_explicit: negative padding");
    out_shape[a] += pads[a][0] + pads[a][1];
  }
  const Tensor& xv = x.value();
  Tensor out(out_shape);
  const auto in_st = strides_of(s);
  const auto out_st = strides_of(out_shape);
  // Output offset of each input element.
  std::vector<std::int64_t> dst(static_cast<std::size_t>(xv.size()));
  for (std::int64_t i = 0; i < xv.size(); ++i) {
    std::int64_t rem = i, off = 0;
    for (std::size_t a = 0; a < s.size(); ++a) {
      const std::int64_t c = rem / in_st[a];
      rem %= in_st[a];
      off += (c + pads[a][0]) * out_st[a];
    }
    dst[static_cast<std::size_t>(i)] = off;
    out[off] = xv[i];
  }
  return x.tape()->record(std::move(out), {x},
                          [dst = std::move(dst)](const Tensor& g, std::span<Tensor* const> grads) {
                            Tensor& gx = *grads[0];
                            for (std::size_t i = 0; i < dst.size(); ++i)
                              gx[static_cast<std::int64_t>(i)] += g[dst[i]];
                          });
}

Var stop_gradient(const Var& x) { return x.tape()->constant(x.value()); }

Var conv3d(const Var& input, const Var& kernel, const kernels::Stride3& stride,
           const kernels::Padding3& pad) {
  Tensor out = kernels::parallel::conv3d_forward(input.value(), kernel.value(), stride, pad);
  return input.tape()->record(
      std::move(out), {input, kernel},
      [input, kernel, stride, pad](const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) {
          Tensor gx = kernels::parallel::conv3d_backward_input(g, kernel.value(), input.shape(),
                                                               stride, pad);
          accumulate(grads[0], gx, false);
        }
        if (grads[1]) {
          Tensor gw = kernels::parallel::conv3d_backward_kernel(g, input.value(), kernel.shape(),
                                                                stride, pad);
          accumulate(grads[1], gw, false);
        }
      });
}

Var bias_add(const Var& x, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 1 || xv.rank() < 1 || xv.dim(-1) != bv.dim(0)) {
    throw DimensionError("bias_add: bias " + shape_str(bv.shape()) +
                         " does not match last axis of " + shape_str(xv.shape()));
  }
  const std::int64_t c = bv.dim(0);
  Tensor out = xv;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += bv[i % c];
  return x.tape()->record(std::move(out), {x, b},
                          [c](const Tensor& g, std::span<Tensor* const> grads) {
                            accumulate(grads[0], g, false);
                            if (grads[1]) {
                              Tensor& gb = *grads[1];
                              for (std::int64_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
                            }
                          });
}

}  // namespace lfqv
