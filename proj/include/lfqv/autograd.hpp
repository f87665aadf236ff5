#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// A Tape owns every value produced during one forward pass. Ops are free
// functions over Var handles; each records its output together with a
// closure that maps the output gradient onto its inputs. Tape::backward
// replays the closures in reverse recording order, once each.
//
// A Tape is confined to one thread. Values on the tape are never mutated
// after they are recorded.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lfqv/kernels.hpp"
#include "lfqv/tensor.hpp"

namespace lfqv {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::int32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

// grads[i] is null for inputs that do not require a gradient. A backward
// closure must accumulate (+=) into every non-null entry.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grads)>;

class Gradients {
 public:
  // d(loss)/d(v); a zero tensor of v's shape if nothing flowed into v.
  Tensor of(const Var& v) const;
  bool touched(const Var& v) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<std::optional<Tensor>> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Tracked input: gradients are reported for it.
  Var leaf(Tensor value);
  // Untracked input: no gradient flows into or through it.
  Var constant(Tensor value);

  // Records an op output. If no input requires a gradient the closure is
  // dropped and the output is a constant.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  // loss must be a single-element tensor recorded on this tape.
  Gradients backward(const Var& loss) const;

  const Tensor& value(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(std::int32_t id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  std::size_t size() const { return nodes_.size(); }

  // Branch log for finite-difference probes. When enabled, non-smooth ops
  // append which side of their switching point every element took.
  void set_branch_logging(bool on) { log_branches_ = on; }
  bool branch_logging() const { return log_branches_; }
  void log_branch(bool side) { branches_.push_back(side); }
  const std::vector<bool>& branches() const { return branches_; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::int32_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool log_branches_ = false;
  std::vector<bool> branches_;
};

// ---- elementwise and shape ops ----
// Binary ops accept identical shapes, or a rank-0 scalar on either side.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// scale * x + shift with constant coefficients.
Var affine(const Var& x, double scale, double shift);
Var leaky_relu(const Var& x, double slope = 0.2);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var square(const Var& x);

Var reduce_sum(const Var& x);
Var reduce_mean(const Var& x);

Var reshape(const Var& x, Shape shape);
// Zero padding with (before, after) per axis; pads.size() == rank.
Var pad_explicit(const Var& x, const std::vector<std::array<std::int64_t, 2>>& pads);
Var slice(const Var& x, const Shape& begin, const Shape& extent);

// Forward value passes through unchanged; no gradient flows back.
Var stop_gradient(const Var& x);

// out[i] = x[src[i]]. Gradient scatters back positionally. Used for every
// pure rearrangement (depth-to-space, frame repetition, nearest resize).
Var gather(const Var& x, Shape out_shape, std::vector<std::int64_t> src);

// ---- convolution ----

Var conv3d(const Var& input, const Var& kernel, const kernels::Stride3& stride,
           const kernels::Padding3& pad);
// Adds b[C] along the last axis of x.
Var bias_add(const Var& x, const Var& b);

}  // namespace lfqv
