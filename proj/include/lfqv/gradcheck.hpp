#pragma once

// Central finite-difference check of tape gradients.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lfqv/autograd.hpp"

namespace lfqv {

// Builds a scalar loss on `tape` from leaves holding the given inputs.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradCheckOptions {
  int probes = 100;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor: |a - n| / max(|a|, |n|, floor). The floor is raised
  // so that a discrepancy within noise_ulps ulps of the loss, divided by
  // the stencil width, always passes: the central difference cannot
  // resolve anything finer.
  double floor = 1e-8;
  double noise_ulps = 64.0;
  // Probes whose stencil changes a branch of a non-smooth op are redrawn,
  // up to probes * max_redraw_factor draws in total.
  int max_redraw_factor = 20;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  int probes = 0;
  int failures = 0;
  int redrawn = 0;  // stencils that crossed a non-smooth point
  double max_rel_error = 0.0;
  bool ok() const { return failures == 0; }
};

// Probes random (input, element) pairs, uniformly over all elements. A
// result with fewer than opts.probes valid probes counts the shortfall as
// failures.
GradCheckResult grad_check(const LossBuilder& loss, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opts = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace lfqv
