#include "lfqv/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "lfqv/rng.hpp"

namespace lfqv {

namespace {

struct Eval {
  double value;
  std::vector<bool> branches;
};

Eval eval(const LossBuilder& loss, const std::vector<Tensor>& inputs) {
  Tape tape;
  tape.set_branch_logging(true);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  const double v = loss(tape, vars).value().item();
  return {v, tape.branches()};
}

double ulp(double x) {
  const double a = std::abs(x);
  return std::nextafter(a, INFINITY) - a;
}

}  // namespace

double relative_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

GradCheckResult grad_check(const LossBuilder& loss, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opts) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.leaf(t));
    const Gradients g = tape.backward(loss(tape, vars));
    for (const auto& v : vars) analytic.push_back(g.of(v));
  }

  std::int64_t total = 0;
  for (const auto& t : inputs) total += t.size();

  GradCheckResult r;
  if (total == 0) return r;
  const std::vector<bool> base = eval(loss, inputs).branches;
  Rng rng(opts.seed);
  std::vector<Tensor> work = inputs;
  const std::int64_t max_draws = std::int64_t{opts.probes} * std::max(opts.max_redraw_factor, 1);
  for (std::int64_t draw = 0; r.probes < opts.probes && draw < max_draws; ++draw) {
    auto flat = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(total)));
    std::size_t which = 0;
    while (flat >= work[which].size()) flat -= work[which++].size();
    const double orig = work[which][flat];
    work[which][flat] = orig + opts.step;
    const Eval up = eval(loss, work);
    work[which][flat] = orig - opts.step;
    const Eval down = eval(loss, work);
    work[which][flat] = orig;
    if (up.branches != base || down.branches != base) {
      ++r.redrawn;
      continue;
    }
    const double numeric = (up.value - down.value) / (2.0 * opts.step);
    const double noise =
        opts.noise_ulps * std::max(ulp(up.value), ulp(down.value)) / (2.0 * opts.step);
    const double floor = std::max(opts.floor, noise / opts.tolerance);
    const double err = relative_error(analytic[which][flat], numeric, floor);
    r.max_rel_error = std::max(r.max_rel_error, err);
    if (!(err <= opts.tolerance)) ++r.failures;
    ++r.probes;
  }
  r.failures += opts.probes - r.probes;
  return r;
}

}  // namespace lfqv
