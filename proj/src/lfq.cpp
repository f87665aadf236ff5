#include "lfqv/lfq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "lfqv/errors.hpp"

namespace lfqv::lfq {

namespace {

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw DomainError("LFQ dimension must be in [1, 32], got " + std::to_string(dim));
  }
}

int log2_exact(std::uint64_t k, const char* what) {
  if (k < 2 || !std::has_single_bit(k)) {
    throw ConfigError(std::string(what) + " must be a power of two >= 2, got " + std::to_string(k));
  }
  return std::countr_zero(k);
}

double stable_sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void log_signs(Tape& tape, const Tensor& z) {
  if (!tape.branch_logging()) return;
  for (double v : z.data()) tape.log_branch(v > 0.0);
}

double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

// Joint distribution over the 2^g codes of `count` consecutive dimensions
// under the product model; bit b of the code is dimension b.
void product_table(const double* p, const int* dims, int count, std::vector<double>& table) {
  table.assign(std::size_t{1} << count, 0.0);
  table[0] = 1.0;
  for (int b = 0; b < count; ++b) {
    const double pb = p[dims[b]];
    const std::size_t half = std::size_t{1} << b;
    for (std::size_t c = 0; c < half; ++c) {
      table[c + half] = table[c] * pb;
      table[c] *= 1.0 - pb;
    }
  }
}

// Sum over groups of H(batch-mean joint code distribution). If dp is given,
// accumulates d(sum)/dp into it (same [N, D] layout as p).
double batch_entropy(const double* p, std::int64_t n, int d, int g, double* dp) {
  double total = 0.0;
  std::vector<double> q, joint, rest, logq;
  std::vector<int> dims(static_cast<std::size_t>(g)), others(static_cast<std::size_t>(g));
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t codes = std::size_t{1} << g;

  for (int start = 0; start < d; start += g) {
    for (int b = 0; b < g; ++b) dims[static_cast<std::size_t>(b)] = start + b;
    q.assign(codes, 0.0);
    for (std::int64_t s = 0; s < n; ++s) {
      product_table(p + s * d, dims.data(), g, joint);
      for (std::size_t c = 0; c < codes; ++c) q[c] += joint[c];
    }
    double h = 0.0;
    for (auto& v : q) {
      v *= inv_n;
      h -= xlogx(v);
    }
    total += h;
    if (!dp) continue;

    // dH/dp_k = -(1/N) sum over the other bits of
    //   (log Q[bit k set] - log Q[bit k clear]) * prod_{j != k} f_j.
    logq.resize(codes);
    for (std::size_t c = 0; c < codes; ++c) logq[c] = std::log(std::max(q[c], 1e-300));
    for (std::int64_t s = 0; s < n; ++s) {
      const double* ps = p + s * d;
      for (int k = 0; k < g; ++k) {
        int m = 0;
        for (int b = 0; b < g; ++b)
          if (b != k) others[static_cast<std::size_t>(m++)] = start + b;
        product_table(ps, others.data(), g - 1, rest);
        const std::size_t low_mask = (std::size_t{1} << k) - 1;
        double acc = 0.0;
        for (std::size_t ci = 0; ci < rest.size(); ++ci) {
          const std::size_t zero = ((ci & ~low_mask) << 1) | (ci & low_mask);
          const std::size_t one = zero | (std::size_t{1} << k);
          acc += (logq[one] - logq[zero]) * rest[ci];
        }
        dp[s * d + start + k] -= inv_n * acc;
      }
    }
  }
  return total;
}

void check_subgroup(int d, int g) {
  if (g < 1 || d % g != 0) {
    throw ConfigError("entropy subgroup size " + std::to_string(g) + " does not divide D = " +
                      std::to_string(d));
  }
  if (g > 24) throw ConfigError("entropy subgroup size above 24 is not enumerable");
}

void check_tau(double tau) {
  if (!(tau > 0.0)) throw ConfigError("entropy temperature must be > 0");
}

}  // namespace

void LfqConfig::validate() const {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("LFQ dim must be in [1, 32]");
  check_tau(entropy_temperature);
  check_subgroup(dim, subgroup_size);
  if (num_subspaces < 1 || dim % num_subspaces != 0) {
    throw ConfigError("num_subspaces " + std::to_string(num_subspaces) + " does not divide D = " +
                      std::to_string(dim));
  }
}

LfqConfig LfqConfig::for_codebook(std::uint64_t codebook_size) {
  LfqConfig c;
  c.dim = log2_exact(codebook_size, "codebook size");
  c.subgroup_size = std::min(c.dim, 12);
  while (c.dim % c.subgroup_size) --c.subgroup_size;
  c.num_subspaces = c.dim % 2 == 0 ? 2 : 1;
  return c;
}

void TokenGrid::validate() const {
  check_dim(dim);
  if (t < 1 || h < 1 || w < 1 || static_cast<std::int64_t>(indices.size()) != count()) {
    throw DomainError("token grid extents do not match index count");
  }
  const std::uint64_t k = codebook_size();
  for (auto v : indices) {
    if (v >= k) throw DomainError("token index " + std::to_string(v) + " >= codebook size");
  }
}

Tensor quantize(const Tensor& z) {
  Tensor q(z.shape());
  for (std::int64_t i = 0; i < z.size(); ++i) q[i] = z[i] > 0.0 ? 1.0 : -1.0;
  return q;
}

Var quantize(const Var& z) {
  log_signs(*z.tape(), z.value());
  return z.tape()->record(quantize(z.value()), {z},
                          [](const Tensor& g, std::span<Tensor* const> grads) {
                            Tensor& gz = *grads[0];
                            for (std::int64_t i = 0; i < g.size(); ++i) gz[i] += g[i];
                          });
}

std::uint64_t token_index(std::span<const double> code) {
  check_dim(static_cast<int>(code.size()));
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < code.size(); ++i)
    if (code[i] > 0.0) idx |= std::uint64_t{1} << i;
  return idx;
}

TokenGrid token_index(const Tensor& z) {
  if (z.rank() < 1 || z.rank() > 4) {
    throw DimensionError("token_index expects [..., D] of rank 1..4, got " + shape_str(z.shape()));
  }
  TokenGrid grid;
  grid.dim = static_cast<int>(z.dim(-1));
  check_dim(grid.dim);
  const auto& s = z.shape();
  switch (z.rank()) {
    case 2: grid.w = s[0]; break;
    case 3: grid.h = s[0]; grid.w = s[1]; break;
    case 4: grid.t = s[0]; grid.h = s[1]; grid.w = s[2]; break;
    default: break;
  }
  const std::size_t d = static_cast<std::size_t>(grid.dim);
  grid.indices.resize(static_cast<std::size_t>(grid.count()));
  for (std::size_t i = 0; i < grid.indices.size(); ++i) {
    grid.indices[i] = static_cast<std::uint32_t>(token_index(z.data().subspan(i * d, d)));
  }
  return grid;
}

std::vector<double> index_to_codes(std::uint64_t index, int dim) {
  check_dim(dim);
  if (dim < 64 && index >= (std::uint64_t{1} << dim)) {
    throw DomainError("token index " + std::to_string(index) + " out of range for D = " +
                      std::to_string(dim));
  }
  std::vector<double> codes(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) codes[static_cast<std::size_t>(i)] = (index >> i) & 1 ? 1.0 : -1.0;
  return codes;
}

Tensor grid_to_codes(const TokenGrid& grid) {
  grid.validate();
  Tensor out(Shape{grid.t, grid.h, grid.w, grid.dim});
  std::int64_t o = 0;
  for (auto idx : grid.indices) {
    for (int i = 0; i < grid.dim; ++i) out[o++] = (idx >> i) & 1u ? 1.0 : -1.0;
  }
  return out;
}

Tensor soft_code_probabilities(const Tensor& z, double tau) {
  check_tau(tau);
  Tensor p(z.shape());
  for (std::int64_t i = 0; i < z.size(); ++i) p[i] = stable_sigmoid(2.0 * z[i] / tau);
  return p;
}

Var soft_code_probabilities(const Var& z, double tau) {
  check_tau(tau);
  return sigmoid(affine(z, 2.0 / tau, 0.0));
}

EntropyTerms entropy_terms(const Tensor& probs, int subgroup_size) {
  if (probs.rank() != 2) throw DimensionError("entropy_terms expects p[N, D]");
  const std::int64_t n = probs.dim(0);
  const int d = static_cast<int>(probs.dim(1));
  check_subgroup(d, subgroup_size);
  EntropyTerms t;
  for (double v : probs.data()) t.per_sample -= xlogx(v) + xlogx(1.0 - v);
  t.per_sample /= static_cast<double>(n);
  t.batch = batch_entropy(probs.data().data(), n, d, subgroup_size, nullptr);
  return t;
}

Var entropy_loss(const Var& z, double tau, int subgroup_size) {
  check_tau(tau);
  const Tensor& zv = z.value();
  if (zv.rank() < 1) throw DimensionError("entropy_loss expects z[..., D]");
  const int d = static_cast<int>(zv.dim(-1));
  check_subgroup(d, subgroup_size);
  const std::int64_t n = zv.size() / d;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double da_dz = 2.0 / tau;

  Tensor p(zv.shape());
  Tensor grad(zv.shape());
  double per_sample = 0.0;
  for (std::int64_t i = 0; i < zv.size(); ++i) {
    const double a = da_dz * zv[i];
    const double pi = stable_sigmoid(a);
    p[i] = pi;
    per_sample += pi * softplus(-a) + (1.0 - pi) * softplus(a);
    // dH/da = -a p (1 - p)
    grad[i] = -a * pi * (1.0 - pi) * da_dz * inv_n;
  }
  per_sample *= inv_n;

  Tensor dbatch(zv.shape());
  const double batch = batch_entropy(p.data().data(), n, d, subgroup_size, dbatch.data().data());
  for (std::int64_t i = 0; i < zv.size(); ++i) {
    grad[i] -= dbatch[i] * p[i] * (1.0 - p[i]) * da_dz;
  }

  return z.tape()->record(Tensor::scalar(per_sample - batch), {z},
                          [grad = std::move(grad)](const Tensor& g,
                                                   std::span<Tensor* const> grads) {
                            Tensor& gz = *grads[0];
                            for (std::int64_t i = 0; i < gz.size(); ++i) gz[i] += g[0] * grad[i];
                          });
}

Var commitment_loss(const Var& z) {
  log_signs(*z.tape(), z.value());
  Var target = z.tape()->constant(quantize(z.value()));
  return reduce_mean(square(sub(z, target)));
}

double entropy_weight(std::int64_t step, double base_weight, std::int64_t anneal_steps,
                      double anneal_factor) {
  if (anneal_steps <= 0) throw ConfigError("entropy anneal_steps must be > 0");
  if (step < 0) throw DomainError("entropy_weight: negative step");
  if (step >= anneal_steps) return base_weight;
  const double start = anneal_factor * base_weight;
  const double frac = static_cast<double>(step) / static_cast<double>(anneal_steps);
  return start + (base_weight - start) * frac;
}

std::vector<std::uint32_t> factorize_index(std::uint64_t index, std::uint64_t codebook_size,
                                           int num_subspaces) {
  const int d = log2_exact(codebook_size, "codebook size");
  if (num_subspaces < 1 || d % num_subspaces != 0) {
    throw ConfigError("num_subspaces must divide D = " + std::to_string(d));
  }
  if (index >= codebook_size) {
    throw DomainError("token index " + std::to_string(index) + " >= codebook size " +
                      std::to_string(codebook_size));
  }
  const int bits = d / num_subspaces;
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::vector<std::uint32_t> subs(static_cast<std::size_t>(num_subspaces));
  for (int j = 0; j < num_subspaces; ++j) {
    subs[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>((index >> (j * bits)) & mask);
  }
  return subs;
}

std::uint64_t defactorize_index(std::span<const std::uint32_t> sub_indices,
                                std::uint64_t codebook_size) {
  const int d = log2_exact(codebook_size, "codebook size");
  const int m = static_cast<int>(sub_indices.size());
  if (m < 1 || d % m != 0) throw ConfigError("subspace count must divide D");
  const int bits = d / m;
  std::uint64_t index = 0;
  for (int j = 0; j < m; ++j) {
    const std::uint64_t s = sub_indices[static_cast<std::size_t>(j)];
    if (s >> bits) throw DomainError("sub-index " + std::to_string(s) + " exceeds its subspace");
    index |= s << (j * bits);
  }
  return index;
}

FactorizedHeadOutput factorized_head(std::span<const std::uint32_t> sub_indices,
                                     std::span<const Tensor> tables, const Tensor& features) {
  if (sub_indices.size() != tables.size() || tables.empty()) {
    throw DimensionError("factorized_head: one sub-index per embedding table required");
  }
  if (features.rank() != 1) throw DimensionError("factorized_head: features must be [width]");
  const std::int64_t width = features.dim(0);
  FactorizedHeadOutput out{Tensor(Shape{width}), {}};
  for (std::size_t j = 0; j < tables.size(); ++j) {
    const Tensor& e = tables[j];
    if (e.rank() != 2 || e.dim(1) != width) {
      throw DimensionError("factorized_head: table " + std::to_string(j) + " has shape " +
                           shape_str(e.shape()) + ", expected [rows, " + std::to_string(width) +
                           "]");
    }
    const std::int64_t rows = e.dim(0);
    const std::int64_t r = sub_indices[j];
    if (r >= rows) throw DomainError("factorized_head: sub-index exceeds table rows");
    for (std::int64_t k = 0; k < width; ++k) out.embedding[k] += e[r * width + k];
    Tensor logits(Shape{rows});
    for (std::int64_t row = 0; row < rows; ++row) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < width; ++k) acc += e[row * width + k] * features[k];
      logits[row] = acc;
    }
    out.logits.push_back(std::move(logits));
  }
  return out;
}

}  // namespace lfqv::lfq
