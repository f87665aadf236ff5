#pragma once

// Lookup-free quantization.
//
// Each latent dimension snaps independently to {-1, +1}; the token index is
// the bit pattern of the positive dimensions, dimension 0 being the least
// significant bit. No codebook embeddings are stored.

#include <cstdint>
#include <span>
#include <vector>

#include "lfqv/autograd.hpp"
#include "lfqv/tensor.hpp"

namespace lfqv::lfq {

inline constexpr int kMaxDim = 32;

struct LfqConfig {
  int dim = 10;                        // D = log2(K)
  double entropy_temperature = 1.0;    // tau of the soft code distribution
  int subgroup_size = 10;              // g, divides D; g == D is the exact joint
  int num_subspaces = 2;               // token factorization, divides D

  std::uint64_t codebook_size() const { return std::uint64_t{1} << dim; }
  // Throws ConfigError.
  void validate() const;
  // Config for a power-of-two codebook size K; other fields default and are
  // clamped to divide the resulting D.
  static LfqConfig for_codebook(std::uint64_t codebook_size);
};

// Integer token indices of shape T x H x W (raster order, W fastest).
struct TokenGrid {
  std::int64_t t = 1, h = 1, w = 1;
  int dim = 1;
  std::vector<std::uint32_t> indices;

  std::uint64_t codebook_size() const { return std::uint64_t{1} << dim; }
  std::int64_t count() const { return t * h * w; }
  std::uint32_t at(std::int64_t ti, std::int64_t hi, std::int64_t wi) const {
    return indices[static_cast<std::size_t>((ti * h + hi) * w + wi)];
  }
  // Throws DomainError if any index >= K or the extents do not match.
  void validate() const;
  bool operator==(const TokenGrid&) const = default;
};

// Hard quantization: -1 where z <= 0, +1 otherwise.
Tensor quantize(const Tensor& z);
// Same forward value; the backward pass is the straight-through identity.
Var quantize(const Var& z);

std::uint64_t token_index(std::span<const double> code);
// Grid over the leading axes of z[..., D]: rank 1 -> 1x1x1, [N,D] -> 1x1xN,
// [H,W,D] -> 1xHxW, [T,H,W,D] -> TxHxW.
TokenGrid token_index(const Tensor& z);

// Throws DomainError if index >= 2^dim or dim is outside [1, 32].
std::vector<double> index_to_codes(std::uint64_t index, int dim);
// [T,H,W,D] code tensor for a grid.
Tensor grid_to_codes(const TokenGrid& grid);

// P(code_i = +1) = sigmoid(2 z_i / tau). Throws ConfigError for tau <= 0.
Tensor soft_code_probabilities(const Tensor& z, double tau);
Var soft_code_probabilities(const Var& z, double tau);

struct EntropyTerms {
  double per_sample = 0.0;  // E[H(q(z))]: batch mean of summed binary entropies
  double batch = 0.0;       // H[E(q(z))]: summed group entropies of the batch mean
  double loss() const { return per_sample - batch; }
};

// Both terms from per-dimension probabilities p[N, D] (values may be exactly
// 0 or 1). The batch term partitions D into groups of `subgroup_size`
// consecutive dimensions and treats each group's 2^g joint codes under the
// per-dimension product model. Natural log.
EntropyTerms entropy_terms(const Tensor& probs, int subgroup_size);

// Differentiable entropy penalty over latents z[..., D], flattened to
// [N, D]. Returns the scalar per_sample - batch.
Var entropy_loss(const Var& z, double tau, int subgroup_size);

// Mean squared distance between z and the stop-gradient hard code.
Var commitment_loss(const Var& z);

// Linear decay from factor * base at step 0 to base at anneal_steps,
// constant afterwards.
double entropy_weight(std::int64_t step, double base_weight, std::int64_t anneal_steps,
                      double anneal_factor);

// Splits the D-bit index into num_subspaces contiguous bit groups, least
// significant group first.
std::vector<std::uint32_t> factorize_index(std::uint64_t index, std::uint64_t codebook_size,
                                           int num_subspaces);
std::uint64_t defactorize_index(std::span<const std::uint32_t> sub_indices,
                                std::uint64_t codebook_size);

struct FactorizedHeadOutput {
  Tensor embedding;             // [width]
  std::vector<Tensor> logits;   // per subspace, [rows_j]
};

// Input embedding = sum_j tables[j][sub_indices[j]]; logits_j = tables[j] *
// features (the same tables serve as tied output projections).
FactorizedHeadOutput factorized_head(std::span<const std::uint32_t> sub_indices,
                                     std::span<const Tensor> tables, const Tensor& features);

}  // namespace lfqv::lfq
