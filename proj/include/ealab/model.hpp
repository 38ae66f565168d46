#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ealab/attention.hpp"
#include "ealab/rng.hpp"
#include "ealab/tasks.hpp"
#include "ealab/tensor.hpp"

namespace ealab {

// Raised when an activation, loss or gradient goes non-finite.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class WeightSharing { shared, per_position };

WeightSharing parse_weight_sharing(const std::string& name);
std::string to_string(WeightSharing sharing);

// One pre-LN transformer block over one-hot embeddings (d = basis), causal
// attention, no positional code, tanh feedforward expanded by hidden_factor,
// and a flattened (d*N_con x d) readout.
struct ModelConfig {
  int basis = 2;        // N; also the embedding dimension
  int context_len = 16;  // N_con
  AttentionKernelSpec kernel;
  WeightSharing sharing = WeightSharing::shared;
  int hidden_factor = 4;
  double ln_eps = 1e-5;

  int embed_dim() const { return basis; }
  int hidden_dim() const { return hidden_factor * basis; }
  int block_count() const {
    return sharing == WeightSharing::per_position ? context_len : 1;
  }
  void validate() const;
};

// Projection weights carry no biases; the feedforward does.
struct BlockWeights {
  Tensor2 w_q, w_k, w_v, w_o;  // d x d
  Tensor2 w1;                  // hidden x d
  Tensor1 b1;                  // hidden
  Tensor2 w2;                  // d x hidden
  Tensor1 b2;                  // d
};

// `blocks` has one entry in shared mode and N_con entries in per_position
// mode; layer-norm parameters and the readout are always shared.
struct ModelParams {
  Tensor1 ln1_gain, ln1_bias;
  Tensor1 ln2_gain, ln2_bias;
  std::vector<BlockWeights> blocks;
  Tensor2 w_r;  // (d*N_con) x d
  Tensor1 b_r;  // d
};

using ModelGrads = ModelParams;
using Velocity = ModelParams;

// Weights Gaussian(0, 1/sqrt(fan_in)); biases 0; LN gain 1, bias 0.
ModelParams init_params(const ModelConfig& config, Rng& rng);
ModelParams zero_params(const ModelConfig& config);

// Intermediate activations captured for the backward pass and for attention
// inspection.
struct ForwardTrace {
  Tensor2 x, xn, xhat1;
  Tensor1 inv_std1;
  Tensor2 q, k, v, z, attn, attn_out, h, hn, xhat2;
  Tensor1 inv_std2;
  Tensor2 u, f, y;
  Tensor1 readout;
};

// Readout vector in R^d. `forced_attention`, when set, replaces the kernel's
// attention weights (testing hook).
Tensor1 forward(const ModelParams& params, const ModelConfig& config,
                std::span<const Symbol> context, ForwardTrace* trace = nullptr,
                const Tensor2* forced_attention = nullptr);

// Sum of squared differences against the one-hot target.
double loss(const Tensor1& readout, Symbol target, int basis);

// Argmax of the readout; ties break to the lowest index.
Symbol predict_greedy(const ModelParams& params, const ModelConfig& config,
                      std::span<const Symbol> context);

// Exact reverse-mode gradients of loss(forward(context), target).
ModelGrads backward(const ModelParams& params, const ModelConfig& config,
                    std::span<const Symbol> context, Symbol target,
                    double* loss_out = nullptr);

struct ParamCount {
  std::vector<std::pair<std::string, std::size_t>> breakdown;
  std::size_t total = 0;
};
ParamCount param_count(const ModelConfig& config);

// Flat, canonically ordered view over every trainable coordinate.
struct ParamsFlat {
  std::vector<std::pair<std::string, std::span<double>>> parts;
  std::size_t total = 0;

  double& coord(std::size_t flat_index);
  std::vector<double*> coord_pointers();
};
ParamsFlat flatten(ModelParams& params);
std::vector<double> to_flat_vector(const ModelParams& params);

// Elementwise v <- momentum*v - lr*g; p <- p + v.
void sgd_momentum_step(ModelParams& params, Velocity& velocity,
                       const ModelGrads& grads, double momentum, double lr);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::uint64_t rng_seed = 0;
  std::int64_t epoch = 0;
};

// JSON container; doubles round-trip bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ealab
