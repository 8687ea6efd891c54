#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drafter/common.hpp"
#include "drafter/dist.hpp"
#include "drafter/tensor.hpp"

namespace drafter {

enum class ModelKind { transformer, bigram };
enum class Activation { silu };

struct ToyLmConfig {
    int vocab_size = 64;
    int context_len = 256;
    int layers = 4;
    int heads = 4;
    int hidden_dim = 128;
    int intermediate_dim = 352;
    Activation activation = Activation::silu;

    void validate(ModelKind kind) const;
    bool operator==(const ToyLmConfig&) const = default;
};

// Tiny autoregressive language model. Two kinds share one interface:
//   transformer — pre-norm decoder blocks (RMS norm, causal multi-head
//                 attention, SiLU MLP) with learned token + position
//                 embeddings and an untied output head;
//   bigram      — a vocab x vocab logit table indexed by the previous
//                 token; exactly enumerable, used by the oracle module.
// Parameters are a flat ordered list of named tensors; forward is a pure
// function of (params, tokens).
struct ToyLm {
    ToyLmConfig config;
    ModelKind kind = ModelKind::transformer;
    ParamList params;

    static ToyLm init_transformer(const ToyLmConfig& cfg, RngStream& rng);
    // Zero logit table: uniform next-token distribution everywhere.
    static ToyLm init_bigram(int vocab_size);
    // Logit table from a positive count matrix, table[a][b] = log counts[a][b].
    static ToyLm bigram_from_counts(const std::vector<std::vector<double>>& counts);

    int64_t param_count() const;  // closed form; matches total_count(params)
};

// Loss value plus the gradient with respect to per-position logits; the
// contract between losses and model backward. dlogits rows past the last
// scored position are zero.
struct GradReport {
    double loss = 0.0;
    Tensor dlogits;  // [len x vocab]
};

// Per-position logits, causal: row t conditions on tokens[0..t] only.
Tensor forward(const ToyLm& model, std::span<const TokenId> tokens);

// Exact reverse-mode gradient of sum_t <logits[t], dlogits[t]> w.r.t. params.
ParamList backward(const ToyLm& model, std::span<const TokenId> tokens, const Tensor& dlogits);

// Opaque activation cache for the forward/backward pair used by training
// loops to avoid recomputing the forward pass.
struct ForwardCache;
Tensor forward_cached(const ToyLm& model, std::span<const TokenId> tokens, ForwardCache& cache);
ParamList backward_cached(const ToyLm& model, std::span<const TokenId> tokens, const ForwardCache& cache,
                          const Tensor& dlogits);

// Final-position next-token distribution after temperature and nucleus
// transforms.
Dist next_token_dist(const ToyLm& model, std::span<const TokenId> context, const SamplingConfig& sampling);

// Mean next-token cross-entropy over positions 0..len-2 and its dlogits.
GradReport ce_loss_and_grad(const ToyLm& model, std::span<const TokenId> tokens);

// params <- params - lr * clip(grads) with global-norm clipping
// (clip_norm <= 0 disables clipping).
void sgd_step(ToyLm& model, const ParamList& grads, double lr, double clip_norm);

struct ForwardCache {
    struct Layer {
        Tensor x_in;             // residual stream entering the block
        std::vector<double> rms_attn, rms_mlp;
        Tensor n1, q, k, v;      // post-norm input and projections
        std::vector<Tensor> att; // per-head [T x T] attention weights
        Tensor ctx;              // concatenated head outputs
        Tensor x_mid;            // residual stream entering the MLP
        Tensor n2, h_pre, h_act; // MLP activations
    };
    std::vector<Layer> layers;
    Tensor x_final, n_final;
    std::vector<double> rms_final;
};

}  // namespace drafter
