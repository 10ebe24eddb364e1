#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "trce/checkpoint.hpp"
#include "trce/dataset.hpp"
#include "trce/denoiser.hpp"
#include "trce/text_encoder.hpp"

namespace trce {

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
Tensor add_noise(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& schedule);

// Deterministic DDIM update (stochasticity 0) from t to t_prev < t.
Tensor ddim_step(const Tensor& z, const Tensor& eps_pred, int t, int t_prev,
                 const NoiseSchedule& schedule);

TokenSequence null_tokens();
PromptEncoding null_encoding(const ModelCheckpoint& cp);
PromptEncoding encode_prompt(const ModelCheckpoint& cp, const std::vector<std::string>& words,
                             const Vocabulary& vocab);

// Single noise prediction for one conditioning.
Tensor predict_eps(const ModelCheckpoint& cp, const Tensor& z, const PromptEncoding& enc, int t,
                   const EotAblation* ablation = nullptr);

// Classifier-free guidance: eps_u + alpha * (eps_c - eps_u). A null prompt or
// alpha == 0 returns the unconditional prediction exactly (single forward).
Tensor cfg_predict(const ModelCheckpoint& cp, const Tensor& z, const PromptEncoding* prompt,
                   int t, double alpha, const EotAblation* ablation = nullptr);

struct SampleOptions {
    int steps = 30;
    std::uint64_t seed = 0;
    double alpha = 5.0;
    bool record_trajectory = false;
    int eot_zero = 0;  // post-softmax EoT ablation column count, 0 = off
};

struct TrajectoryPoint {
    int t;
    Tensor z;
};

struct SampleResult {
    Tensor image;  // final latent clipped to [-1, 1]
    std::vector<TrajectoryPoint> trajectory;
};

// Seeded Gaussian start, cfg prediction + DDIM over a uniform timestep
// ladder. Records step-start latents (and the final latent at t = 0) when
// asked.
SampleResult sample(const ModelCheckpoint& cp, const std::vector<std::string>& prompt_words,
                    const Vocabulary& vocab, const SampleOptions& opts);

struct PretrainConfig {
    int steps = 3000;
    int batch = 32;
    double lr = 1e-3;
    double cfg_dropout = 0.1;
    std::uint64_t seed = 0;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    DenoiserArch den;
    int text_blocks = 2;
    int text_heads = 2;
    int text_dim = 16;
};

struct TrainLogEntry {
    long step;
    double loss;
};

// Joint denoiser + text-encoder training with classifier-free-guidance
// condition dropout; deterministic given the seed.
ModelCheckpoint pretrain(const SyntheticDataset& data, const Vocabulary& vocab,
                         const PretrainConfig& cfg, std::vector<TrainLogEntry>* log = nullptr);

}  // namespace trce
