#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trce/checkpoint.hpp"
#include "trce/diffusion.hpp"
#include "trce/vocab.hpp"

namespace trce {

struct TrajectoryRecord {
    int prompt_id = 0;
    std::string prompt;  // space-joined words; empty for unconditional
    std::uint64_t seed = 0;
    int t = 0;
    Tensor z;
};

struct TrajectoryCache {
    std::string kind;  // "malicious" | "uncond"
    std::string model_provenance;
    int steps = 50;
    double alpha = 5.0;
    std::vector<TrajectoryRecord> records;
};

// `count` conditional sampling runs on the original model, keeping the
// latents entering each of the first half of the DDIM steps. Prompts cycle
// through the given list; run i is seeded with seed_base + i.
TrajectoryCache cache_trajectories(const ModelCheckpoint& model, const Vocabulary& vocab,
                                   const std::vector<std::vector<std::string>>& prompts,
                                   int count, std::uint64_t seed_base, int steps = 50,
                                   double alpha = 5.0);

// Null-text runs keeping latents across the whole schedule, final state
// included.
TrajectoryCache cache_uncond(const ModelCheckpoint& model, const Vocabulary& vocab, int count,
                             std::uint64_t seed_base, int steps = 50);

void save_cache(const TrajectoryCache& cache, const std::string& path);
TrajectoryCache load_cache(const std::string& path);

// f = eps(z, null, t) + beta * (eps(z, c, t) - eps(z, null, t)) on the frozen
// reference model. beta = 0/1 reduce to the unconditional / conditional
// prediction exactly.
Tensor guidance_enhance(const ModelCheckpoint& ref, const Tensor& z,
                        const PromptEncoding& concept_enc, const PromptEncoding& uncond_enc,
                        int t, double beta);

// Triplet hinge on squared distances; single-sample values (training batches
// average these).
double erase_loss(const Tensor& pred, const Tensor& f_safe, const Tensor& f_unsafe,
                  double margin);
double preserve_loss(const Tensor& pred_uncond, const Tensor& ref_uncond);

struct SteeringConfig {
    double beta = 15.0;
    double lambda = 100.0;
    double margin = 0.01;
    double lr = 1e-4;
    int epochs = 3;
    int batch_erase = 8;
    int batch_preserve = 8;
    std::uint64_t seed = 0;
    std::string selector = "visual";  // "visual" (self-attn + cross-attn Q) or "kv"
};

struct SteeringLogEntry {
    long step;
    double erase;
    double preserve;
    double total;
};

// Contrastive fine-tuning of the visual layers against a frozen reference.
// cp_in may be the stage-1 output (yields TRCE-T+V) or the pretrained model
// (yields TRCE-V).
ModelCheckpoint finetune(const ModelCheckpoint& cp_in, const ModelCheckpoint& ref,
                         const TrajectoryCache& malicious, const TrajectoryCache& uncond,
                         const Vocabulary& vocab, const std::string& concept_name,
                         const SteeringConfig& cfg,
                         std::vector<SteeringLogEntry>* log = nullptr);

}  // namespace trce
