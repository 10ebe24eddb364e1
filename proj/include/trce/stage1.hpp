#pragma once

#include <string>
#include <vector>

#include "trce/checkpoint.hpp"
#include "trce/linalg.hpp"
#include "trce/vocab.hpp"

namespace trce {

// Erasure task resolved against the vocabulary's concept lexicon.
struct ConceptSpec {
    std::string malicious;                  // concept name, e.g. "cross"
    std::string safe;                       // its opposite, e.g. "circle"
    std::vector<std::string> preservation;  // neutral concepts for P^k

    static ConceptSpec from_vocab(const Vocabulary& vocab, const std::string& malicious_name);
};

struct RefinementConfig {
    double eta = 0.01;
    // keep the shared SoT row and the null-text first-EoT in the preserve set
    bool preserve_special = true;
    RidgePolicy ridge;
};

// P^m, P^s (index-aligned), P^k as word lists.
struct PromptSets {
    std::vector<std::vector<std::string>> malicious;
    std::vector<std::vector<std::string>> safe;
    std::vector<std::vector<std::string>> keep;
};

PromptSets augment_concepts(const Vocabulary& vocab, const ConceptSpec& spec);

// First-EoT embeddings, one row per prompt; erase/target rows are aligned.
struct EmbeddingSets {
    Tensor erase;   // [n, d]
    Tensor target;  // [n, d]
    Tensor keep;    // [q, d]
};

EmbeddingSets collect_embeddings(const ModelCheckpoint& cp, const Vocabulary& vocab,
                                 const PromptSets& prompts);

struct RefineResult {
    Tensor w;          // refined projection, [d_out, d_text]
    double residual;   // ||W' A - B||_F
    double condition;  // solve condition estimate
    bool ridged;
};

// Least-squares refinement of one projection W (d_out x d_text): maps erase
// embeddings onto W * target embeddings while holding the keep set, weighted
// by eta. Solved via the Gram system with solve_right.
RefineResult closed_form_refine(const Tensor& w, const EmbeddingSets& sets, double eta,
                                const RidgePolicy& ridge = {});

struct LayerReport {
    std::string name;
    double rel_change;  // ||W' - W||_F / ||W||_F
    double residual;
    double condition;
    bool ridged;
};

struct RefinementReport {
    double eta = 0.0;
    int erase_count = 0;
    int keep_count = 0;
    std::vector<LayerReport> layers;
};

// Applies closed_form_refine to every cross-attention K and V projection,
// leaving every other tensor bitwise unchanged. Produces the TRCE-T model.
ModelCheckpoint apply_refinement(const ModelCheckpoint& cp, const Vocabulary& vocab,
                                 const ConceptSpec& spec, const RefinementConfig& cfg,
                                 RefinementReport* report = nullptr);

}  // namespace trce
