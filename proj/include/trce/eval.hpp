#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trce/checkpoint.hpp"
#include "trce/dataset.hpp"
#include "trce/diffusion.hpp"
#include "trce/vocab.hpp"

namespace trce {

// Template-correlation detector. Templates are canonical patterns cropped to
// tmpl_size, zero-mean and unit-norm; detection is the max normalized
// cross-correlation over integer shifts within `radius`, mapped to [0, 1].
struct DetectorConfig {
    std::map<std::string, Tensor> templates;  // flattened [1, tmpl_size^2]
    int image_size = 16;
    int tmpl_size = 12;
    int radius = 2;
    double tau = 0.6;
};

DetectorConfig make_detector(const std::vector<std::string>& patterns, int image_size = 16,
                             int tmpl_size = 12, int radius = 2);

double detect(const Tensor& image, const Tensor& tmpl, int radius);

// best-scoring template name (ties broken by map order)
std::string best_template(const DetectorConfig& det, const Tensor& image, double* score = nullptr);

struct BenchmarkEntry {
    std::string text;
    std::uint64_t seed = 0;
    std::string target;  // known pattern, neutral suites only
};

struct BenchmarkSuite {
    std::string name;
    std::vector<BenchmarkEntry> entries;
};

BenchmarkSuite load_suite(const std::string& path);

std::vector<Tensor> generate_suite_images(const ModelCheckpoint& cp, const Vocabulary& vocab,
                                          const BenchmarkSuite& suite, int steps, double alpha);

double asr_from_images(const std::vector<Tensor>& images, const DetectorConfig& det,
                       const std::string& malicious_pattern);

double fidelity_from_images(const std::vector<Tensor>& images, const BenchmarkSuite& suite,
                            const DetectorConfig& det);

// Convenience forms that generate internally.
double asr(const ModelCheckpoint& cp, const Vocabulary& vocab, const BenchmarkSuite& suite,
           const DetectorConfig& det, const std::string& malicious_pattern, int steps,
           double alpha);
double prompt_fidelity(const ModelCheckpoint& cp, const Vocabulary& vocab,
                       const BenchmarkSuite& suite, const DetectorConfig& det, int steps,
                       double alpha);

// Feature statistics for the Frechet metric: seeded random projection of the
// flattened pixels to 16 dims plus 4 pooled-quadrant means.
struct FeatureStats {
    Tensor mu;     // [dim]
    Tensor sigma;  // [dim, dim]
    int count = 0;
};

inline constexpr int kFeatureDim = 20;
inline constexpr std::uint64_t kFeatureSeed = 0xfea7;

FeatureStats extract_features(const std::vector<Tensor>& images,
                              std::uint64_t seed = kFeatureSeed);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2); squared_mean
// switches the mean term between the squared and plain norm.
double frechet_distance(const FeatureStats& a, const FeatureStats& b, bool squared_mean = true);

// Calibration: tau = q95 of the malicious-template score on safe-concept
// generations + a small margin, so the pretrained false-positive rate stays
// at or below 5%.
double calibrate_tau(const ModelCheckpoint& cp, const Vocabulary& vocab,
                     const DetectorConfig& det, const std::string& malicious_pattern,
                     const std::string& safe_concept, int count, std::uint64_t seed, int steps,
                     double alpha);

// Sampling run with the post-softmax attention columns of the first k EoT
// positions zeroed.
Tensor eot_ablation(const ModelCheckpoint& cp, const Vocabulary& vocab,
                    const std::vector<std::string>& prompt, int k_zeroed, std::uint64_t seed,
                    int steps, double alpha);

struct ProbeCandidate {
    std::vector<std::string> words;
    double similarity = 0.0;
    std::uint64_t seed = 0;
    double score = 0.0;  // detector score against the probed model
};

struct ProbeResult {
    std::vector<ProbeCandidate> candidates;
    double asr = 0.0;
};

struct ProbeConfig {
    int budget = 2;       // refinement passes
    int max_len = 4;
    int top_k = 40;
    std::uint64_t seed = 0;
    bool exclude_concept_words = true;
    int steps = 30;
    double alpha = 5.0;
};

// Greedy coordinate search over token sequences maximizing cosine similarity
// between the candidate's first-EoT embedding and the mean first-EoT of the
// malicious prompt set, then measures ASR of the found prompts on `model`.
ProbeResult adversarial_probe(const ModelCheckpoint& encoder_model, const ModelCheckpoint& model,
                              const Vocabulary& vocab, const std::string& concept_name,
                              const DetectorConfig& det, const ProbeConfig& cfg);

// Search only (model-independent); used to build a shared adversarial suite.
std::vector<ProbeCandidate> probe_search(const ModelCheckpoint& encoder_model,
                                         const Vocabulary& vocab, const std::string& concept_name,
                                         const ProbeConfig& cfg);

}  // namespace trce
