#include "trce/stage2.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "trce/adam.hpp"
#include "trce/errors.hpp"
#include "trce/rng.hpp"

namespace trce {

using json = nlohmann::ordered_json;

TrajectoryCache cache_trajectories(const ModelCheckpoint& model, const Vocabulary& vocab,
                                   const std::vector<std::vector<std::string>>& prompts,
                                   int count, std::uint64_t seed_base, int steps, double alpha) {
    if (prompts.empty()) throw InvalidArgument("cache_trajectories: no prompts");
    if (count < 1) throw InvalidArgument("cache_trajectories: count must be >= 1");
    TrajectoryCache cache;
    cache.kind = "malicious";
    cache.model_provenance = model.provenance;
    cache.steps = steps;
    cache.alpha = alpha;
    const int early = steps / 2;  // first half of the ladder
    for (int i = 0; i < count; ++i) {
        const int pid = i % static_cast<int>(prompts.size());
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(i);
        SampleOptions opts;
        opts.steps = steps;
        opts.seed = seed;
        opts.alpha = alpha;
        opts.record_trajectory = true;
        SampleResult res = sample(model, prompts[static_cast<std::size_t>(pid)], vocab, opts);
        for (int k = 0; k < early; ++k) {
            const TrajectoryPoint& p = res.trajectory[static_cast<std::size_t>(k)];
            cache.records.push_back(
                {pid, join_words(prompts[static_cast<std::size_t>(pid)]), seed, p.t, p.z});
        }
    }
    return cache;
}

TrajectoryCache cache_uncond(const ModelCheckpoint& model, const Vocabulary& vocab, int count,
                             std::uint64_t seed_base, int steps) {
    if (count < 1) throw InvalidArgument("cache_uncond: count must be >= 1");
    TrajectoryCache cache;
    cache.kind = "uncond";
    cache.model_provenance = model.provenance;
    cache.steps = steps;
    cache.alpha = 0.0;
    for (int i = 0; i < count; ++i) {
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(i);
        SampleOptions opts;
        opts.steps = steps;
        opts.seed = seed;
        opts.alpha = 0.0;
        opts.record_trajectory = true;
        SampleResult res = sample(model, {}, vocab, opts);
        for (const TrajectoryPoint& p : res.trajectory)
            cache.records.push_back({0, "", seed, p.t, p.z});
    }
    return cache;
}

void save_cache(const TrajectoryCache& cache, const std::string& path) {
    Container c;
    json index;
    index["kind"] = "trajectory_cache";
    index["cache_kind"] = cache.kind;
    index["model_provenance"] = cache.model_provenance;
    index["steps"] = cache.steps;
    index["alpha"] = cache.alpha;
    json records = json::array();
    char name[16];
    for (std::size_t i = 0; i < cache.records.size(); ++i) {
        const TrajectoryRecord& r = cache.records[i];
        std::snprintf(name, sizeof(name), "z_%06zu", i);
        c.entries.emplace_back(name, r.z);
        records.push_back({{"prompt_id", r.prompt_id},
                           {"prompt", r.prompt},
                           {"seed", r.seed},
                           {"t", r.t}});
    }
    index["records"] = std::move(records);
    c.json_text = index.dump();
    save_container(c, path);
}

TrajectoryCache load_cache(const std::string& path) {
    Container c = load_container(path);
    json index;
    try {
        index = json::parse(c.json_text);
    } catch (const json::parse_error& e) {
        throw CheckpointError(CheckpointError::Kind::Truncated,
                              std::string("cache: bad index JSON: ") + e.what());
    }
    if (index.value("kind", "") != "trajectory_cache")
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "container at " + path + " is not a trajectory cache");
    TrajectoryCache cache;
    cache.kind = index.at("cache_kind").get<std::string>();
    cache.model_provenance = index.at("model_provenance").get<std::string>();
    cache.steps = index.at("steps").get<int>();
    cache.alpha = index.at("alpha").get<double>();
    const auto& records = index.at("records");
    if (records.size() != c.entries.size())
        throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                              "cache: index/entry count mismatch");
    cache.records.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rj = records[i];
        cache.records.push_back({rj.at("prompt_id").get<int>(), rj.at("prompt").get<std::string>(),
                                 rj.at("seed").get<std::uint64_t>(), rj.at("t").get<int>(),
                                 c.entries[i].second});
    }
    return cache;
}

Tensor guidance_enhance(const ModelCheckpoint& ref, const Tensor& z,
                        const PromptEncoding& concept_enc, const PromptEncoding& uncond_enc,
                        int t, double beta) {
    Tensor eps_u = predict_eps(ref, z, uncond_enc, t);
    if (beta == 0.0) return eps_u;
    Tensor eps_c = predict_eps(ref, z, concept_enc, t);
    if (beta == 1.0) return eps_c;
    return add_scaled(eps_u, sub(eps_c, eps_u), beta);
}

double erase_loss(const Tensor& pred, const Tensor& f_safe, const Tensor& f_unsafe,
                  double margin) {
    if (!pred.same_shape(f_safe) || !pred.same_shape(f_unsafe))
        throw InvalidArgument("erase_loss: shape mismatch");
    const Tensor ds = sub(pred, f_safe);
    const Tensor du = sub(pred, f_unsafe);
    return std::max(dot(ds, ds) - dot(du, du) + margin, 0.0);
}

double preserve_loss(const Tensor& pred_uncond, const Tensor& ref_uncond) {
    if (!pred_uncond.same_shape(ref_uncond))
        throw InvalidArgument("preserve_loss: shape mismatch");
    const Tensor d = sub(pred_uncond, ref_uncond);
    return dot(d, d);
}

ModelCheckpoint finetune(const ModelCheckpoint& cp_in, const ModelCheckpoint& ref,
                         const TrajectoryCache& malicious, const TrajectoryCache& uncond,
                         const Vocabulary& vocab, const std::string& concept_name,
                         const SteeringConfig& cfg, std::vector<SteeringLogEntry>* log) {
    if (malicious.records.empty() || uncond.records.empty())
        throw InvalidArgument("finetune: empty trajectory cache");
    if (!(cfg.beta >= 1.0)) throw InvalidArgument("finetune: beta must be >= 1");
    if (cfg.lambda < 0.0) throw InvalidArgument("finetune: lambda must be >= 0");
    if (!(cfg.margin > 0.0)) throw InvalidArgument("finetune: margin must be positive");

    const auto selector = cfg.selector == "kv"
                              ? +[](const std::string& n) { return is_cross_attention_kv(n); }
                              : +[](const std::string& n) { return is_visual_layer(n); };

    // the early-half contract on the erase cache
    const int early_limit =
        ddim_timesteps(cp_in.schedule.timesteps, malicious.steps)[malicious.steps / 2];
    for (const TrajectoryRecord& r : malicious.records)
        if (r.t <= early_limit)
            throw InvalidArgument("finetune: malicious cache contains late-half timestep " +
                                  std::to_string(r.t));
    if (malicious.records.size() < static_cast<std::size_t>(cfg.batch_erase))
        throw InvalidArgument("finetune: erase batch larger than the malicious cache");

    const ConceptEntry& mal = vocab.concept_entry(concept_name);
    const std::string safe_name = mal.opposite;
    if (safe_name.empty()) throw InvalidArgument("finetune: concept has no safe opposite");

    // frozen encoder: encodings are constants for the whole run
    const PromptEncoding enc_uncond = null_encoding(cp_in);
    const PromptEncoding enc_malicious = encode_prompt(cp_in, {mal.keyword}, vocab);
    const PromptEncoding enc_safe =
        encode_prompt(cp_in, {vocab.concept_entry(safe_name).keyword}, vocab);
    const PromptEncoding ref_uncond_enc = null_encoding(ref);
    const PromptEncoding ref_malicious = encode_prompt(ref, {mal.keyword}, vocab);
    const PromptEncoding ref_safe =
        encode_prompt(ref, {vocab.concept_entry(safe_name).keyword}, vocab);

    ModelCheckpoint cp = cp_in;
    cp.provenance = cp_in.provenance == "TRCE-T" ? "TRCE-T+V" : "TRCE-V";

    Rng rng(derive_seed(cfg.seed, 0x57ee));
    std::vector<std::size_t> perm(malicious.records.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    AdamState opt;
    long step = 0;
    const std::size_t steps_per_epoch = malicious.records.size() / cfg.batch_erase;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = perm.size(); i > 1; --i) {
            const std::size_t j = rng.below(i);
            std::swap(perm[i - 1], perm[j]);
        }
        for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
            Tape tape;
            ParamBinder params(tape, cp.tensors, selector);
            // conditional / unconditional prediction alternation
            const PromptEncoding& cond = (step % 2 == 0) ? enc_malicious : enc_uncond;

            int erase_acc = -1;
            for (int b = 0; b < cfg.batch_erase; ++b) {
                const TrajectoryRecord& rec =
                    malicious.records[perm[s * cfg.batch_erase + b]];
                const Tensor f_unsafe = guidance_enhance(ref, rec.z, ref_malicious,
                                                         ref_uncond_enc, rec.t, cfg.beta);
                const Tensor f_safe =
                    guidance_enhance(ref, rec.z, ref_safe, ref_uncond_enc, rec.t, cfg.beta);
                const int pred =
                    denoiser_on_tape(tape, params, tape.constant(rec.z),
                                     tape.constant(cond.embedding), rec.t, cp.arch, nullptr);
                const int d_safe = tape.sum_squares(tape.sub(pred, tape.constant(f_safe)));
                const int d_unsafe = tape.sum_squares(tape.sub(pred, tape.constant(f_unsafe)));
                const int hinge =
                    tape.max_const(tape.add_const(tape.sub(d_safe, d_unsafe), cfg.margin), 0.0);
                erase_acc = b == 0 ? hinge : tape.add(erase_acc, hinge);
            }
            const int erase_term = tape.scale(erase_acc, 1.0 / cfg.batch_erase);

            int preserve_acc = -1;
            for (int b = 0; b < cfg.batch_preserve; ++b) {
                const TrajectoryRecord& rec =
                    uncond.records[rng.below(uncond.records.size())];
                const Tensor ref_pred = predict_eps(ref, rec.z, ref_uncond_enc, rec.t);
                const int pred =
                    denoiser_on_tape(tape, params, tape.constant(rec.z),
                                     tape.constant(enc_uncond.embedding), rec.t, cp.arch,
                                     nullptr);
                const int term = tape.sum_squares(tape.sub(pred, tape.constant(ref_pred)));
                preserve_acc = b == 0 ? term : tape.add(preserve_acc, term);
            }
            const int preserve_term = tape.scale(preserve_acc, 1.0 / cfg.batch_preserve);

            const int total = tape.add(erase_term, tape.scale(preserve_term, cfg.lambda));
            const double total_v = tape.value(total).data[0];
            if (!std::isfinite(total_v))
                throw TrainingDivergedError("finetune: loss is not finite", step);
            if (log)
                log->push_back({step, tape.value(erase_term).data[0],
                                tape.value(preserve_term).data[0], total_v});

            tape.backward(total);
            const auto grads = params.harvest();
            adam_step(cp.tensors, grads, opt, cfg.lr);
        }
    }
    return cp;
}

}  // namespace trce
