#include "trce/diffusion.hpp"

#include <cmath>

#include "trce/adam.hpp"
#include "trce/errors.hpp"
#include "trce/rng.hpp"

namespace trce {

Tensor add_noise(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& schedule) {
    if (!z0.same_shape(eps))
        throw InvalidArgument("add_noise: eps shape " + shape_str(eps.shape) +
                              " does not match z0 " + shape_str(z0.shape));
    const double a = schedule.sqrt_alpha_bar(t);
    const double b = schedule.sqrt_one_minus_alpha_bar(t);
    Tensor out = z0;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a * out.data[i] + b * eps.data[i];
    return out;
}

Tensor ddim_step(const Tensor& z, const Tensor& eps_pred, int t, int t_prev,
                 const NoiseSchedule& schedule) {
    if (t <= t_prev || t_prev < 0)
        throw InvalidArgument("ddim_step: need t > t_prev >= 0, got t=" + std::to_string(t) +
                              " t_prev=" + std::to_string(t_prev));
    const double sa = schedule.sqrt_alpha_bar(t);
    const double sb = schedule.sqrt_one_minus_alpha_bar(t);
    const double sa_prev = schedule.sqrt_alpha_bar(t_prev);
    const double sb_prev = schedule.sqrt_one_minus_alpha_bar(t_prev);
    Tensor out = z;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double z0_hat = (z.data[i] - sb * eps_pred.data[i]) / sa;
        out.data[i] = sa_prev * z0_hat + sb_prev * eps_pred.data[i];
    }
    return out;
}

TokenSequence null_tokens() {
    TokenSequence seq;
    seq.word_count = 0;
    seq.ids.assign(kSeqLen, kEotId);
    seq.ids[0] = kSotId;
    return seq;
}

PromptEncoding null_encoding(const ModelCheckpoint& cp) {
    return encode(cp.tensors, null_tokens(), cp.arch.text);
}

PromptEncoding encode_prompt(const ModelCheckpoint& cp, const std::vector<std::string>& words,
                             const Vocabulary& vocab) {
    return encode(cp.tensors, tokenize(words, vocab), cp.arch.text);
}

Tensor predict_eps(const ModelCheckpoint& cp, const Tensor& z, const PromptEncoding& enc, int t,
                   const EotAblation* ablation) {
    Tape tape;
    ParamBinder params(tape, cp.tensors);
    const int zn = tape.constant(z);
    const int en = tape.constant(enc.embedding);
    const int out = denoiser_on_tape(tape, params, zn, en, t, cp.arch, ablation);
    return tape.value(out);
}

Tensor cfg_predict(const ModelCheckpoint& cp, const Tensor& z, const PromptEncoding* prompt,
                   int t, double alpha, const EotAblation* ablation) {
    const PromptEncoding uncond = null_encoding(cp);
    Tensor eps_u = predict_eps(cp, z, uncond, t);
    if (prompt == nullptr || alpha == 0.0) return eps_u;
    Tensor eps_c = predict_eps(cp, z, *prompt, t, ablation);
    return add_scaled(eps_u, sub(eps_c, eps_u), alpha);
}

SampleResult sample(const ModelCheckpoint& cp, const std::vector<std::string>& prompt_words,
                    const Vocabulary& vocab, const SampleOptions& opts) {
    const int hw = cp.arch.den.image_size * cp.arch.den.image_size;
    const bool conditional = !prompt_words.empty();
    PromptEncoding cond;
    if (conditional) cond = encode_prompt(cp, prompt_words, vocab);
    const PromptEncoding uncond = null_encoding(cp);

    EotAblation ablation;
    const EotAblation* abl = nullptr;
    if (opts.eot_zero != 0) {
        if (!conditional) throw InvalidArgument("eot ablation requires a prompt");
        const int eot_count = cp.arch.text.seq_len - cond.first_eot;
        if (opts.eot_zero < 0 || opts.eot_zero > eot_count)
            throw InvalidArgument("eot ablation count " + std::to_string(opts.eot_zero) +
                                  " out of [0, " + std::to_string(eot_count) + "]");
        ablation = {cond.first_eot, opts.eot_zero};
        abl = &ablation;
    }

    Rng rng(derive_seed(opts.seed, 0x5a3d));
    Tensor z({1, hw});
    rng.fill_normal(z);

    SampleResult res;
    const std::vector<int> ts = ddim_timesteps(cp.schedule.timesteps, opts.steps);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const int t = ts[k], t_prev = ts[k + 1];
        if (opts.record_trajectory) res.trajectory.push_back({t, z});
        Tensor eps_u = predict_eps(cp, z, uncond, t);
        Tensor eps;
        if (!conditional || opts.alpha == 0.0) {
            eps = std::move(eps_u);
        } else {
            Tensor eps_c = predict_eps(cp, z, cond, t, abl);
            eps = add_scaled(eps_u, sub(eps_c, eps_u), opts.alpha);
        }
        z = ddim_step(z, eps, t, t_prev, cp.schedule);
    }
    if (opts.record_trajectory) res.trajectory.push_back({0, z});
    res.image = z;
    clamp_(res.image, -1.0, 1.0);
    return res;
}

ModelCheckpoint pretrain(const SyntheticDataset& data, const Vocabulary& vocab,
                         const PretrainConfig& cfg, std::vector<TrainLogEntry>* log) {
    if (data.items.empty()) throw InvalidArgument("pretrain: empty dataset");

    ModelArch arch;
    arch.text = {vocab.size(), cfg.text_dim, cfg.text_blocks, cfg.text_heads, kSeqLen};
    arch.den = cfg.den;
    NoiseSchedule schedule = NoiseSchedule::linear(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    ModelCheckpoint cp = init_model(arch, schedule, cfg.seed);

    // pre-tokenize once; prompts are fixed for the whole run
    std::vector<TokenSequence> tokens;
    tokens.reserve(data.items.size());
    for (const auto& ex : data.items) tokens.push_back(tokenize(ex.words, vocab));
    const TokenSequence null_seq = null_tokens();

    Rng order_rng(derive_seed(cfg.seed, 0x0bde7));
    Rng draw_rng(derive_seed(cfg.seed, 0xd5a4));
    std::vector<std::size_t> perm(data.items.size());
    std::size_t cursor = perm.size();  // forces an initial shuffle
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    AdamState opt;
    const double inv_batch = 1.0 / cfg.batch;

    for (long step = 0; step < cfg.steps; ++step) {
        Tape tape;
        ParamBinder params(tape, cp.tensors, [](const std::string&) { return true; });
        int batch_loss = -1;
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor >= perm.size()) {
                for (std::size_t i = perm.size(); i > 1; --i) {
                    const std::size_t j = order_rng.below(i);
                    std::swap(perm[i - 1], perm[j]);
                }
                cursor = 0;
            }
            const Example& ex = data.items[perm[cursor]];
            const TokenSequence& seq = tokens[perm[cursor]];
            ++cursor;

            const int t = 1 + static_cast<int>(draw_rng.below(
                                  static_cast<std::uint64_t>(schedule.timesteps)));
            Tensor eps(ex.image.shape);
            draw_rng.fill_normal(eps);
            const bool drop = draw_rng.uniform() < cfg.cfg_dropout;

            const Tensor z_t = add_noise(ex.image, t, eps, schedule);
            const int text = encode_on_tape(tape, params, drop ? null_seq : seq, arch.text);
            const int pred =
                denoiser_on_tape(tape, params, tape.constant(z_t), text, t, arch, nullptr);
            const int loss = tape.sum_squares(tape.sub(pred, tape.constant(eps)));
            batch_loss = b == 0 ? loss : tape.add(batch_loss, loss);
        }
        batch_loss = tape.scale(batch_loss, inv_batch);
        const double loss_value = tape.value(batch_loss).data[0];
        if (!std::isfinite(loss_value))
            throw TrainingDivergedError("pretrain: loss is not finite", step);
        if (log) log->push_back({step, loss_value});

        tape.backward(batch_loss);
        const auto grads = params.harvest();
        adam_step(cp.tensors, grads, opt, cfg.lr);
    }
    cp.provenance = "pretrained";
    return cp;
}

}  // namespace trce
