#include "trce/stage1.hpp"

#include <cmath>

#include "trce/diffusion.hpp"
#include "trce/errors.hpp"
#include "trce/text_encoder.hpp"

namespace trce {

ConceptSpec ConceptSpec::from_vocab(const Vocabulary& vocab, const std::string& malicious_name) {
    const ConceptEntry& entry = vocab.concept_entry(malicious_name);
    if (entry.kind != "malicious")
        throw InvalidArgument("concept \"" + malicious_name + "\" is not a malicious concept");
    if (entry.synonyms.empty())
        throw InvalidArgument("concept \"" + malicious_name + "\" needs at least one synonym");
    if (entry.circumlocutions.empty())
        throw InvalidArgument("concept \"" + malicious_name +
                              "\" needs at least one circumlocution");
    if (entry.opposite.empty() || entry.opposite == malicious_name)
        throw InvalidArgument("concept \"" + malicious_name +
                              "\" needs a distinct opposite safe concept");
    ConceptSpec spec;
    spec.malicious = malicious_name;
    spec.safe = entry.opposite;
    for (const auto& [name, e] : vocab.concepts)
        if (e.kind == "neutral") spec.preservation.push_back(name);
    if (spec.preservation.empty())
        throw InvalidArgument("vocabulary has no neutral concepts for the preserve set");
    return spec;
}

PromptSets augment_concepts(const Vocabulary& vocab, const ConceptSpec& spec) {
    if (vocab.templates.empty()) throw InvalidArgument("augment_concepts: no templates");
    const ConceptEntry& mal = vocab.concept_entry(spec.malicious);
    const ConceptEntry& safe = vocab.concept_entry(spec.safe);

    PromptSets sets;
    for (const auto& surface : mal.surface_forms()) {
        for (const auto& tmpl : vocab.templates) {
            sets.malicious.push_back(apply_template(tmpl, surface));
            sets.safe.push_back(apply_template(tmpl, {safe.keyword}));
        }
    }
    for (const auto& name : spec.preservation) {
        const ConceptEntry& keep = vocab.concept_entry(name);
        for (const auto& surface : keep.surface_forms())
            for (const auto& tmpl : vocab.templates)
                sets.keep.push_back(apply_template(tmpl, surface));
    }
    return sets;
}

namespace {

Tensor stack_first_eot(const ModelCheckpoint& cp, const Vocabulary& vocab,
                       const std::vector<std::vector<std::string>>& prompts) {
    const int d = cp.arch.text.dim;
    Tensor out({static_cast<int>(prompts.size()), d});
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const PromptEncoding enc = encode_prompt(cp, prompts[i], vocab);
        const Tensor row = first_eot(enc);
        for (int c = 0; c < d; ++c) out.at(static_cast<int>(i), c) = row.at(0, c);
    }
    return out;
}

}  // namespace

EmbeddingSets collect_embeddings(const ModelCheckpoint& cp, const Vocabulary& vocab,
                                 const PromptSets& prompts) {
    if (prompts.malicious.size() != prompts.safe.size())
        throw InvalidArgument("collect_embeddings: erase/target sets must be aligned");
    EmbeddingSets sets;
    sets.erase = stack_first_eot(cp, vocab, prompts.malicious);
    sets.target = stack_first_eot(cp, vocab, prompts.safe);
    sets.keep = stack_first_eot(cp, vocab, prompts.keep);
    return sets;
}

RefineResult closed_form_refine(const Tensor& w, const EmbeddingSets& sets, double eta,
                                const RidgePolicy& ridge) {
    if (!(eta > 0.0)) throw InvalidArgument("closed_form_refine: eta must be positive");
    const int d = w.cols();
    const int n = sets.erase.rows();
    const int q = sets.keep.rows();
    if (q < 1) throw InvalidArgument("closed_form_refine: preserve set must be non-empty");
    if (sets.erase.cols() != d || sets.keep.cols() != d || sets.target.cols() != d ||
        sets.target.rows() != n)
        throw InvalidArgument("closed_form_refine: embedding dims do not match W");

    // A = sum_i m_i m_i^T + eta * sum_j k_j k_j^T
    Tensor keep_gram = scale(matmul(transpose(sets.keep), sets.keep), eta);
    Tensor a = keep_gram;
    if (n > 0) a = add(matmul(transpose(sets.erase), sets.erase), keep_gram);
    // B = W * (sum_i s_i m_i^T + eta * sum_j k_j k_j^T)
    Tensor inner = keep_gram;
    if (n > 0) inner = add(matmul(transpose(sets.target), sets.erase), keep_gram);
    Tensor b = matmul(w, inner);

    SolveResult solved;
    try {
        solved = solve_right(a, b, ridge);
    } catch (const SingularSystemError& e) {
        throw SingularSystemError(
            "closed_form_refine: Gram matrix singular; enlarge the preserve set",
            e.condition_estimate);
    }
    RefineResult res;
    res.residual = frob_norm(sub(matmul(solved.x, a), b));
    res.w = std::move(solved.x);
    res.condition = solved.condition_estimate;
    res.ridged = solved.ridge_applied;
    return res;
}

ModelCheckpoint apply_refinement(const ModelCheckpoint& cp, const Vocabulary& vocab,
                                 const ConceptSpec& spec, const RefinementConfig& cfg,
                                 RefinementReport* report) {
    PromptSets prompts = augment_concepts(vocab, spec);
    EmbeddingSets sets = collect_embeddings(cp, vocab, prompts);

    if (cfg.preserve_special) {
        // the SoT row is shared by every prompt and the null-text first-EoT
        // anchors unconditional behavior; both join the preserve set
        const PromptEncoding null_enc = null_encoding(cp);
        const int d = cp.arch.text.dim;
        Tensor keep({sets.keep.rows() + 2, d});
        for (int r = 0; r < sets.keep.rows(); ++r)
            for (int c = 0; c < d; ++c) keep.at(r, c) = sets.keep.at(r, c);
        for (int c = 0; c < d; ++c) {
            keep.at(sets.keep.rows(), c) = null_enc.embedding.at(0, c);
            keep.at(sets.keep.rows() + 1, c) = null_enc.embedding.at(null_enc.first_eot, c);
        }
        sets.keep = std::move(keep);
    }

    ModelCheckpoint out = cp;
    out.provenance = "TRCE-T";
    if (report) {
        report->eta = cfg.eta;
        report->erase_count = sets.erase.rows();
        report->keep_count = sets.keep.rows();
        report->layers.clear();
    }
    for (auto& [name, tensor] : out.tensors) {
        if (!is_cross_attention_kv(name)) continue;
        // stored as [d_text, d_attn] acting by e * W; refine in the W * e view
        const Tensor w_col = trce::transpose(tensor);
        RefineResult res = closed_form_refine(w_col, sets, cfg.eta, cfg.ridge);
        if (report) {
            const double denom = frob_norm(w_col);
            report->layers.push_back({name,
                                      denom > 0 ? frob_norm(sub(res.w, w_col)) / denom : 0.0,
                                      res.residual, res.condition, res.ridged});
        }
        tensor = trce::transpose(res.w);
    }
    return out;
}

}  // namespace trce
