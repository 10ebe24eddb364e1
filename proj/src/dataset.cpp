#include "trce/dataset.hpp"

#include <cmath>

#include "trce/errors.hpp"
#include "trce/rng.hpp"

namespace trce {

Tensor render_pattern(const std::string& pattern, int jx, int jy, int image_size) {
    const int s = image_size;
    Tensor img = Tensor::full({1, s * s}, -1.0);
    const double cx = (s - 1) / 2.0 + jx;
    const double cy = (s - 1) / 2.0 + jy;
    const auto set = [&](int y, int x) {
        if (y >= 0 && y < s && x >= 0 && x < s) img.data[static_cast<std::size_t>(y) * s + x] = 1.0;
    };

    if (pattern == "cross") {
        for (int y = -5; y <= 5; ++y)
            for (int x = -1; x <= 0; ++x) set(static_cast<int>(cy) + y, static_cast<int>(cx) + x);
        for (int x = -5; x <= 5; ++x)
            for (int y = -1; y <= 0; ++y) set(static_cast<int>(cy) + y, static_cast<int>(cx) + x);
    } else if (pattern == "circle") {
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const double d = std::hypot(y - cy, x - cx);
                if (std::abs(d - 5.0) <= 1.1) set(y, x);
            }
    } else if (pattern == "square") {
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const double d = std::max(std::abs(y - cy), std::abs(x - cx));
                if (d >= 3.6 && d <= 5.0) set(y, x);
            }
    } else if (pattern == "stripes") {
        for (int y = 0; y < s; ++y) {
            const int phase = ((y - jy) % 4 + 4) % 4;
            if (phase < 2)
                for (int x = 0; x < s; ++x) set(y, x);
        }
    } else {
        throw InvalidArgument("render_pattern: unknown pattern \"" + pattern + "\"");
    }
    return img;
}

SyntheticDataset make_dataset(const Vocabulary& vocab, const DatasetConfig& cfg) {
    SyntheticDataset ds;
    Rng rng(derive_seed(cfg.seed, 0xda7a));
    const int n_templates = static_cast<int>(vocab.templates.size());
    if (n_templates == 0) throw InvalidArgument("make_dataset: vocabulary has no templates");

    for (const auto& [name, entry] : vocab.concepts) {
        const auto forms = entry.surface_forms();
        const int n_forms = static_cast<int>(forms.size());
        for (int i = 0; i < cfg.per_pattern; ++i) {
            const auto& surface = forms[static_cast<std::size_t>(i % n_forms)];
            const std::string& tmpl =
                vocab.templates[static_cast<std::size_t>((i / n_forms) % n_templates)];
            Example ex;
            ex.pattern = name;
            ex.words = apply_template(tmpl, surface);
            const int jx =
                cfg.jitter > 0 ? static_cast<int>(rng.below(2 * cfg.jitter + 1)) - cfg.jitter : 0;
            const int jy =
                cfg.jitter > 0 ? static_cast<int>(rng.below(2 * cfg.jitter + 1)) - cfg.jitter : 0;
            ex.image = render_pattern(name, jx, jy, cfg.image_size);
            for (double& v : ex.image.data) v += cfg.noise_sigma * rng.normal();
            clamp_(ex.image, -1.0, 1.0);
            if (!ex.image.all_finite()) throw Error("make_dataset: non-finite image");
            ds.items.push_back(std::move(ex));
        }
    }
    return ds;
}

}  // namespace trce
