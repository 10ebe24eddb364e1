#include "trce/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "trce/errors.hpp"
#include "trce/rng.hpp"

namespace trce {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- arch ---

namespace {

void push_resblock(std::vector<ParamSpec>& out, const std::string& prefix, int c, int temb) {
    out.push_back({prefix + ".n1.g", {c}, ParamSpec::Init::Ones});
    out.push_back({prefix + ".n1.b", {c}, ParamSpec::Init::Zeros});
    out.push_back({prefix + ".c1.w", {c, c * 9}, ParamSpec::Init::Xavier});
    out.push_back({prefix + ".c1.b", {c}, ParamSpec::Init::Zeros});
    out.push_back({prefix + ".t.w", {temb, c}, ParamSpec::Init::Xavier});
    out.push_back({prefix + ".t.b", {c}, ParamSpec::Init::Zeros});
    out.push_back({prefix + ".n2.g", {c}, ParamSpec::Init::Ones});
    out.push_back({prefix + ".n2.b", {c}, ParamSpec::Init::Zeros});
    out.push_back({prefix + ".c2.w", {c, c * 9}, ParamSpec::Init::Xavier});
    out.push_back({prefix + ".c2.b", {c}, ParamSpec::Init::Zeros});
}

void push_attention(std::vector<ParamSpec>& out, const std::string& prefix, int c, int ctx,
                    int d) {
    out.push_back({prefix + ".norm.g", {c}, ParamSpec::Init::Ones});
    out.push_back({prefix + ".norm.b", {c}, ParamSpec::Init::Zeros});
    out.push_back({prefix + ".wq", {c, d}, ParamSpec::Init::Xavier});
    out.push_back({prefix + ".wk", {ctx, d}, ParamSpec::Init::Xavier});
    out.push_back({prefix + ".wv", {ctx, d}, ParamSpec::Init::Xavier});
    out.push_back({prefix + ".wo", {d, c}, ParamSpec::Init::Xavier});
    out.push_back({prefix + ".bo", {c}, ParamSpec::Init::Zeros});
}

}  // namespace

std::vector<ParamSpec> expected_params(const ModelArch& arch) {
    std::vector<ParamSpec> out;
    const TextArch& te = arch.text;
    const DenoiserArch& dn = arch.den;

    out.push_back({"te.tok_emb", {te.vocab_size, te.dim}, ParamSpec::Init::Normal02});
    out.push_back({"te.pos_emb", {te.seq_len, te.dim}, ParamSpec::Init::Normal02});
    for (int b = 0; b < te.blocks; ++b) {
        const std::string p = "te.b" + std::to_string(b);
        out.push_back({p + ".ln1.g", {te.dim}, ParamSpec::Init::Ones});
        out.push_back({p + ".ln1.b", {te.dim}, ParamSpec::Init::Zeros});
        out.push_back({p + ".wq", {te.dim, te.dim}, ParamSpec::Init::Xavier});
        out.push_back({p + ".wk", {te.dim, te.dim}, ParamSpec::Init::Xavier});
        out.push_back({p + ".wv", {te.dim, te.dim}, ParamSpec::Init::Xavier});
        out.push_back({p + ".wo", {te.dim, te.dim}, ParamSpec::Init::Xavier});
        out.push_back({p + ".bo", {te.dim}, ParamSpec::Init::Zeros});
        out.push_back({p + ".ln2.g", {te.dim}, ParamSpec::Init::Ones});
        out.push_back({p + ".ln2.b", {te.dim}, ParamSpec::Init::Zeros});
        out.push_back({p + ".mlp.w1", {te.dim, 2 * te.dim}, ParamSpec::Init::Xavier});
        out.push_back({p + ".mlp.b1", {2 * te.dim}, ParamSpec::Init::Zeros});
        out.push_back({p + ".mlp.w2", {2 * te.dim, te.dim}, ParamSpec::Init::Xavier});
        out.push_back({p + ".mlp.b2", {te.dim}, ParamSpec::Init::Zeros});
    }
    out.push_back({"te.lnf.g", {te.dim}, ParamSpec::Init::Ones});
    out.push_back({"te.lnf.b", {te.dim}, ParamSpec::Init::Zeros});

    const int sin_dim = dn.temb_dim / 2;
    out.push_back({"un.temb.w1", {sin_dim, dn.temb_dim}, ParamSpec::Init::Xavier});
    out.push_back({"un.temb.b1", {dn.temb_dim}, ParamSpec::Init::Zeros});
    out.push_back({"un.temb.w2", {dn.temb_dim, dn.temb_dim}, ParamSpec::Init::Xavier});
    out.push_back({"un.temb.b2", {dn.temb_dim}, ParamSpec::Init::Zeros});

    out.push_back({"un.conv_in.w", {dn.c1, 9}, ParamSpec::Init::Xavier});
    out.push_back({"un.conv_in.b", {dn.c1}, ParamSpec::Init::Zeros});
    out.push_back({"un.down.ds.w", {dn.c2, dn.c1 * 9}, ParamSpec::Init::Xavier});
    out.push_back({"un.down.ds.b", {dn.c2}, ParamSpec::Init::Zeros});
    push_resblock(out, "un.down.res", dn.c2, dn.temb_dim);
    push_attention(out, "un.down.xattn", dn.c2, te.dim, dn.attn_dim);
    push_resblock(out, "un.mid.res", dn.c2, dn.temb_dim);
    push_attention(out, "un.mid.sattn", dn.c2, dn.c2, dn.attn_dim);
    push_attention(out, "un.mid.xattn", dn.c2, te.dim, dn.attn_dim);
    out.push_back({"un.up.conv.w", {dn.c1, dn.c2 * 9}, ParamSpec::Init::Xavier});
    out.push_back({"un.up.conv.b", {dn.c1}, ParamSpec::Init::Zeros});
    push_resblock(out, "un.up.res", dn.c1, dn.temb_dim);
    out.push_back({"un.out.norm.g", {dn.c1}, ParamSpec::Init::Ones});
    out.push_back({"un.out.norm.b", {dn.c1}, ParamSpec::Init::Zeros});
    out.push_back({"un.out.w", {1, dn.c1 * 9}, ParamSpec::Init::Zeros});
    out.push_back({"un.out.b", {1}, ParamSpec::Init::Zeros});
    return out;
}

bool is_cross_attention_kv(const std::string& name) {
    return name.find(".xattn.wk") != std::string::npos ||
           name.find(".xattn.wv") != std::string::npos;
}

bool is_visual_layer(const std::string& name) {
    if (name.rfind("un.", 0) != 0) return false;
    if (name.find(".sattn.") != std::string::npos) return true;
    return name.size() >= 9 && name.compare(name.size() - 9, 9, ".xattn.wq") == 0;
}

bool is_encoder_param(const std::string& name) { return name.rfind("te.", 0) == 0; }

// ----------------------------------------------------------- container ---

namespace {

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in)
        throw CheckpointError(CheckpointError::Kind::Truncated, "container: unexpected end of file");
    return v;
}

}  // namespace

void save_container(const Container& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write("TRCE", 4);
    write_pod<std::uint16_t>(out, c.version);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.entries.size()));
    for (const auto& [name, t] : c.entries) {
        write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint8_t>(out, 0);  // dtype: f64
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
        for (int d : t.shape) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(c.json_text.size()));
    out.write(c.json_text.data(), static_cast<std::streamsize>(c.json_text.size()));
    if (!out) throw IoError("write failed: " + path);
}

Container load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TRCE", 4) != 0)
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "container: bad magic bytes in " + path);
    Container c;
    c.version = read_pod<std::uint16_t>(in);
    if (c.version != kContainerVersion)
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "container: version " + std::to_string(c.version) +
                                  ", this build reads version " +
                                  std::to_string(kContainerVersion));
    const auto count = read_pod<std::uint32_t>(in);
    c.entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in)
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  "container: unexpected end of file");
        const auto dtype = read_pod<std::uint8_t>(in);
        if (dtype != 0)
            throw CheckpointError(CheckpointError::Kind::BadVersion,
                                  "container: unsupported dtype code " + std::to_string(dtype));
        const auto rank = read_pod<std::uint8_t>(in);
        if (rank > 8)
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "container: implausible rank " + std::to_string(rank));
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_pod<std::uint32_t>(in));
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in)
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  "container: unexpected end of file in entry \"" + name + "\"");
        c.entries.emplace_back(std::move(name), std::move(t));
    }
    const auto json_len = read_pod<std::uint64_t>(in);
    c.json_text.resize(json_len);
    in.read(c.json_text.data(), static_cast<std::streamsize>(json_len));
    if (!in)
        throw CheckpointError(CheckpointError::Kind::Truncated,
                              "container: descriptor block truncated");
    return c;
}

// ----------------------------------------------------------- checkpoint ---

ModelCheckpoint init_model(const ModelArch& arch, const NoiseSchedule& schedule,
                           std::uint64_t seed) {
    ModelCheckpoint cp;
    cp.arch = arch;
    cp.schedule = schedule;
    cp.provenance = "init";
    Rng rng(derive_seed(seed, 0x1217));
    for (const ParamSpec& spec : expected_params(arch)) {
        Tensor t(spec.shape);
        switch (spec.init) {
            case ParamSpec::Init::Normal02:
                rng.fill_normal(t, 0.2);
                break;
            case ParamSpec::Init::Xavier: {
                const int fan_in = spec.shape.size() == 2 ? spec.shape[0] : spec.shape.back();
                rng.fill_normal(t, 1.0 / std::sqrt(static_cast<double>(fan_in)));
                break;
            }
            case ParamSpec::Init::Ones:
                std::fill(t.data.begin(), t.data.end(), 1.0);
                break;
            case ParamSpec::Init::Zeros:
                break;
        }
        cp.tensors.emplace(spec.name, std::move(t));
    }
    return cp;
}

void validate_checkpoint(const ModelCheckpoint& cp) {
    for (const ParamSpec& spec : expected_params(cp.arch)) {
        auto it = cp.tensors.find(spec.name);
        if (it == cp.tensors.end())
            throw CheckpointError(CheckpointError::Kind::MissingTensor,
                                  "checkpoint: missing tensor \"" + spec.name + "\"");
        if (it->second.shape != spec.shape)
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "checkpoint: tensor \"" + spec.name + "\" has shape " +
                                      shape_str(it->second.shape) + ", expected " +
                                      shape_str(spec.shape));
        if (!it->second.all_finite())
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "checkpoint: tensor \"" + spec.name + "\" has non-finite values");
    }
}

void save_checkpoint(const ModelCheckpoint& cp, const std::string& path) {
    Container c;
    for (const auto& [name, t] : cp.tensors) c.entries.emplace_back(name, t);
    json j;
    j["kind"] = "checkpoint";
    j["provenance"] = cp.provenance;
    j["arch"] = {
        {"text",
         {{"vocab_size", cp.arch.text.vocab_size},
          {"dim", cp.arch.text.dim},
          {"blocks", cp.arch.text.blocks},
          {"heads", cp.arch.text.heads},
          {"seq_len", cp.arch.text.seq_len}}},
        {"den",
         {{"image_size", cp.arch.den.image_size},
          {"c1", cp.arch.den.c1},
          {"c2", cp.arch.den.c2},
          {"attn_dim", cp.arch.den.attn_dim},
          {"temb_dim", cp.arch.den.temb_dim},
          {"groups", cp.arch.den.groups}}},
    };
    j["schedule"] = {{"timesteps", cp.schedule.timesteps},
                     {"beta_start", cp.schedule.beta_start},
                     {"beta_end", cp.schedule.beta_end}};
    c.json_text = j.dump();
    save_container(c, path);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
    Container c = load_container(path);
    json j;
    try {
        j = json::parse(c.json_text);
    } catch (const json::parse_error& e) {
        throw CheckpointError(CheckpointError::Kind::Truncated,
                              std::string("checkpoint: bad descriptor JSON: ") + e.what());
    }
    if (j.value("kind", "") != "checkpoint")
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "container at " + path + " is not a model checkpoint");
    ModelCheckpoint cp;
    cp.provenance = j.at("provenance").get<std::string>();
    const auto& ta = j.at("arch").at("text");
    cp.arch.text = {ta.at("vocab_size").get<int>(), ta.at("dim").get<int>(),
                    ta.at("blocks").get<int>(), ta.at("heads").get<int>(),
                    ta.at("seq_len").get<int>()};
    const auto& da = j.at("arch").at("den");
    cp.arch.den = {da.at("image_size").get<int>(), da.at("c1").get<int>(), da.at("c2").get<int>(),
                   da.at("attn_dim").get<int>(),   da.at("temb_dim").get<int>(),
                   da.at("groups").get<int>()};
    const auto& sj = j.at("schedule");
    cp.schedule = NoiseSchedule::linear(sj.at("timesteps").get<int>(),
                                        sj.at("beta_start").get<double>(),
                                        sj.at("beta_end").get<double>());
    for (auto& [name, t] : c.entries) cp.tensors.emplace(std::move(name), std::move(t));
    validate_checkpoint(cp);
    return cp;
}

}  // namespace trce
