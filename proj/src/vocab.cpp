#include "trce/vocab.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trce/errors.hpp"

namespace trce {

using json = nlohmann::json;

std::vector<std::vector<std::string>> ConceptEntry::surface_forms() const {
    std::vector<std::vector<std::string>> forms;
    forms.push_back({keyword});
    for (const auto& s : synonyms) forms.push_back({s});
    for (const auto& c : circumlocutions) forms.push_back({c[0], c[1]});
    return forms;
}

Vocabulary Vocabulary::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("vocabulary: invalid JSON: ") + e.what());
    }
    Vocabulary v;
    v.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < v.tokens.size(); ++i) {
        if (!v.index.emplace(v.tokens[i], static_cast<int>(i)).second)
            throw ConfigError("vocabulary: duplicate token \"" + v.tokens[i] + "\"");
    }
    if (v.tokens.size() < 2 || v.tokens[0] != "<sot>" || v.tokens[1] != "<eot>")
        throw ConfigError("vocabulary: token 0 must be <sot> and token 1 must be <eot>");

    for (const auto& [name, cj] : j.at("concepts").items()) {
        ConceptEntry e;
        e.kind = cj.at("kind").get<std::string>();
        e.keyword = cj.at("keyword").get<std::string>();
        e.synonyms = cj.value("synonyms", std::vector<std::string>{});
        e.opposite = cj.value("opposite", std::string{});
        for (const auto& pair : cj.value("circumlocutions", json::array())) {
            if (!pair.is_array() || pair.size() != 2)
                throw ConfigError("vocabulary: circumlocutions must be token pairs");
            e.circumlocutions.push_back({pair[0].get<std::string>(), pair[1].get<std::string>()});
        }
        for (const auto& form : e.surface_forms())
            for (const auto& w : form)
                if (!v.contains(w))
                    throw ConfigError("vocabulary: concept \"" + name + "\" uses unknown token \"" +
                                      w + "\"");
        v.concepts.emplace(name, std::move(e));
    }

    v.templates = j.at("templates").get<std::vector<std::string>>();
    for (const auto& t : v.templates) {
        if (t.find("{}") == std::string::npos)
            throw ConfigError("vocabulary: template \"" + t + "\" is missing the {} slot");
        for (const auto& w : apply_template(t, {"<eot>"}))
            if (!v.contains(w))
                throw ConfigError("vocabulary: template uses unknown token \"" + w + "\"");
    }
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

int Vocabulary::id(const std::string& word) const {
    auto it = index.find(word);
    if (it == index.end()) throw UnknownTokenError(word);
    return it->second;
}

const ConceptEntry& Vocabulary::concept_entry(const std::string& name) const {
    auto it = concepts.find(name);
    if (it == concepts.end()) throw InvalidArgument("unknown concept \"" + name + "\"");
    return it->second;
}

TokenSequence tokenize(const std::vector<std::string>& words, const Vocabulary& vocab) {
    if (static_cast<int>(words.size()) > kSeqLen - 2)
        throw InvalidArgument("prompt too long: " + std::to_string(words.size()) +
                              " words, maximum is " + std::to_string(kSeqLen - 2));
    TokenSequence seq;
    seq.word_count = static_cast<int>(words.size());
    seq.ids.reserve(kSeqLen);
    seq.ids.push_back(kSotId);
    for (const auto& w : words) seq.ids.push_back(vocab.id(w));
    while (static_cast<int>(seq.ids.size()) < kSeqLen) seq.ids.push_back(kEotId);
    return seq;
}

std::vector<std::string> split_words(const std::string& prompt) {
    std::vector<std::string> words;
    std::istringstream ss(prompt);
    std::string w;
    while (ss >> w) words.push_back(w);
    return words;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

std::vector<std::string> apply_template(const std::string& tmpl,
                                        const std::vector<std::string>& surface) {
    const auto pos = tmpl.find("{}");
    if (pos == std::string::npos)
        throw InvalidArgument("template \"" + tmpl + "\" has no {} slot");
    std::string filled = tmpl.substr(0, pos) + join_words(surface) + tmpl.substr(pos + 2);
    return split_words(filled);
}

}  // namespace trce
