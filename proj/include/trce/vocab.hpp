#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace trce {

inline constexpr int kSeqLen = 16;  // fixed N for every prompt
inline constexpr int kSotId = 0;
inline constexpr int kEotId = 1;

// One concept of the lexicon: a keyword, its synonyms, two-token
// circumlocutions, and (for malicious concepts) the opposite safe concept.
struct ConceptEntry {
    std::string kind;  // "malicious" | "safe" | "neutral"
    std::string keyword;
    std::vector<std::string> synonyms;
    std::vector<std::array<std::string, 2>> circumlocutions;
    std::string opposite;

    // keyword, then synonyms, then circumlocutions
    std::vector<std::vector<std::string>> surface_forms() const;
};

struct Vocabulary {
    std::vector<std::string> tokens;  // position = token id
    std::map<std::string, int> index;
    std::map<std::string, ConceptEntry> concepts;
    std::vector<std::string> templates;  // each contains one "{}" slot

    static Vocabulary load(const std::string& path);
    static Vocabulary from_json_text(const std::string& text);

    int id(const std::string& word) const;
    bool contains(const std::string& word) const { return index.count(word) > 0; }
    int size() const { return static_cast<int>(tokens.size()); }
    const ConceptEntry& concept_entry(const std::string& name) const;
};

// [SOT, words..., EOT x (N-1-l)]
struct TokenSequence {
    std::vector<int> ids;
    int word_count = 0;
};

TokenSequence tokenize(const std::vector<std::string>& words, const Vocabulary& vocab);

std::vector<std::string> split_words(const std::string& prompt);
std::string join_words(const std::vector<std::string>& words);

// Substitutes the template's "{}" slot with a (possibly multi-token) surface
// form. Throws InvalidArgument when the slot is missing.
std::vector<std::string> apply_template(const std::string& tmpl,
                                        const std::vector<std::string>& surface);

}  // namespace trce
