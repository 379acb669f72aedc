#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kaleido/core/error.hpp"
#include "kaleido/core/io.hpp"

namespace kaleido::latents {

enum class Scheme { text, bbox, blob, voken, combined };

inline std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::text: return "text";
        case Scheme::bbox: return "bbox";
        case Scheme::blob: return "blob";
        case Scheme::voken: return "voken";
        case Scheme::combined: return "combined";
    }
    return "text";
}

inline Scheme scheme_from_string(std::string_view s) {
    if (s == "text") return Scheme::text;
    if (s == "bbox") return Scheme::bbox;
    if (s == "blob") return Scheme::blob;
    if (s == "voken") return Scheme::voken;
    if (s == "combined") return Scheme::combined;
    throw ContractViolation("unknown latent scheme '" + std::string(s) + "'");
}

using TokenId = int;

struct VocabSpec {
    Scheme scheme = Scheme::text;
    int num_classes = 2;
    int modes_per_class = 2;
    int codebook_size = 16;
};

/// Token alphabet of one latent scheme. Ids 0..2 are always <bos>, <eos>
/// and the '#' delimiter; payload tokens follow in a fixed order.
class LatentVocab {
public:
    static constexpr TokenId kBos = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kDelimiter = 2;

    static LatentVocab build(const VocabSpec& spec) {
        require(spec.num_classes >= 1 && spec.modes_per_class >= 1 && spec.modes_per_class <= 26,
                "vocabulary needs at least one class and 1..26 modes per class");
        LatentVocab v;
        v.spec_ = spec;
        v.add("<bos>");
        v.add("<eos>");
        v.add("#");
        const bool text = spec.scheme == Scheme::text || spec.scheme == Scheme::combined;
        const bool numeric =
            spec.scheme == Scheme::bbox || spec.scheme == Scheme::blob || spec.scheme == Scheme::combined;
        const bool voken = spec.scheme == Scheme::voken || spec.scheme == Scheme::combined;
        if (spec.scheme == Scheme::combined) v.add("|");
        if (text)
            for (int c = 0; c < spec.num_classes; ++c)
                for (int m = 0; m < spec.modes_per_class; ++m)
                    v.add("mode_" + std::to_string(c) + static_cast<char>('A' + m));
        if (numeric) {
            v.add(",");
            for (char d = '0'; d <= '9'; ++d) v.add(std::string(1, d));
        }
        if (voken) {
            require(spec.codebook_size >= 1, "voken vocabulary needs a non-empty codebook");
            for (int i = 0; i < spec.codebook_size; ++i) v.add("v" + std::to_string(i));
        }
        return v;
    }

    const VocabSpec& spec() const { return spec_; }
    Scheme scheme() const { return spec_.scheme; }
    int size() const { return static_cast<int>(surfaces_.size()); }

    bool contains(std::string_view surface) const { return index_.count(std::string(surface)) != 0; }
    bool valid_id(TokenId id) const { return id >= 0 && id < size(); }

    TokenId id(std::string_view surface) const {
        const auto it = index_.find(std::string(surface));
        if (it == index_.end()) throw ContractViolation("unknown token '" + std::string(surface) + "'");
        return it->second;
    }

    const std::string& surface(TokenId id) const {
        require(valid_id(id), "token id " + std::to_string(id) + " outside vocabulary");
        return surfaces_[static_cast<std::size_t>(id)];
    }

    TokenId comma() const { return id(","); }
    TokenId bar() const { return id("|"); }
    TokenId digit(int d) const { return id(std::string(1, static_cast<char>('0' + d))); }
    TokenId mode(int class_id, int mode_id) const {
        return id("mode_" + std::to_string(class_id) + static_cast<char>('A' + mode_id));
    }
    TokenId voken(int code) const { return id("v" + std::to_string(code)); }

    /// Digit value of a token, or -1.
    int digit_value(TokenId id) const {
        const auto& s = surface(id);
        return s.size() == 1 && s[0] >= '0' && s[0] <= '9' ? s[0] - '0' : -1;
    }

    /// (class, mode) named by a mode token, or {-1, -1}.
    std::pair<int, int> mode_of(TokenId id) const {
        const auto& s = surface(id);
        if (s.rfind("mode_", 0) != 0 || s.size() < 7) return {-1, -1};
        const std::string cls = s.substr(5, s.size() - 6);
        for (char ch : cls)
            if (ch < '0' || ch > '9') return {-1, -1};
        return {std::stoi(cls), s.back() - 'A'};
    }

    /// Codebook index named by a voken token, or -1.
    int voken_of(TokenId id) const {
        const auto& s = surface(id);
        if (s.size() < 2 || s[0] != 'v') return -1;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] < '0' || s[i] > '9') return -1;
        return std::stoi(s.substr(1));
    }

private:
    void add(std::string surface) {
        index_.emplace(surface, static_cast<TokenId>(surfaces_.size()));
        surfaces_.push_back(std::move(surface));
    }

    VocabSpec spec_;
    std::vector<std::string> surfaces_;
    std::unordered_map<std::string, TokenId> index_;
};

/// z_1..z_N of one sample; the last token is <eos>, <bos> is implicit.
struct LatentSequence {
    Scheme scheme = Scheme::text;
    std::vector<TokenId> tokens;

    bool operator==(const LatentSequence&) const = default;

    std::span<const TokenId> payload() const {
        const std::size_t n = !tokens.empty() && tokens.back() == LatentVocab::kEos ? tokens.size() - 1 : tokens.size();
        return {tokens.data(), n};
    }
};

/// Space-separated surface forms, e.g. "mode_1B <eos>".
inline std::string to_surface(const LatentVocab& vocab, const LatentSequence& seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        if (i) out += ' ';
        out += vocab.surface(seq.tokens[i]);
    }
    return out;
}

/// Inverse of to_surface; a missing trailing <eos> is appended.
inline LatentSequence from_surface(const LatentVocab& vocab, std::string_view text) {
    LatentSequence seq;
    seq.scheme = vocab.scheme();
    for (const auto& word : split(text, ' ')) {
        if (word.empty()) continue;
        seq.tokens.push_back(vocab.id(word));
    }
    if (seq.tokens.empty() || seq.tokens.back() != LatentVocab::kEos) seq.tokens.push_back(LatentVocab::kEos);
    return seq;
}

}  // namespace kaleido::latents
