#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kaleido/core/error.hpp"
#include "kaleido/latents/vocab.hpp"

namespace kaleido::latents {

/// Box corners in normalized [0, 1000] coordinates.
struct BboxParams {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    bool operator==(const BboxParams&) const = default;
};

inline constexpr int kCoordinateRange = 1000;

inline void validate(const BboxParams& b) {
    for (int v : {b.x1, b.y1, b.x2, b.y2})
        require(v >= 0 && v <= kCoordinateRange, "bbox coordinate " + std::to_string(v) + " outside [0, 1000]");
    require(b.x1 <= b.x2, "bbox requires x1 <= x2");
    require(b.y1 <= b.y2, "bbox requires y1 <= y2");
}

/// Tilted ellipse; theta in degrees, [0, 180).
struct BlobParams {
    double xc = 0.0;
    double yc = 0.0;
    double r_major = 1.0;
    double r_minor = 1.0;
    double theta_deg = 0.0;
};

inline void validate(const BlobParams& p) {
    require(std::isfinite(p.xc) && std::isfinite(p.yc) && std::isfinite(p.r_major) && std::isfinite(p.r_minor) &&
                std::isfinite(p.theta_deg),
            "blob parameters must be finite");
    require(p.r_minor > 0.0, "blob requires r_minor > 0");
    require(p.r_major >= p.r_minor, "blob requires r_major >= r_minor");
    require(p.theta_deg >= 0.0 && p.theta_deg < 180.0, "blob orientation must lie in [0, 180)");
}

/// Uniform bins: positions and radii over [0, range], theta over [0, 180).
struct BlobQuantizer {
    int position_bins = 1000;
    int radius_bins = 1000;
    int angle_bins = 180;
    double range = kCoordinateRange;

    void validate() const {
        require(position_bins >= 1 && radius_bins >= 1 && angle_bins >= 1 && range > 0.0,
                "blob quantizer needs positive bin counts and range");
    }
};

struct BlobBins {
    int xc = 0;
    int yc = 0;
    int r_major = 0;
    int r_minor = 0;
    int theta = 0;

    bool operator==(const BlobBins&) const = default;
};

namespace detail {

inline int to_bin(double v, double lo, double hi, int bins) {
    const double u = (v - lo) / (hi - lo) * bins;
    return std::clamp(static_cast<int>(std::floor(u)), 0, bins - 1);
}

inline double bin_center(int bin, double lo, double hi, int bins) { return lo + (bin + 0.5) * (hi - lo) / bins; }

}  // namespace detail

inline BlobBins quantize(const BlobParams& p, const BlobQuantizer& q) {
    validate(p);
    q.validate();
    for (double v : {p.xc, p.yc})
        require(v >= 0.0 && v <= q.range, "blob centre outside [0, " + format_double(q.range) + "]");
    require(p.r_major <= q.range, "blob radius exceeds the coordinate range");
    BlobBins b;
    b.xc = detail::to_bin(p.xc, 0.0, q.range, q.position_bins);
    b.yc = detail::to_bin(p.yc, 0.0, q.range, q.position_bins);
    b.r_major = detail::to_bin(p.r_major, 0.0, q.range, q.radius_bins);
    b.r_minor = detail::to_bin(p.r_minor, 0.0, q.range, q.radius_bins);
    b.theta = detail::to_bin(p.theta_deg, 0.0, 180.0, q.angle_bins);
    return b;
}

inline BlobParams dequantize(const BlobBins& b, const BlobQuantizer& q) {
    q.validate();
    require(b.xc >= 0 && b.xc < q.position_bins && b.yc >= 0 && b.yc < q.position_bins,
            "blob position bin out of range");
    require(b.r_major >= 0 && b.r_major < q.radius_bins && b.r_minor >= 0 && b.r_minor < q.radius_bins,
            "blob radius bin out of range");
    require(b.theta >= 0 && b.theta < q.angle_bins, "blob angle bin out of range");
    require(b.r_minor <= b.r_major, "blob requires r_minor <= r_major");
    BlobParams p;
    p.xc = detail::bin_center(b.xc, 0.0, q.range, q.position_bins);
    p.yc = detail::bin_center(b.yc, 0.0, q.range, q.position_bins);
    p.r_major = detail::bin_center(b.r_major, 0.0, q.range, q.radius_bins);
    p.r_minor = detail::bin_center(b.r_minor, 0.0, q.range, q.radius_bins);
    p.theta_deg = detail::bin_center(b.theta, 0.0, 180.0, q.angle_bins);
    return p;
}

// Segment codecs. Numbers are spelled with digit tokens and separated by ','.

namespace detail {

inline void append_number(const LatentVocab& vocab, int value, std::vector<TokenId>& out) {
    require(value >= 0, "encoded numbers must be non-negative");
    const std::string digits = std::to_string(value);
    for (char ch : digits) out.push_back(vocab.digit(ch - '0'));
}

inline std::vector<TokenId> encode_numbers(const LatentVocab& vocab, std::span<const int> values) {
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(vocab.comma());
        append_number(vocab, values[i], out);
    }
    return out;
}

/// Exactly `count` comma-separated canonical numbers (no leading zeros, at most 4 digits).
inline std::vector<int> decode_numbers(const LatentVocab& vocab, std::span<const TokenId> tokens, int count) {
    std::vector<int> values;
    std::size_t i = 0;
    for (int k = 0; k < count; ++k) {
        if (k) {
            require(i < tokens.size() && tokens[i] == vocab.comma(), "expected ',' between numbers");
            ++i;
        }
        const std::size_t start = i;
        int value = 0;
        while (i < tokens.size() && vocab.valid_id(tokens[i]) && vocab.digit_value(tokens[i]) >= 0) {
            value = value * 10 + vocab.digit_value(tokens[i]);
            ++i;
            require(i - start <= 4, "number has more than 4 digits");
        }
        require(i > start, "expected a number");
        require(i - start == 1 || vocab.digit_value(tokens[start]) != 0, "number has a leading zero");
        values.push_back(value);
    }
    require(i == tokens.size(), "unexpected tokens after the last number");
    return values;
}

}  // namespace detail

inline std::vector<TokenId> encode_bbox(const LatentVocab& vocab, const BboxParams& b) {
    validate(b);
    const int values[] = {b.x1, b.y1, b.x2, b.y2};
    return detail::encode_numbers(vocab, values);
}

inline BboxParams decode_bbox(const LatentVocab& vocab, std::span<const TokenId> tokens) {
    const auto v = detail::decode_numbers(vocab, tokens, 4);
    BboxParams b{v[0], v[1], v[2], v[3]};
    validate(b);
    return b;
}

inline std::vector<TokenId> encode_blob(const LatentVocab& vocab, const BlobParams& p, const BlobQuantizer& q) {
    const auto b = quantize(p, q);
    const int values[] = {b.xc, b.yc, b.r_major, b.r_minor, b.theta};
    return detail::encode_numbers(vocab, values);
}

inline BlobBins decode_blob_bins(const LatentVocab& vocab, std::span<const TokenId> tokens, const BlobQuantizer& q) {
    const auto v = detail::decode_numbers(vocab, tokens, 5);
    BlobBins b{v[0], v[1], v[2], v[3], v[4]};
    dequantize(b, q);
    return b;
}

inline BlobParams decode_blob(const LatentVocab& vocab, std::span<const TokenId> tokens, const BlobQuantizer& q) {
    return dequantize(decode_blob_bins(vocab, tokens, q), q);
}

/// Codebook ids joined by '#'.
inline std::vector<TokenId> encode_voken_ids(const LatentVocab& vocab, std::span<const int> ids) {
    require(!ids.empty(), "voken sequence needs at least one id");
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(LatentVocab::kDelimiter);
        require(ids[i] >= 0 && ids[i] < vocab.spec().codebook_size,
                "voken id " + std::to_string(ids[i]) + " >= codebook size");
        out.push_back(vocab.voken(ids[i]));
    }
    return out;
}

/// `expected` = 0 accepts any positive count.
inline std::vector<int> decode_voken_ids(const LatentVocab& vocab, std::span<const TokenId> tokens, int expected = 0) {
    std::vector<int> ids;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i % 2 == 1) {
            require(tokens[i] == LatentVocab::kDelimiter, "expected '#' between vokens");
            continue;
        }
        const int id = vocab.valid_id(tokens[i]) ? vocab.voken_of(tokens[i]) : -1;
        require(id >= 0, "expected a voken token");
        ids.push_back(id);
    }
    require(!ids.empty() && tokens.size() % 2 == 1, "voken segment must start and end with a voken");
    require(expected == 0 || static_cast<int>(ids.size()) == expected,
            "expected " + std::to_string(expected) + " vokens, found " + std::to_string(ids.size()));
    return ids;
}

/// Shape constraints that a sequence must satisfy beyond token membership.
struct GrammarSpec {
    int voken_count = 4;
    BlobQuantizer quantizer;
};

struct ParsedLatent {
    Scheme scheme = Scheme::text;
    int class_id = -1;  // text segment
    int mode_id = -1;
    std::optional<BboxParams> bbox;
    std::optional<BlobBins> blob;
    std::vector<int> vokens;
};

/// Parses a full sequence (payload followed by <eos>). Throws ContractViolation
/// describing the first grammar violation.
inline ParsedLatent parse_latent(const LatentVocab& vocab, const LatentSequence& seq, const GrammarSpec& grammar) {
    require(seq.scheme == vocab.scheme(), "sequence scheme " + to_string(seq.scheme) + " does not match vocabulary " +
                                              to_string(vocab.scheme()));
    require(!seq.tokens.empty() && seq.tokens.back() == LatentVocab::kEos, "sequence must end with <eos>");
    const auto payload = seq.payload();
    for (TokenId t : payload) {
        require(vocab.valid_id(t), "token id " + std::to_string(t) + " outside vocabulary");
        require(t != LatentVocab::kBos && t != LatentVocab::kEos, "<bos>/<eos> inside the payload");
    }
    ParsedLatent out;
    out.scheme = seq.scheme;
    auto parse_text = [&](std::span<const TokenId> seg) {
        require(seg.size() == 1, "text segment must be exactly one mode token");
        const auto [c, m] = vocab.mode_of(seg[0]);
        require(c >= 0, "expected a mode token");
        out.class_id = c;
        out.mode_id = m;
    };
    switch (seq.scheme) {
        case Scheme::text: parse_text(payload); break;
        case Scheme::bbox: out.bbox = decode_bbox(vocab, payload); break;
        case Scheme::blob: out.blob = decode_blob_bins(vocab, payload, grammar.quantizer); break;
        case Scheme::voken: out.vokens = decode_voken_ids(vocab, payload, grammar.voken_count); break;
        case Scheme::combined: {
            std::vector<std::size_t> bars;
            for (std::size_t i = 0; i < payload.size(); ++i)
                if (payload[i] == vocab.bar()) bars.push_back(i);
            require(bars.size() == 2, "combined sequence needs exactly two '|' separators");
            parse_text(payload.subspan(0, bars[0]));
            out.bbox = decode_bbox(vocab, payload.subspan(bars[0] + 1, bars[1] - bars[0] - 1));
            out.vokens = decode_voken_ids(vocab, payload.subspan(bars[1] + 1), grammar.voken_count);
            break;
        }
    }
    return out;
}

inline bool is_valid(const LatentVocab& vocab, const LatentSequence& seq, const GrammarSpec& grammar) {
    try {
        parse_latent(vocab, seq, grammar);
        return true;
    } catch (const ContractViolation&) {
        return false;
    }
}

/// Inverse of parse_latent.
inline LatentSequence encode_latent(const LatentVocab& vocab, const ParsedLatent& p, const GrammarSpec& grammar) {
    LatentSequence seq;
    seq.scheme = p.scheme;
    auto& t = seq.tokens;
    auto append = [&](const std::vector<TokenId>& seg) { t.insert(t.end(), seg.begin(), seg.end()); };
    auto bbox = [&] {
        require(p.bbox.has_value(), "latent is missing its bbox segment");
        append(encode_bbox(vocab, *p.bbox));
    };
    auto vokens = [&] {
        require(static_cast<int>(p.vokens.size()) == grammar.voken_count, "wrong voken count");
        append(encode_voken_ids(vocab, p.vokens));
    };
    switch (p.scheme) {
        case Scheme::text: t.push_back(vocab.mode(p.class_id, p.mode_id)); break;
        case Scheme::bbox: bbox(); break;
        case Scheme::blob: {
            require(p.blob.has_value(), "latent is missing its blob segment");
            const auto& b = *p.blob;
            dequantize(b, grammar.quantizer);
            const int values[] = {b.xc, b.yc, b.r_major, b.r_minor, b.theta};
            append(detail::encode_numbers(vocab, values));
            break;
        }
        case Scheme::voken: vokens(); break;
        case Scheme::combined:
            t.push_back(vocab.mode(p.class_id, p.mode_id));
            t.push_back(vocab.bar());
            bbox();
            t.push_back(vocab.bar());
            vokens();
            break;
    }
    t.push_back(LatentVocab::kEos);
    return seq;
}

}  // namespace kaleido::latents
