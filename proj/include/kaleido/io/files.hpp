#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/io.hpp"
#include "kaleido/data/gmm.hpp"
#include "kaleido/latents/grammar.hpp"
#include "kaleido/latents/vocab.hpp"

namespace kaleido::io {

/// Sample dump: chain_id,dim_0..dim_{d-1},assigned_mode,conditioned_latent.
/// assigned_mode is empty without a GMM; conditioned_latent is empty for the baseline.
inline std::string samples_to_csv(const Eigen::MatrixXd& x, const data::GmmSpec* gmm,
                                  const latents::LatentVocab* vocab = nullptr,
                                  std::span<const latents::LatentSequence> zs = {}) {
    require(x.cols() > 0, "no samples to write");
    require(zs.empty() || static_cast<Eigen::Index>(zs.size()) == x.cols(), "one latent per sample required");
    std::string out = "chain_id";
    for (Eigen::Index j = 0; j < x.rows(); ++j) out += ",dim_" + std::to_string(j);
    out += ",assigned_mode,conditioned_latent\n";
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        out += std::to_string(i);
        for (Eigen::Index j = 0; j < x.rows(); ++j) out += ',' + format_double(x(j, i));
        out += ',';
        if (gmm) {
            const int k = data::assign_mode(x.col(i), *gmm);
            out += data::mode_name(gmm->at(k).class_id, gmm->at(k).mode_id);
        }
        out += ',';
        if (!zs.empty()) out += latents::to_surface(*vocab, zs[static_cast<std::size_t>(i)]);
        out += '\n';
    }
    return out;
}

/// Reads back only the coordinates (d x n).
inline Eigen::MatrixXd samples_from_csv(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw IoError("sample file is empty");
    const auto header = split(lines.front(), ',');
    if (header.size() < 4 || header.front() != "chain_id" || header[header.size() - 2] != "assigned_mode")
        throw IoError("sample header must be chain_id,dim_0..,assigned_mode,conditioned_latent");
    const std::size_t d = header.size() - 3;
    std::vector<std::vector<double>> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto f = split(lines[li], ',');
        if (f.size() != header.size())
            throw IoError("sample line " + std::to_string(li + 1) + " has " + std::to_string(f.size()) + " fields");
        std::vector<double> r(d);
        for (std::size_t j = 0; j < d; ++j) r[j] = parse_double(f[1 + j], "dim");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw IoError("sample file has no rows");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][j];
    return x;
}

/// Latent file: "sample_id scheme tok tok ...", one line per sample, EOS omitted.
inline std::string latents_to_text(const latents::LatentVocab& vocab, std::span<const latents::LatentSequence> zs) {
    std::string out;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        out += std::to_string(i) + ' ' + latents::to_string(zs[i].scheme);
        for (int t : zs[i].payload()) out += ' ' + vocab.surface(t);
        out += '\n';
    }
    return out;
}

/// Parses and grammar-checks a latent file. Every bad line is reported in one
/// ContractViolation; nothing is repaired.
inline std::vector<latents::LatentSequence> latents_from_text(const std::string& text, const latents::LatentVocab& vocab,
                                                              const latents::GrammarSpec& grammar) {
    std::vector<latents::LatentSequence> out;
    std::string bad;
    auto complain = [&](std::size_t line, const std::string& why) {
        bad += (bad.empty() ? "" : "; ") + std::string("line ") + std::to_string(line) + ": " + why;
    };
    const auto lines = split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const auto& line = lines[li];
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> f;
        for (auto& w : split(line, ' '))
            if (!w.empty() && w != "\r") f.push_back(w);
        if (!f.empty() && f.back().ends_with('\r')) f.back().pop_back();
        if (f.size() < 2) {
            complain(li + 1, "expected 'sample_id scheme tokens...'");
            continue;
        }
        try {
            if (static_cast<std::size_t>(parse_int(f[0], "sample_id")) != out.size())
                throw ContractViolation("sample_id " + f[0] + " out of sequence, expected " + std::to_string(out.size()));
            const auto scheme = latents::scheme_from_string(f[1]);
            if (scheme != vocab.scheme())
                throw ContractViolation("scheme " + f[1] + " does not match model scheme " +
                                        latents::to_string(vocab.scheme()));
            std::string surface;
            for (std::size_t k = 2; k < f.size(); ++k) surface += (k > 2 ? " " : "") + f[k];
            auto seq = latents::from_surface(vocab, surface);
            latents::parse_latent(vocab, seq, grammar);
            out.push_back(std::move(seq));
        } catch (const std::exception& e) {
            complain(li + 1, e.what());
            out.emplace_back();  // keep numbering aligned for later lines
        }
    }
    if (!bad.empty()) throw ContractViolation("invalid latent file: " + bad);
    if (out.empty()) throw ContractViolation("latent file has no entries");
    return out;
}

/// Human-readable rendering of a latent: mode names and decoded geometry.
inline std::string describe_latent(const latents::LatentVocab& vocab, const latents::LatentSequence& z,
                                   const latents::GrammarSpec& grammar) {
    const auto p = latents::parse_latent(vocab, z, grammar);
    std::string s;
    if (p.class_id >= 0) s += "mode=" + data::mode_name(p.class_id, p.mode_id);
    if (p.bbox) {
        const auto& b = *p.bbox;
        s += std::string(s.empty() ? "" : " ") + "bbox=(" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "," +
             std::to_string(b.x2) + "," + std::to_string(b.y2) + ")";
    }
    if (p.blob) {
        const auto b = latents::dequantize(*p.blob, grammar.quantizer);
        s += std::string(s.empty() ? "" : " ") + "blob=(xc=" + format_double(b.xc) + ",yc=" + format_double(b.yc) +
             ",r_major=" + format_double(b.r_major) + ",r_minor=" + format_double(b.r_minor) +
             ",theta=" + format_double(b.theta_deg) + ")";
    }
    if (!p.vokens.empty()) {
        s += std::string(s.empty() ? "" : " ") + "vokens=[";
        for (std::size_t i = 0; i < p.vokens.size(); ++i) s += (i ? "," : "") + std::to_string(p.vokens[i]);
        s += "]";
    }
    return s;
}

}  // namespace kaleido::io
