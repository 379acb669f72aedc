#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/data/canvas.hpp"
#include "kaleido/data/gmm.hpp"
#include "kaleido/latents/codebook.hpp"
#include "kaleido/latents/extract.hpp"
#include "kaleido/train/config.hpp"

namespace kaleido::train {

struct Dataset {
    DataConfig config;
    std::vector<data::LabeledSample> samples;
    std::optional<data::GmmSpec> gmm;
    std::optional<data::CanvasSpec> canvas;
};

inline Dataset make_dataset(const DataConfig& cfg, std::uint64_t seed) {
    require(cfg.n >= 1, "dataset size n must be >= 1");
    Dataset d{cfg, {}, {}, {}};
    if (cfg.kind == DatasetKind::gmm) {
        d.gmm = data::toy_gmm_default(cfg.weights);
        d.samples = data::sample_dataset(*d.gmm, cfg.n, seed);
    } else {
        d.canvas = cfg.canvas;
        d.samples = data::sample_canvas_dataset(cfg.canvas, cfg.n, seed);
    }
    return d;
}

/// Rebuilds the generating spec of a dataset loaded from disk.
inline Dataset attach_spec(const DataConfig& cfg, std::vector<data::LabeledSample> samples) {
    Dataset d{cfg, std::move(samples), {}, {}};
    if (cfg.kind == DatasetKind::gmm)
        d.gmm = data::toy_gmm_default(cfg.weights);
    else
        d.canvas = cfg.canvas;
    return d;
}

/// Vocabulary, grammar and (for voken schemes) a k-means codebook fit on the
/// dataset's chunks.
inline latents::LatentContext make_latent_context(const Dataset& d, std::uint64_t seed) {
    const auto& cfg = d.config;
    const bool canvas = cfg.kind == DatasetKind::canvas;
    const auto s = cfg.scheme;
    require(canvas || s == latents::Scheme::text || s == latents::Scheme::voken,
            "GMM data supports only the text and voken schemes, got " + latents::to_string(s));
    latents::LatentContext ctx;
    latents::VocabSpec vs;
    vs.scheme = s;
    vs.num_classes = 2;
    vs.modes_per_class = 2;
    vs.codebook_size = cfg.codebook_size;
    ctx.vocab = latents::LatentVocab::build(vs);
    ctx.grammar.voken_count = cfg.voken_count;
    ctx.grammar.quantizer = cfg.quantizer;
    ctx.gmm = d.gmm;
    ctx.canvas = d.canvas;
    if (s == latents::Scheme::voken || s == latents::Scheme::combined) {
        std::vector<Eigen::VectorXd> xs;
        xs.reserve(d.samples.size());
        for (const auto& smp : d.samples) xs.push_back(smp.x);
        ctx.codebook = latents::build_codebook(latents::voken_chunks(xs, cfg.voken_count), cfg.codebook_size, seed).codebook;
    }
    return ctx;
}

/// z = q(x, c) for every training sample.
inline std::vector<latents::LatentSequence> extract_corpus(const Dataset& d, const latents::LatentContext& ctx) {
    std::vector<latents::LatentSequence> out;
    out.reserve(d.samples.size());
    for (const auto& s : d.samples) out.push_back(latents::extract_latent(s.x, s.class_id, ctx));
    return out;
}

inline std::vector<int> classes_of(const Dataset& d) {
    std::vector<int> out;
    out.reserve(d.samples.size());
    for (const auto& s : d.samples) out.push_back(s.class_id);
    return out;
}

/// Real samples of one class as columns, at most `limit` of them.
inline Eigen::MatrixXd class_matrix(const Dataset& d, int class_id, int limit) {
    std::vector<const data::LabeledSample*> rows;
    for (const auto& s : d.samples)
        if (s.class_id == class_id && static_cast<int>(rows.size()) < limit) rows.push_back(&s);
    require(!rows.empty(), "dataset has no samples of class " + std::to_string(class_id));
    Eigen::MatrixXd x(rows.front()->x.size(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = rows[i]->x;
    return x;
}

}  // namespace kaleido::train
