#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/data/canvas.hpp"
#include "kaleido/data/gmm.hpp"
#include "kaleido/latents/codebook.hpp"
#include "kaleido/latents/ellipse.hpp"
#include "kaleido/latents/grammar.hpp"
#include "kaleido/latents/vocab.hpp"

namespace kaleido::latents {

/// Everything the deterministic extractor q(z | x, c) needs.
struct LatentContext {
    LatentVocab vocab;
    GrammarSpec grammar;
    std::optional<data::GmmSpec> gmm;
    std::optional<data::CanvasSpec> canvas;
    std::optional<Codebook> codebook;
    double bbox_threshold = 0.01;   // fraction of the sample maximum
    double object_threshold = 0.25;  // for counting objects on a canvas

    Scheme scheme() const { return vocab.scheme(); }
};

namespace detail {

inline const data::CanvasSpec& need_canvas(const LatentContext& ctx) {
    require(ctx.canvas.has_value(), "latent scheme " + to_string(ctx.scheme()) + " needs a canvas dataset");
    return *ctx.canvas;
}

inline const Codebook& need_codebook(const LatentContext& ctx) {
    require(ctx.codebook.has_value(), "voken latents need a codebook");
    return *ctx.codebook;
}

/// 4-connected components of pixels at or above `level`.
inline int count_objects(const Eigen::VectorXd& grid, int width, int height, double level) {
    std::vector<int> label(static_cast<std::size_t>(grid.size()), 0);
    int count = 0;
    std::vector<int> stack;
    for (int start = 0; start < grid.size(); ++start) {
        if (grid[start] < level || label[static_cast<std::size_t>(start)]) continue;
        ++count;
        stack.push_back(start);
        label[static_cast<std::size_t>(start)] = count;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int r = p / width;
            const int c = p % width;
            const int nbrs[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& nb : nbrs) {
                if (nb[0] < 0 || nb[0] >= height || nb[1] < 0 || nb[1] >= width) continue;
                const int q = nb[0] * width + nb[1];
                if (grid[q] < level || label[static_cast<std::size_t>(q)]) continue;
                label[static_cast<std::size_t>(q)] = count;
                stack.push_back(q);
            }
        }
    }
    return count;
}

inline double require_signal(const Eigen::VectorXd& grid) {
    const double peak = grid.maxCoeff();
    require(peak > 0.0, "canvas sample is blank");
    return peak;
}

}  // namespace detail

/// Mode label of a sample: the highest-responsibility component for GMM data,
/// (c, object count - 1) for canvas data.
inline std::pair<int, int> extract_mode(const Eigen::VectorXd& x, int c, const LatentContext& ctx) {
    if (ctx.gmm) {
        const auto& comp = ctx.gmm->at(data::assign_mode(x, *ctx.gmm));
        return {comp.class_id, comp.mode_id};
    }
    const auto& cs = detail::need_canvas(ctx);
    require(x.size() == cs.pixels(), "canvas sample has the wrong length");
    const double peak = detail::require_signal(x);
    const int n = detail::count_objects(x, cs.width, cs.height, ctx.object_threshold * peak);
    const int modes = ctx.vocab.spec().modes_per_class;
    return {c, std::clamp(n, 1, modes) - 1};
}

/// Object extent in [0, 1000] coordinates: pixels at or above
/// bbox_threshold x max, expanded to pixel edges.
inline BboxParams extract_bbox(const Eigen::VectorXd& x, const LatentContext& ctx) {
    const auto& cs = detail::need_canvas(ctx);
    require(x.size() == cs.pixels(), "canvas sample has the wrong length");
    const double level = ctx.bbox_threshold * detail::require_signal(x);
    int c0 = cs.width, c1 = -1, r0 = cs.height, r1 = -1;
    for (int r = 0; r < cs.height; ++r)
        for (int c = 0; c < cs.width; ++c)
            if (x[r * cs.width + c] >= level) {
                c0 = std::min(c0, c);
                c1 = std::max(c1, c);
                r0 = std::min(r0, r);
                r1 = std::max(r1, r);
            }
    auto scale = [](int px, int n, bool up) {
        const double v = static_cast<double>(px) * kCoordinateRange / n;
        return std::clamp(static_cast<int>(up ? std::ceil(v) : std::floor(v)), 0, kCoordinateRange);
    };
    return {scale(c0, cs.width, false), scale(r0, cs.height, false), scale(c1 + 1, cs.width, true),
            scale(r1 + 1, cs.height, true)};
}

/// Moment ellipse of the canvas mass, in [0, 1000] coordinates.
inline BlobParams extract_blob(const Eigen::VectorXd& x, const LatentContext& ctx) {
    const auto& cs = detail::need_canvas(ctx);
    require(cs.width == cs.height, "blob latents need a square canvas");
    require(x.size() == cs.pixels(), "canvas sample has the wrong length");
    detail::require_signal(x);
    const auto fit = ellipse_fit_grid(x, cs.width, cs.height);
    const double s = static_cast<double>(kCoordinateRange) / cs.width;
    const double range = ctx.grammar.quantizer.range;
    BlobParams p;
    p.xc = std::clamp(fit.params.xc * s, 0.0, range);
    p.yc = std::clamp(fit.params.yc * s, 0.0, range);
    p.r_major = std::clamp(fit.params.r_major * s, 1e-9, range);
    p.r_minor = std::clamp(fit.params.r_minor * s, 1e-9, p.r_major);
    p.theta_deg = fit.params.theta_deg;
    return p;
}

inline std::vector<int> extract_vokens(const Eigen::VectorXd& x, const LatentContext& ctx) {
    return voken_encode(x, detail::need_codebook(ctx), ctx.grammar.voken_count);
}

/// Deterministic q(z | x, c) for the context's scheme.
inline LatentSequence extract_latent(const Eigen::VectorXd& x, int c, const LatentContext& ctx) {
    require(x.allFinite(), "extract_latent: sample is not finite");
    const Scheme s = ctx.scheme();
    if (ctx.gmm) require(s == Scheme::text || s == Scheme::voken,
                         "latent scheme " + to_string(s) + " is incompatible with a plain GMM dataset");
    ParsedLatent p;
    p.scheme = s;
    if (s == Scheme::text || s == Scheme::combined) std::tie(p.class_id, p.mode_id) = extract_mode(x, c, ctx);
    if (s == Scheme::bbox || s == Scheme::combined) p.bbox = extract_bbox(x, ctx);
    if (s == Scheme::blob) p.blob = quantize(extract_blob(x, ctx), ctx.grammar.quantizer);
    if (s == Scheme::voken || s == Scheme::combined) p.vokens = extract_vokens(x, ctx);
    return encode_latent(ctx.vocab, p, ctx.grammar);
}

}  // namespace kaleido::latents
