#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"
#include "kaleido/diffusion/sampler.hpp"
#include "kaleido/latents/grammar.hpp"
#include "kaleido/latents/prior.hpp"
#include "kaleido/train/config.hpp"
#include "kaleido/train/model.hpp"

namespace kaleido::train {

/// Attempts per chain before an invalid-latent streak is treated as a broken prior.
inline constexpr int kMaxLatentAttempts = 100;

struct GenerateRequest {
    int class_id = 0;
    int n = 0;
    double guidance = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t chain_offset = 0;
    /// Use these latents verbatim instead of sampling the prior.
    std::optional<std::vector<latents::LatentSequence>> fixed_latents;
};

struct Generation {
    Eigen::MatrixXd samples;                  // d x n
    std::vector<latents::LatentSequence> latents;  // empty for the baseline
    int rejected_latents = 0;                 // truncated or grammar-invalid prior draws
};

struct GenerateHooks {
    std::function<void(int chain, const latents::LatentSequence&)> on_latent;
    diffusion::StepObserver on_step;
};

inline diffusion::SamplerConfig sampler_config(const SampleConfig& s, const Model& m, double guidance,
                                               std::uint64_t seed) {
    diffusion::SamplerConfig c;
    c.guidance = guidance;
    c.steps = s.steps;
    c.seed = seed;
    c.latent_conditioning = m.kaleido();
    c.cfg_drops_latent = s.cfg_drops_latent;
    c.clip = s.clip;
    c.clip_min = s.clip_min;
    c.clip_max = s.clip_max;
    return c;
}

/// Grammar-checks latent lines, reporting every offending index at once.
inline void check_latents(const latents::LatentContext& ctx, std::span<const latents::LatentSequence> zs) {
    std::string bad;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        try {
            latents::parse_latent(ctx.vocab, zs[i], ctx.grammar);
        } catch (const ContractViolation& e) {
            bad += (bad.empty() ? "" : "; ") + std::to_string(i) + ": " + e.what();
        }
    }
    if (!bad.empty()) throw ContractViolation("grammar-invalid latents at " + bad);
}

/// Draws z ~ p(z | c) for chains [offset, offset + n). Chain i uses its own
/// stream, so the same (seed, chain) always yields the same latent.
inline std::vector<latents::LatentSequence> sample_latents(const Model& model, double temperature,
                                                           const GenerateRequest& req, int* rejected = nullptr) {
    require(model.kaleido(), "baseline models have no latent prior");
    const int max_len = latents::default_max_len(model.latent_ctx.scheme(), model.latent_ctx.grammar.voken_count);
    std::vector<latents::LatentSequence> out;
    out.reserve(static_cast<std::size_t>(req.n));
    for (int i = 0; i < req.n; ++i) {
        Rng rng = make_rng(req.seed, Stream::latent_sampling, req.chain_offset + static_cast<std::uint64_t>(i));
        for (int attempt = 0;; ++attempt) {
            require(attempt < kMaxLatentAttempts, "prior produced no valid latent for chain " + std::to_string(i));
            auto draw = latents::ar_sample(model.prior, req.class_id, temperature, rng, max_len);
            if (!draw.truncated && latents::is_valid(model.latent_ctx.vocab, draw.seq, model.latent_ctx.grammar)) {
                out.push_back(std::move(draw.seq));
                break;
            }
            if (rejected) ++*rejected;
        }
    }
    return out;
}

/// Two-stage sampling: every chain first draws z ~ p(z | c) from the prior
/// (or takes the supplied latent), and only then runs guided diffusion on (c, z).
inline Generation generate(const Model& model, const SampleConfig& scfg, const GenerateRequest& req,
                           const GenerateHooks& hooks = {}) {
    require(req.n >= 1, "sample count must be >= 1");
    require(req.guidance >= 0.0, "guidance scale must be >= 0");
    require(req.class_id >= 0 && req.class_id < model.denoiser.config.num_classes,
            "class " + std::to_string(req.class_id) + " out of range");
    Generation out;
    std::vector<diffusion::Condition> conds;
    conds.reserve(static_cast<std::size_t>(req.n));
    if (model.kaleido()) {
        if (req.fixed_latents) {
            require(static_cast<int>(req.fixed_latents->size()) == req.n, "need one latent per chain");
            check_latents(model.latent_ctx, *req.fixed_latents);
            out.latents = *req.fixed_latents;
        } else {
            out.latents = sample_latents(model, scfg.temperature, req, &out.rejected_latents);
        }
        for (int i = 0; i < req.n; ++i) {
            if (hooks.on_latent) hooks.on_latent(i, out.latents[static_cast<std::size_t>(i)]);
            conds.push_back(diffusion::Condition::with_latent(req.class_id, out.latents[static_cast<std::size_t>(i)]));
        }
    } else {
        require(!req.fixed_latents, "baseline models take no latents");
        for (int i = 0; i < req.n; ++i) conds.push_back(diffusion::Condition::of_class(req.class_id));
    }
    out.samples = diffusion::ddpm_sample(model, conds, sampler_config(scfg, model, req.guidance, req.seed), model.sched,
                                         req.chain_offset, hooks.on_step);
    return out;
}

}  // namespace kaleido::train
