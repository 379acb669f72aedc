#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"
#include "kaleido/diffusion/condition.hpp"
#include "kaleido/diffusion/schedule.hpp"

namespace kaleido::diffusion {

struct SamplerConfig {
    double guidance = 1.0;
    int steps = 250;
    std::uint64_t seed = 0;
    bool latent_conditioning = false;
    bool cfg_drops_latent = true;
    bool clip = true;
    double clip_min = -1.0;
    double clip_max = 1.0;
};

/// gamma (x(c) - x(null)) + x(null), batched over columns.
template <Denoiser D>
Eigen::MatrixXd cfg_predict(const D& denoiser, const Eigen::MatrixXd& x, int t, std::span<const Condition> conds,
                            double guidance, bool drop_latent = true) {
    require(guidance >= 0.0, "guidance scale must be >= 0");
    std::vector<Condition> uncond;
    uncond.reserve(conds.size());
    for (const auto& c : conds) uncond.push_back(unconditional(c, drop_latent));
    const Eigen::MatrixXd xu = denoiser.predict(x, t, uncond);
    if (guidance == 0.0) return xu;
    const Eigen::MatrixXd xc = denoiser.predict(x, t, conds);
    if (guidance == 1.0) return xc;
    return (guidance * (xc - xu).array() + xu.array()).matrix();
}

/// Timesteps visited by a `steps`-step sampler: round(i T / steps), i = 0..steps.
inline std::vector<int> timestep_grid(int T, int steps) {
    require(steps >= 1, "sampler needs steps >= 1");
    require(steps <= T, "sampler steps exceed the schedule length");
    std::vector<int> grid;
    for (int i = 0; i <= steps; ++i)
        grid.push_back(static_cast<int>(std::lround(static_cast<double>(i) * T / steps)));
    return grid;
}

/// Called after each denoising step with (step index from 0, timestep t).
using StepObserver = std::function<void(int, int)>;

/// Ancestral DDPM sampling of one chain per condition. Chain i draws all of
/// its noise from derive_seed(config.seed, chain_offset + i), so results do
/// not depend on how chains are batched. Returns d x n.
template <Denoiser D>
Eigen::MatrixXd ddpm_sample(const D& denoiser, std::span<const Condition> conds, const SamplerConfig& config,
                            const NoiseSchedule& sched, std::uint64_t chain_offset = 0,
                            const StepObserver& on_step = {}) {
    require(!conds.empty(), "ddpm_sample: needs at least one chain");
    require(config.guidance >= 0.0, "guidance scale must be >= 0");
    require(!config.clip || config.clip_min <= config.clip_max, "clip box is empty");
    const int d = denoiser.dim();
    const auto n = static_cast<Eigen::Index>(conds.size());
    const auto grid = timestep_grid(sched.steps, config.steps);

    std::vector<Rng> rngs;
    rngs.reserve(conds.size());
    Eigen::MatrixXd x(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        rngs.push_back(make_rng(config.seed, Stream::sampler, chain_offset + static_cast<std::uint64_t>(j)));
        x.col(j) = normal_vector(rngs.back(), d);
    }

    std::vector<Condition> local;
    std::span<const Condition> used = conds;
    if (!config.latent_conditioning) {
        local.reserve(conds.size());
        for (const auto& c : conds) local.push_back(Condition::of_class(c.class_id));
        used = local;
    }

    int step_index = 0;
    for (std::size_t i = grid.size() - 1; i >= 1; --i, ++step_index) {
        const int t = grid[i];
        const int s = grid[i - 1];
        Eigen::MatrixXd x0 = cfg_predict(denoiser, x, t, used, config.guidance, config.cfg_drops_latent);
        if (config.clip) x0 = x0.cwiseMax(config.clip_min).cwiseMin(config.clip_max);
        const auto post = posterior(sched, t, s);
        x = post.coef_xt * x + post.coef_x0 * x0;
        if (s > 0) {
            const double sd = std::sqrt(post.variance);
            for (Eigen::Index j = 0; j < n; ++j) x.col(j) += sd * normal_vector(rngs[static_cast<std::size_t>(j)], d);
        }
        if (!x.allFinite())
            throw NonFiniteError("sampler state became non-finite at step " + std::to_string(step_index) +
                                 " (t=" + std::to_string(t) + ")");
        if (on_step) on_step(step_index, t);
    }
    return x;
}

}  // namespace kaleido::diffusion
