#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/data/gmm.hpp"
#include "kaleido/diffusion/condition.hpp"
#include "kaleido/diffusion/schedule.hpp"
#include "kaleido/latents/vocab.hpp"

namespace kaleido::diffusion {

/// E[x0 | x_t] under the mixture restricted to `subset` (weights renormalized).
inline Eigen::VectorXd analytic_posterior_mean(const data::GmmSpec& gmm, const Eigen::VectorXd& xt, int t,
                                               const NoiseSchedule& sched, std::span<const int> subset) {
    require(!subset.empty(), "analytic denoiser: empty component subset");
    require(xt.size() == gmm.dim(), "analytic denoiser: dimension mismatch");
    sched.check_timestep(t);
    const double a = sched.alpha(t);
    const double s2 = sched.sigma(t) * sched.sigma(t);
    std::vector<double> logr;
    std::vector<Eigen::VectorXd> means;
    double best = -std::numeric_limits<double>::infinity();
    for (int k : subset) {
        const auto& c = gmm.at(k);
        const Eigen::VectorXd var = (a * a * c.variance.array() + s2).matrix();
        const Eigen::VectorXd mu_t = a * c.mean;
        logr.push_back(std::log(c.weight) + data::log_gaussian_diag(xt, mu_t, var));
        best = std::max(best, logr.back());
        means.push_back(c.mean + (a * c.variance.array() / var.array() * (xt - mu_t).array()).matrix());
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(xt.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logr.size(); ++i) {
        const double r = std::exp(logr[i] - best);
        z += r;
        out += r * means[i];
    }
    return out / z;
}

/// Exact posterior-mean denoiser for a known GMM. A class selects its
/// components, the null condition selects all, and a text latent selects the
/// single component it names.
class AnalyticDenoiser {
public:
    AnalyticDenoiser(data::GmmSpec gmm, NoiseSchedule sched, std::optional<latents::LatentVocab> vocab = {})
        : gmm_(std::move(gmm)), sched_(std::move(sched)), vocab_(std::move(vocab)) {
        gmm_.validate();
    }

    int dim() const { return gmm_.dim(); }
    const data::GmmSpec& gmm() const { return gmm_; }

    std::vector<int> subset_for(const Condition& c) const {
        if (c.latent) {
            require(vocab_.has_value(), "analytic denoiser needs a vocabulary for latent conditions");
            const auto payload = c.latent->payload();
            require(!payload.empty(), "analytic denoiser: empty latent");
            const auto [cls, mode] = vocab_->mode_of(payload.front());
            require(cls >= 0, "analytic denoiser only understands mode-label latents");
            const int k = gmm_.component_of(cls, mode);
            require(k >= 0, "latent names a mode absent from the mixture");
            return {k};
        }
        if (c.class_id == kNullClass) {
            std::vector<int> all(static_cast<std::size_t>(gmm_.size()));
            for (int k = 0; k < gmm_.size(); ++k) all[static_cast<std::size_t>(k)] = k;
            return all;
        }
        auto s = gmm_.components_of_class(c.class_id);
        require(!s.empty(), "analytic denoiser: unknown class " + std::to_string(c.class_id));
        return s;
    }

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x, int t, std::span<const Condition> conds) const {
        require(static_cast<std::size_t>(x.cols()) == conds.size(), "analytic denoiser: one condition per column");
        Eigen::MatrixXd out(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const auto subset = subset_for(conds[static_cast<std::size_t>(j)]);
            out.col(j) = analytic_posterior_mean(gmm_, x.col(j), t, sched_, subset);
        }
        return out;
    }

private:
    data::GmmSpec gmm_;
    NoiseSchedule sched_;
    std::optional<latents::LatentVocab> vocab_;
};

static_assert(Denoiser<AnalyticDenoiser>);

}  // namespace kaleido::diffusion
