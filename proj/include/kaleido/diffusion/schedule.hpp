#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"

namespace kaleido::diffusion {

enum class ScheduleKind { cosine, linear };

inline std::string to_string(ScheduleKind k) { return k == ScheduleKind::cosine ? "cosine" : "linear"; }

inline ScheduleKind schedule_kind_from_string(std::string_view s) {
    if (s == "cosine") return ScheduleKind::cosine;
    if (s == "linear") return ScheduleKind::linear;
    throw ContractViolation("unknown schedule kind '" + std::string(s) + "'");
}

/// Endpoint clearance: alpha and sigma both stay in [eps, 1].
inline constexpr double kScheduleEpsilon = 1e-5;

/// Variance-preserving signal/noise pairs for t = 0..T.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::cosine;
    int steps = 0;
    std::vector<double> alphas;
    std::vector<double> sigmas;

    double alpha(int t) const { return alphas.at(static_cast<std::size_t>(t)); }
    double sigma(int t) const { return sigmas.at(static_cast<std::size_t>(t)); }
    double snr(int t) const { return alpha(t) * alpha(t) / (sigma(t) * sigma(t)); }
    double log_snr(int t) const { return 2.0 * (std::log(alpha(t)) - std::log(sigma(t))); }

    void check_timestep(int t) const {
        require(t >= 0 && t <= steps,
                "timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps) + "]");
    }
};

/// alpha_{t|s} and sigma^2_{t|s} of the transition q(x_t | x_s), s <= t.
struct Transition {
    double alpha = 1.0;
    double sigma2 = 0.0;
};

inline Transition transition(const NoiseSchedule& sched, int t, int s) {
    sched.check_timestep(t);
    sched.check_timestep(s);
    require(s <= t, "transition requires s <= t");
    Transition tr;
    tr.alpha = sched.alpha(t) / sched.alpha(s);
    tr.sigma2 = sched.sigma(t) * sched.sigma(t) - tr.alpha * tr.alpha * sched.sigma(s) * sched.sigma(s);
    if (s == t) tr.sigma2 = 0.0;
    return tr;
}

/// cosine: alpha_t = cos(phi_t), sigma_t = sin(phi_t), phi_t = (t/T) pi/2.
/// linear: alpha_t = 1 - t/T. In both cases phi is clamped so that neither
/// alpha nor sigma reaches 0 (alpha_0 = sqrt(1 - eps^2), alpha_T = eps).
inline NoiseSchedule make_schedule(ScheduleKind kind, int T) {
    require(T >= 1, "schedule needs T >= 1");
    NoiseSchedule s;
    s.kind = kind;
    s.steps = T;
    s.alphas.resize(static_cast<std::size_t>(T) + 1);
    s.sigmas.resize(static_cast<std::size_t>(T) + 1);
    const double phi_min = std::asin(kScheduleEpsilon);
    const double phi_max = std::acos(kScheduleEpsilon);
    for (int t = 0; t <= T; ++t) {
        const double u = static_cast<double>(t) / T;
        double phi = kind == ScheduleKind::cosine ? u * std::numbers::pi / 2.0 : std::acos(1.0 - u);
        phi = std::clamp(phi, phi_min, phi_max);
        s.alphas[static_cast<std::size_t>(t)] = std::cos(phi);
        s.sigmas[static_cast<std::size_t>(t)] = std::sin(phi);
    }
    return s;
}

/// x_t = alpha_t x0 + sigma_t noise.
inline Eigen::VectorXd q_sample(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& noise,
                                const NoiseSchedule& sched) {
    sched.check_timestep(t);
    require(noise.size() == x0.size(), "q_sample: noise length != data length");
    return sched.alpha(t) * x0 + sched.sigma(t) * noise;
}

/// Mean coefficients and variance of q(x_s | x_t, x0) for s < t.
struct PosteriorCoefficients {
    double coef_xt = 0.0;
    double coef_x0 = 0.0;
    double variance = 0.0;
};

inline PosteriorCoefficients posterior(const NoiseSchedule& sched, int t, int s) {
    require(s < t, "posterior requires s < t");
    const auto tr = transition(sched, t, s);
    const double st2 = sched.sigma(t) * sched.sigma(t);
    const double ss2 = sched.sigma(s) * sched.sigma(s);
    PosteriorCoefficients p;
    p.coef_xt = tr.alpha * ss2 / st2;
    p.coef_x0 = sched.alpha(s) * tr.sigma2 / st2;
    p.variance = tr.sigma2 * ss2 / st2;
    return p;
}

}  // namespace kaleido::diffusion
