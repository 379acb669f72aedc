#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"
#include "kaleido/data/gmm.hpp"

namespace kaleido::data {

/// Small grayscale canvases holding one or two anisotropic Gaussian bumps.
/// Class 0 bumps are near-horizontal, class 1 near-vertical; mode A has one
/// bump and mode B two.
struct CanvasSpec {
    int width = 16;
    int height = 16;
    int min_bumps = 1;
    int max_bumps = 2;
    double sigma_major_min = 0.9;
    double sigma_major_max = 1.5;
    double minor_ratio_min = 0.45;
    double minor_ratio_max = 0.8;
    double amplitude_min = 0.6;
    double amplitude_max = 1.0;
    double orientation_jitter_deg = 20.0;
    double extent_sigmas = 3.0;     // bump support used for the inside-canvas check
    double min_separation = 2.5;    // in units of summed major sigmas

    int pixels() const { return width * height; }
};

inline double fold_degrees(double deg) {
    double d = std::fmod(deg, 180.0);
    if (d < 0.0) d += 180.0;
    if (d >= 180.0) d -= 180.0;
    return d;
}

/// Half extents of a bump's support along x and y.
inline Eigen::Vector2d bump_half_extent(const Bump& b, double extent_sigmas) {
    const double th = b.theta_deg * std::numbers::pi / 180.0;
    const double c = std::cos(th);
    const double s = std::sin(th);
    const double a2 = b.sigma_major * b.sigma_major;
    const double b2 = b.sigma_minor * b.sigma_minor;
    return extent_sigmas * Eigen::Vector2d(std::sqrt(a2 * c * c + b2 * s * s), std::sqrt(a2 * s * s + b2 * c * c));
}

inline bool bump_inside(const CanvasSpec& spec, const Bump& b) {
    const auto h = bump_half_extent(b, spec.extent_sigmas);
    return b.cx - h.x() >= 0.0 && b.cx + h.x() <= spec.width && b.cy - h.y() >= 0.0 && b.cy + h.y() <= spec.height;
}

inline double bump_value(const Bump& b, double px, double py) {
    const double th = b.theta_deg * std::numbers::pi / 180.0;
    const double dx = px - b.cx;
    const double dy = py - b.cy;
    const double u = dx * std::cos(th) + dy * std::sin(th);
    const double v = -dx * std::sin(th) + dy * std::cos(th);
    return b.amplitude *
           std::exp(-0.5 * (u * u / (b.sigma_major * b.sigma_major) + v * v / (b.sigma_minor * b.sigma_minor)));
}

/// Row-major grid (index = row * width + col), pixel centres at (col + 0.5,
/// row + 0.5), clipped to [0, 1].
inline Eigen::VectorXd render_canvas(const CanvasSpec& spec, const std::vector<Bump>& bumps) {
    Eigen::VectorXd grid = Eigen::VectorXd::Zero(spec.pixels());
    for (const auto& b : bumps) {
        require(b.amplitude >= 0.0 && b.amplitude <= 1.0, "bump amplitude must lie in [0, 1]");
        require(b.sigma_major >= b.sigma_minor && b.sigma_minor > 0.0, "bump radii must satisfy major >= minor > 0");
        require(bump_inside(spec, b), "bump extends outside the canvas");
        for (int r = 0; r < spec.height; ++r)
            for (int c = 0; c < spec.width; ++c) grid[r * spec.width + c] += bump_value(b, c + 0.5, r + 0.5);
    }
    return grid.cwiseMax(0.0).cwiseMin(1.0);
}

namespace detail {

inline Bump draw_bump(const CanvasSpec& spec, int class_id, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Bump b;
        b.sigma_major = spec.sigma_major_min + (spec.sigma_major_max - spec.sigma_major_min) * u01(rng);
        b.sigma_minor =
            b.sigma_major * (spec.minor_ratio_min + (spec.minor_ratio_max - spec.minor_ratio_min) * u01(rng));
        const double base = class_id == 0 ? 0.0 : 90.0;
        b.theta_deg = fold_degrees(base + spec.orientation_jitter_deg * (2.0 * u01(rng) - 1.0));
        b.amplitude = spec.amplitude_min + (spec.amplitude_max - spec.amplitude_min) * u01(rng);
        b.cx = spec.width * u01(rng);
        b.cy = spec.height * u01(rng);
        if (bump_inside(spec, b)) return b;
    }
    throw ContractViolation("canvas too small for the configured bump sizes");
}

}  // namespace detail

inline std::vector<LabeledSample> sample_canvas_dataset(const CanvasSpec& spec, int n, std::uint64_t seed) {
    require(n >= 1, "sample_canvas_dataset: n must be >= 1");
    require(spec.min_bumps >= 1 && spec.max_bumps >= spec.min_bumps && spec.max_bumps <= 2,
            "canvas datasets support one or two bumps per sample");
    Rng rng = make_rng(seed, Stream::dataset);
    std::uniform_int_distribution<int> pick_class(0, 1);
    std::uniform_int_distribution<int> pick_count(spec.min_bumps, spec.max_bumps);
    std::vector<LabeledSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        LabeledSample s;
        s.class_id = pick_class(rng);
        const int count = pick_count(rng);
        for (int attempt = 0;; ++attempt) {
            require(attempt < 10000, "could not place non-overlapping bumps on the canvas");
            std::vector<Bump> bumps;
            for (int j = 0; j < count; ++j) bumps.push_back(detail::draw_bump(spec, s.class_id, rng));
            if (count == 2) {
                const double sep = std::hypot(bumps[0].cx - bumps[1].cx, bumps[0].cy - bumps[1].cy);
                if (sep < spec.min_separation * (bumps[0].sigma_major + bumps[1].sigma_major)) continue;
            }
            s.bumps = std::move(bumps);
            break;
        }
        s.mode_id = count - 1;
        s.component = 2 * s.class_id + s.mode_id;
        s.x = render_canvas(spec, s.bumps);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace kaleido::data
