#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/latents/grammar.hpp"

namespace kaleido::latents {

struct EllipseFit {
    BlobParams params;
    bool degenerate = false;
};

/// Radius reported for a zero-variance fit.
inline constexpr double kMinEllipseRadius = 1e-6;

/// Second-moment fit of weighted 2D points (columns of `points`): centre =
/// weighted mean, radii = 2 sqrt(eigenvalues of the covariance), theta = angle
/// of the major axis folded into [0, 180).
inline EllipseFit ellipse_fit_weighted(const Eigen::Matrix2Xd& points, const Eigen::VectorXd& weights) {
    require(points.cols() == weights.size(), "ellipse_fit: one weight per point");
    require((weights.array() >= 0.0).all() && weights.allFinite() && points.allFinite(),
            "ellipse_fit: weights must be finite and non-negative");
    const double total = weights.sum();
    require(total > 0.0, "ellipse_fit: needs non-zero mass");
    const Eigen::Vector2d mean = points * weights / total;
    const Eigen::Matrix2Xd d = points.colwise() - mean;
    const Eigen::Matrix2d cov = d * weights.asDiagonal() * d.transpose() / total;

    const double a = cov(0, 0);
    const double b = cov(0, 1);
    const double c = cov(1, 1);
    const double mid = 0.5 * (a + c);
    const double rad = std::hypot(0.5 * (a - c), b);
    const double l1 = mid + rad;
    const double l2 = std::max(mid - rad, 0.0);

    EllipseFit fit;
    fit.params.xc = mean.x();
    fit.params.yc = mean.y();
    if (l1 <= 0.0) {
        fit.degenerate = true;
        fit.params.r_major = fit.params.r_minor = kMinEllipseRadius;
        fit.params.theta_deg = 0.0;
        return fit;
    }
    fit.params.r_major = 2.0 * std::sqrt(l1);
    fit.params.r_minor = std::max(2.0 * std::sqrt(l2), kMinEllipseRadius);
    double theta = 0.5 * std::atan2(2.0 * b, a - c) * 180.0 / std::numbers::pi;
    if (theta < 0.0) theta += 180.0;
    if (theta >= 180.0) theta -= 180.0;
    fit.params.theta_deg = theta;
    return fit;
}

inline EllipseFit ellipse_fit(const Eigen::Matrix2Xd& points) {
    require(points.cols() >= 2, "ellipse_fit: needs at least two points");
    return ellipse_fit_weighted(points, Eigen::VectorXd::Ones(points.cols()));
}

/// Fit to a row-major mass grid with pixel centres at (col + 0.5, row + 0.5).
inline EllipseFit ellipse_fit_grid(const Eigen::VectorXd& grid, int width, int height) {
    require(width >= 1 && height >= 1 && grid.size() == static_cast<Eigen::Index>(width) * height,
            "ellipse_fit: grid size does not match its shape");
    Eigen::Matrix2Xd pts(2, grid.size());
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) pts.col(r * width + c) = Eigen::Vector2d(c + 0.5, r + 0.5);
    return ellipse_fit_weighted(pts, grid.cwiseMax(0.0));
}

}  // namespace kaleido::latents
