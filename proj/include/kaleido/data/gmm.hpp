#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"

namespace kaleido::data {

struct GmmComponent {
    double weight = 0.0;
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // diagonal covariance
    int class_id = 0;
    int mode_id = 0;  // subclass index within the class
};

/// Ground-truth Gaussian mixture whose components are labelled (class, mode).
struct GmmSpec {
    std::vector<GmmComponent> components;

    int dim() const { return components.empty() ? 0 : static_cast<int>(components.front().mean.size()); }
    int size() const { return static_cast<int>(components.size()); }

    int num_classes() const {
        int n = 0;
        for (const auto& c : components) n = std::max(n, c.class_id + 1);
        return n;
    }

    int max_modes_per_class() const {
        int n = 0;
        for (const auto& c : components) n = std::max(n, c.mode_id + 1);
        return n;
    }

    std::vector<int> components_of_class(int class_id) const {
        std::vector<int> out;
        for (int k = 0; k < size(); ++k)
            if (components[static_cast<std::size_t>(k)].class_id == class_id) out.push_back(k);
        return out;
    }

    /// Component index for (class, mode), or -1.
    int component_of(int class_id, int mode_id) const {
        for (int k = 0; k < size(); ++k) {
            const auto& c = components[static_cast<std::size_t>(k)];
            if (c.class_id == class_id && c.mode_id == mode_id) return k;
        }
        return -1;
    }

    const GmmComponent& at(int k) const { return components.at(static_cast<std::size_t>(k)); }

    double max_stddev() const {
        double s = 0.0;
        for (const auto& c : components) s = std::max(s, std::sqrt(c.variance.maxCoeff()));
        return s;
    }

    /// Weight of each mode conditioned on its class.
    double class_conditional_weight(int k) const {
        double total = 0.0;
        for (int j : components_of_class(at(k).class_id)) total += at(j).weight;
        return at(k).weight / total;
    }

    void validate() const {
        require(!components.empty(), "GMM has no components");
        double total = 0.0;
        for (std::size_t i = 0; i < components.size(); ++i) {
            const auto& c = components[i];
            require(c.weight > 0.0, "GMM component weights must be positive");
            require(c.mean.size() == dim() && c.variance.size() == dim(), "GMM component dimension mismatch");
            require((c.variance.array() > 0.0).all(), "GMM variances must be positive");
            total += c.weight;
            for (std::size_t j = 0; j < i; ++j)
                require(!(components[j].class_id == c.class_id && components[j].mode_id == c.mode_id),
                        "GMM (class, mode) labels must be unique");
        }
        require(std::abs(total - 1.0) < 1e-12, "GMM weights must sum to 1");
        const double min_sep = 4.0 * max_stddev();
        for (std::size_t i = 0; i < components.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                require((components[i].mean - components[j].mean).norm() >= min_sep,
                        "GMM component means closer than 4 max stddevs");
    }
};

enum class WeightVariant { equal, unequal };

inline std::string to_string(WeightVariant v) { return v == WeightVariant::equal ? "equal" : "unequal"; }

inline WeightVariant weight_variant_from_string(const std::string& s) {
    if (s == "equal") return WeightVariant::equal;
    if (s == "unequal") return WeightVariant::unequal;
    throw ContractViolation("unknown GMM weight variant '" + s + "'");
}

/// Two classes x two modes in 2D, stddev 0.3. The class is the sign of the
/// first coordinate and the mode the sign of the second. Mode A is at y = +3
/// for class 0 and at y = -3 for class 1, so the two classes place their
/// majority mode (weight 0.7 within class in the unequal variant) on opposite
/// halves of the plane. With both majorities on the same half, p(c | x) would
/// not depend on the second coordinate and guidance could not reweight modes.
inline GmmSpec toy_gmm_default(WeightVariant variant = WeightVariant::equal) {
    constexpr double kOffset = 3.0;
    constexpr double kStd = 0.3;
    GmmSpec spec;
    for (int c = 0; c < 2; ++c) {
        const double x = c == 0 ? -kOffset : kOffset;
        for (int m = 0; m < 2; ++m) {
            const double y_mode_a = c == 0 ? kOffset : -kOffset;
            GmmComponent comp;
            comp.class_id = c;
            comp.mode_id = m;
            comp.mean = Eigen::Vector2d(x, m == 0 ? y_mode_a : -y_mode_a);
            comp.variance = Eigen::Vector2d::Constant(kStd * kStd);
            const double within = variant == WeightVariant::equal ? 0.5 : (m == 0 ? 0.7 : 0.3);
            comp.weight = 0.5 * within;
            spec.components.push_back(std::move(comp));
        }
    }
    spec.validate();
    return spec;
}

/// Token-style name of a component, e.g. "mode_1B".
inline std::string mode_name(int class_id, int mode_id) {
    return "mode_" + std::to_string(class_id) + static_cast<char>('A' + mode_id);
}

inline double log_gaussian_diag(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& variance) {
    const Eigen::ArrayXd d = (x - mean).array();
    return -0.5 * ((d * d / variance.array()).sum() + (variance.array() * 2.0 * std::numbers::pi).log().sum());
}

inline double mahalanobis(const Eigen::VectorXd& x, const GmmComponent& c) {
    const Eigen::ArrayXd d = (x - c.mean).array();
    return std::sqrt((d * d / c.variance.array()).sum());
}

/// Component with the highest responsibility for x; ties go to the lowest index.
inline int assign_mode(const Eigen::VectorXd& x, const GmmSpec& spec) {
    require(x.size() == spec.dim(), "assign_mode: dimension mismatch");
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < spec.size(); ++k) {
        const auto& c = spec.at(k);
        const double score = std::log(c.weight) + log_gaussian_diag(x, c.mean, c.variance);
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    return best;
}

struct Bump {
    double cx = 0.0;
    double cy = 0.0;
    double sigma_major = 1.0;
    double sigma_minor = 1.0;
    double theta_deg = 0.0;
    double amplitude = 1.0;
};

struct LabeledSample {
    Eigen::VectorXd x;
    int class_id = 0;
    int mode_id = 0;    // within class
    int component = 0;  // global mode index
    std::vector<Bump> bumps;  // canvas datasets only
};

inline std::vector<LabeledSample> sample_dataset(const GmmSpec& spec, int n, std::uint64_t seed) {
    require(n >= 1, "sample_dataset: n must be >= 1");
    spec.validate();
    Rng rng = make_rng(seed, Stream::dataset);
    std::vector<double> weights;
    for (const auto& c : spec.components) weights.push_back(c.weight);
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    std::vector<LabeledSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int k = pick(rng);
        const auto& c = spec.at(k);
        LabeledSample s;
        s.x = c.mean + (c.variance.array().sqrt() * normal_vector(rng, spec.dim()).array()).matrix();
        s.class_id = c.class_id;
        s.mode_id = c.mode_id;
        s.component = k;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace kaleido::data
