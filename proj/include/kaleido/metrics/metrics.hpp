#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kaleido/core/error.hpp"
#include "kaleido/data/gmm.hpp"
#include "kaleido/latents/extract.hpp"
#include "kaleido/latents/grammar.hpp"

namespace kaleido::metrics {

/// A sample counts toward a mode only within this Mahalanobis distance.
inline constexpr double kCoverageRadius = 3.0;

struct ModeCoverage {
    double coverage = 0.0;
    std::vector<int> counts;  // confidently assigned samples per component
    int uncounted = 0;        // assigned but farther than kCoverageRadius
    int total = 0;
};

/// Samples are columns. `classes` restricts the denominator to the modes of
/// the conditioned classes; empty means every mode.
inline ModeCoverage mode_coverage(const Eigen::MatrixXd& samples, const data::GmmSpec& gmm, int min_count,
                                  std::span<const int> classes = {}) {
    require(samples.cols() >= 1, "mode_coverage: empty sample set");
    require(min_count >= 1, "mode_coverage: min_count must be >= 1");
    ModeCoverage out;
    out.counts.assign(static_cast<std::size_t>(gmm.size()), 0);
    out.total = static_cast<int>(samples.cols());
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
        const Eigen::VectorXd x = samples.col(j);
        const int k = data::assign_mode(x, gmm);
        if (data::mahalanobis(x, gmm.at(k)) <= kCoverageRadius)
            ++out.counts[static_cast<std::size_t>(k)];
        else
            ++out.uncounted;
    }
    int denom = 0;
    int hit = 0;
    for (int k = 0; k < gmm.size(); ++k) {
        const int c = gmm.at(k).class_id;
        if (!classes.empty() && std::find(classes.begin(), classes.end(), c) == classes.end()) continue;
        ++denom;
        if (out.counts[static_cast<std::size_t>(k)] >= min_count) ++hit;
    }
    require(denom > 0, "mode_coverage: conditioned classes have no modes");
    out.coverage = static_cast<double>(hit) / denom;
    return out;
}

/// Fraction of the samples assigned to class `class_id` that land on `mode_id`.
inline double within_class_fraction(const Eigen::MatrixXd& samples, const data::GmmSpec& gmm, int class_id,
                                    int mode_id) {
    int in_class = 0;
    int in_mode = 0;
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
        const auto& comp = gmm.at(data::assign_mode(samples.col(j), gmm));
        if (comp.class_id != class_id) continue;
        ++in_class;
        if (comp.mode_id == mode_id) ++in_mode;
    }
    return in_class == 0 ? 0.0 : static_cast<double>(in_mode) / in_class;
}

/// Mode of `class_id` with the smallest weight (lowest index on ties).
inline int minority_mode(const data::GmmSpec& gmm, int class_id) {
    int best = -1;
    double w = 0.0;
    for (int k : gmm.components_of_class(class_id))
        if (best < 0 || gmm.at(k).weight < w) {
            best = gmm.at(k).mode_id;
            w = gmm.at(k).weight;
        }
    require(best >= 0, "class has no modes");
    return best;
}

namespace detail {

inline double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double d = a(r, i) - b(r, j);
        s += d * d;
    }
    return s;
}

/// Squared distance from each point to its k-th nearest other point.
inline std::vector<double> knn_radii(const Eigen::MatrixXd& set, int k) {
    const Eigen::Index n = set.cols();
    std::vector<double> radii(static_cast<std::size_t>(n));
    std::vector<double> d(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) d[m++] = squared_distance(set, i, set, j);
        std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
        radii[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(k - 1)];
    }
    return radii;
}

/// Fraction of `query` points inside some ball of the `manifold` set.
inline double manifold_fraction(const Eigen::MatrixXd& query, const Eigen::MatrixXd& manifold,
                                const std::vector<double>& radii) {
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < query.cols(); ++i)
        for (Eigen::Index j = 0; j < manifold.cols(); ++j)
            if (squared_distance(query, i, manifold, j) <= radii[static_cast<std::size_t>(j)]) {
                ++inside;
                break;
            }
    return static_cast<double>(inside) / static_cast<double>(query.cols());
}

}  // namespace detail

struct RecallPrecision {
    double recall = 0.0;
    double precision = 0.0;
};

/// k-NN manifold recall (real points covered by generated balls) and
/// precision (generated points covered by real balls). Points are columns.
inline RecallPrecision knn_recall_precision(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen, int k = 3) {
    require(real.cols() >= 1 && gen.cols() >= 1, "knn_recall_precision: empty set");
    require(real.rows() == gen.rows(), "knn_recall_precision: dimension mismatch");
    require(k >= 1 && k < real.cols() && k < gen.cols(), "knn_recall_precision: k out of range");
    RecallPrecision out;
    out.recall = detail::manifold_fraction(real, gen, detail::knn_radii(gen, k));
    out.precision = detail::manifold_fraction(gen, real, detail::knn_radii(real, k));
    return out;
}

struct FrechetResult {
    double value = 0.0;   // squared Frechet distance
    bool jittered = false;  // covariances were singular and got +1e-6 I
};

inline constexpr double kFrechetJitter = 1e-6;

namespace detail {

inline void moments(const Eigen::MatrixXd& x, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    mean = x.rowwise().mean();
    const Eigen::MatrixXd c = x.colwise() - mean;
    cov = c * c.transpose() / static_cast<double>(x.cols() - 1);
}

inline bool singular(const Eigen::MatrixXd& cov) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly).eigenvalues();
    return ev.minCoeff() <= 1e-12 * std::max(ev.maxCoeff(), 1e-300);
}

inline Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu_r - mu_g||^2 + tr(S_r + S_g - 2 (S_r S_g)^{1/2}), with the trace term
/// evaluated as tr((S_r^{1/2} S_g S_r^{1/2})^{1/2}).
inline FrechetResult frechet_distance(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen) {
    require(real.rows() == gen.rows(), "frechet_distance: dimension mismatch");
    require(real.cols() > real.rows() && gen.cols() > gen.rows(), "frechet_distance: each set must exceed the dimension");
    Eigen::VectorXd mr, mg;
    Eigen::MatrixXd sr, sg;
    detail::moments(real, mr, sr);
    detail::moments(gen, mg, sg);
    FrechetResult out;
    if (detail::singular(sr) || detail::singular(sg)) {
        out.jittered = true;
        sr.diagonal().array() += kFrechetJitter;
        sg.diagonal().array() += kFrechetJitter;
    }
    const Eigen::MatrixXd root = detail::sym_sqrt(sr);
    const Eigen::MatrixXd inner = root * sg * root;
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly)
            .eigenvalues();
    const double tr_sqrt = ev.cwiseMax(0.0).cwiseSqrt().sum();
    const double fd = (mr - mg).squaredNorm() + sr.trace() + sg.trace() - 2.0 * tr_sqrt;
    out.value = std::max(fd, 0.0);
    return out;
}

/// Whether a sample's re-extracted latent matches the latent it was generated under.
inline bool latent_matches(const Eigen::VectorXd& x, int class_id, const latents::LatentSequence& z,
                           const latents::LatentContext& ctx) {
    require(z.scheme == ctx.scheme(), "latent_adherence: scheme mismatch");
    latents::LatentSequence got;
    try {
        got = latents::extract_latent(x, class_id, ctx);
    } catch (const ContractViolation&) {
        return false;  // e.g. a blank canvas has no extent
    }
    const auto want = latents::parse_latent(ctx.vocab, z, ctx.grammar);
    const auto have = latents::parse_latent(ctx.vocab, got, ctx.grammar);
    const double pixel = ctx.canvas ? static_cast<double>(latents::kCoordinateRange) / ctx.canvas->width : 1.0;
    auto bbox_ok = [&] {
        const auto& a = *want.bbox;
        const auto& b = *have.bbox;
        return std::abs(a.x1 - b.x1) <= pixel && std::abs(a.y1 - b.y1) <= pixel && std::abs(a.x2 - b.x2) <= pixel &&
               std::abs(a.y2 - b.y2) <= pixel;
    };
    auto voken_ok = [&] {
        int same = 0;
        for (std::size_t i = 0; i < want.vokens.size(); ++i) same += want.vokens[i] == have.vokens[i];
        return 4 * same >= 3 * static_cast<int>(want.vokens.size());
    };
    auto text_ok = [&] { return want.class_id == have.class_id && want.mode_id == have.mode_id; };
    switch (z.scheme) {
        case latents::Scheme::text: return text_ok();
        case latents::Scheme::bbox: return bbox_ok();
        case latents::Scheme::blob: {
            const auto& a = *want.blob;
            const auto& b = *have.blob;
            const int nb = ctx.grammar.quantizer.angle_bins;
            const int dt = std::abs(a.theta - b.theta);
            return std::abs(a.xc - b.xc) <= 1 && std::abs(a.yc - b.yc) <= 1 && std::abs(a.r_major - b.r_major) <= 1 &&
                   std::abs(a.r_minor - b.r_minor) <= 1 && std::min(dt, nb - dt) <= 1;
        }
        case latents::Scheme::voken: return voken_ok();
        case latents::Scheme::combined: return text_ok() && bbox_ok() && voken_ok();
    }
    return false;
}

inline double latent_adherence(const Eigen::MatrixXd& samples, std::span<const int> classes,
                               std::span<const latents::LatentSequence> conditioned,
                               const latents::LatentContext& ctx) {
    require(samples.cols() >= 1, "latent_adherence: empty sample set");
    require(static_cast<std::size_t>(samples.cols()) == conditioned.size() && conditioned.size() == classes.size(),
            "latent_adherence: one class and latent per sample");
    int ok = 0;
    for (Eigen::Index j = 0; j < samples.cols(); ++j)
        ok += latent_matches(samples.col(j), classes[static_cast<std::size_t>(j)],
                             conditioned[static_cast<std::size_t>(j)], ctx);
    return static_cast<double>(ok) / static_cast<double>(samples.cols());
}

struct MetricReport {
    std::string variant;
    int class_id = -1;
    double guidance = 1.0;
    int n_samples = 0;
    int n_real = 0;
    std::uint64_t seed = 0;
    std::optional<double> mode_coverage;
    std::vector<std::pair<std::string, int>> mode_counts;
    int uncounted = 0;
    std::optional<double> minority_fraction;
    double recall = 0.0;
    double precision = 0.0;
    double frechet_distance = 0.0;
    bool frechet_jittered = false;
    std::optional<double> latent_adherence;

    void validate() const {
        auto frac = [](std::optional<double> v) { return !v || (*v >= 0.0 && *v <= 1.0); };
        require(frac(mode_coverage) && frac(minority_fraction) && frac(latent_adherence) && frac(recall) &&
                    frac(precision),
                "metric fractions must lie in [0, 1]");
        require(frechet_distance >= 0.0, "Frechet distance must be non-negative");
        if (!mode_counts.empty()) {
            int total = uncounted;
            for (const auto& [name, n] : mode_counts) total += n;
            require(total == n_samples, "mode counts do not sum to the sample total");
        }
    }
};

inline nlohmann::json to_json(const MetricReport& r) {
    using nlohmann::json;
    auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
    json counts = json::object();
    for (const auto& [name, n] : r.mode_counts) counts[name] = n;
    return json{{"variant", r.variant},
                {"class", r.class_id},
                {"guidance", r.guidance},
                {"n_samples", r.n_samples},
                {"n_real", r.n_real},
                {"seed", r.seed},
                {"mode_coverage", opt(r.mode_coverage)},
                {"mode_counts", counts},
                {"uncounted", r.uncounted},
                {"minority_fraction", opt(r.minority_fraction)},
                {"recall", r.recall},
                {"precision", r.precision},
                {"frechet_distance", r.frechet_distance},
                {"frechet_jittered", r.frechet_jittered},
                {"latent_adherence", opt(r.latent_adherence)}};
}

}  // namespace kaleido::metrics
