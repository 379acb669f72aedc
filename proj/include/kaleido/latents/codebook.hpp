#pragma once

#include <algorithm>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"

namespace kaleido::latents {

/// Vector-quantization codebook; centroids are columns.
struct Codebook {
    Eigen::MatrixXd centroids;  // dim x k

    int size() const { return static_cast<int>(centroids.cols()); }
    int dim() const { return static_cast<int>(centroids.rows()); }

    /// Nearest centroid by squared Euclidean distance; ties go to the lowest id.
    int nearest(const Eigen::VectorXd& x) const {
        require(size() >= 1, "empty codebook");
        require(x.size() == centroids.rows(), "codebook lookup: dimension mismatch");
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < size(); ++j) {
            const double d = (centroids.col(j) - x).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        return best;
    }

    Eigen::VectorXd centroid(int id) const {
        require(id >= 0 && id < size(), "voken id " + std::to_string(id) + " >= codebook size");
        return centroids.col(id);
    }
};

struct KMeansResult {
    Codebook codebook;
    std::vector<double> objective;  // after each Lloyd iteration
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline int count_distinct_columns(const Eigen::MatrixXd& x) {
    std::vector<std::vector<double>> cols;
    cols.reserve(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) cols.emplace_back(x.col(j).data(), x.col(j).data() + x.rows());
    std::sort(cols.begin(), cols.end());
    return static_cast<int>(std::unique(cols.begin(), cols.end()) - cols.begin());
}

/// Squared distance of every sample (column) to every centroid: k x n.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& centroids) {
    Eigen::MatrixXd d(centroids.cols(), samples.cols());
    for (Eigen::Index i = 0; i < samples.cols(); ++i)
        d.col(i) = (centroids.colwise() - samples.col(i)).colwise().squaredNorm().transpose();
    return d;
}

}  // namespace detail

/// k-means with k-means++ seeding. Samples are columns.
inline KMeansResult build_codebook(const Eigen::MatrixXd& samples, int k, std::uint64_t seed, int max_iterations = 100) {
    require(k >= 1, "build_codebook: k must be >= 1");
    require(samples.cols() >= 1 && samples.allFinite(), "build_codebook: needs finite samples");
    require(k <= detail::count_distinct_columns(samples), "build_codebook: k exceeds the number of distinct samples");
    Rng rng = make_rng(seed, Stream::codebook);
    const Eigen::Index n = samples.cols();

    Eigen::MatrixXd centroids(samples.rows(), k);
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centroids.col(0) = samples.col(first(rng));
    Eigen::VectorXd best = (samples.colwise() - centroids.col(0)).colwise().squaredNorm().transpose();
    for (int j = 1; j < k; ++j) {
        // D^2 sampling; distinct-count check above guarantees some mass remains.
        std::discrete_distribution<Eigen::Index> pick(best.data(), best.data() + best.size());
        centroids.col(j) = samples.col(pick(rng));
        best = best.cwiseMin((samples.colwise() - centroids.col(j)).colwise().squaredNorm().transpose());
    }

    KMeansResult result;
    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    for (int it = 0; it < max_iterations; ++it) {
        const Eigen::MatrixXd d = detail::squared_distances(samples, centroids);
        bool changed = false;
        double objective = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index j = 0;
            objective += d.col(i).minCoeff(&j);
            if (assign[static_cast<std::size_t>(i)] != static_cast<int>(j)) changed = true;
            assign[static_cast<std::size_t>(i)] = static_cast<int>(j);
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(samples.rows(), k);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.col(assign[static_cast<std::size_t>(i)]) += samples.col(i);
            counts[assign[static_cast<std::size_t>(i)]] += 1.0;
        }
        for (int j = 0; j < k; ++j)
            if (counts[j] > 0.0) centroids.col(j) = sums.col(j) / counts[j];
        // Objective after the mean update.
        objective = detail::squared_distances(samples, centroids).colwise().minCoeff().sum();
        result.objective.push_back(objective);
        result.iterations = it + 1;
        if (!changed) {
            result.converged = true;
            break;
        }
    }
    result.codebook.centroids = std::move(centroids);
    return result;
}

/// Splits x into `count` equal contiguous chunks and quantizes each chunk.
inline std::vector<int> voken_encode(const Eigen::VectorXd& x, const Codebook& codebook, int count) {
    require(count >= 1, "voken count must be >= 1");
    require(x.size() == static_cast<Eigen::Index>(count) * codebook.dim(),
            "voken_encode: feature length must equal count x codebook dimension");
    std::vector<int> ids;
    for (int i = 0; i < count; ++i) ids.push_back(codebook.nearest(x.segment(i * codebook.dim(), codebook.dim())));
    return ids;
}

inline Eigen::VectorXd voken_decode(std::span<const int> ids, const Codebook& codebook) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(ids.size()) * codebook.dim());
    for (std::size_t i = 0; i < ids.size(); ++i)
        out.segment(static_cast<Eigen::Index>(i) * codebook.dim(), codebook.dim()) = codebook.centroid(ids[i]);
    return out;
}

/// Stacks the `count` chunks of every sample as columns, for codebook fitting.
inline Eigen::MatrixXd voken_chunks(std::span<const Eigen::VectorXd> features, int count) {
    require(!features.empty() && count >= 1, "voken_chunks: needs samples and count >= 1");
    const Eigen::Index len = features.front().size();
    require(len % count == 0, "feature length is not divisible by the voken count");
    const Eigen::Index chunk = len / count;
    Eigen::MatrixXd out(chunk, static_cast<Eigen::Index>(features.size()) * count);
    for (std::size_t s = 0; s < features.size(); ++s) {
        require(features[s].size() == len, "voken_chunks: samples differ in length");
        for (int i = 0; i < count; ++i)
            out.col(static_cast<Eigen::Index>(s) * count + i) = features[s].segment(i * chunk, chunk);
    }
    return out;
}

}  // namespace kaleido::latents
