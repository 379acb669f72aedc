#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace kaleido {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for sub-stream `index` of `master` (per-chain, per-purpose streams).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix_seed(mix_seed(master) ^ mix_seed(index + 0x632BE59BD9B4E019ULL));
}

/// Named purposes so independent consumers never share a stream.
enum class Stream : std::uint64_t {
    init = 1,
    data_order = 2,
    diffusion = 3,
    dropout = 4,
    prior = 5,
    sampler = 6,
    dataset = 7,
    codebook = 8,
    embedding = 9,
    latent_sampling = 10,
};

inline Rng make_rng(std::uint64_t master, Stream purpose, std::uint64_t index = 0) {
    return Rng(derive_seed(derive_seed(master, static_cast<std::uint64_t>(purpose)), index));
}

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline double uniform01(Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = standard_normal(rng);
    return v;
}

}  // namespace kaleido
