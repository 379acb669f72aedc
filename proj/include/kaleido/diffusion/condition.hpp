#pragma once

#include <concepts>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "kaleido/latents/vocab.hpp"

namespace kaleido::diffusion {

inline constexpr int kNullClass = -1;

/// Conditioning of one chain: a class (or the null sentinel) and an optional latent.
struct Condition {
    int class_id = kNullClass;
    std::optional<latents::LatentSequence> latent;

    bool is_null() const { return class_id == kNullClass && !latent; }

    static Condition of_class(int c) { return Condition{c, std::nullopt}; }
    static Condition with_latent(int c, latents::LatentSequence z) { return Condition{c, std::move(z)}; }
};

/// The unconditional CFG branch: the class is always dropped, the latent
/// only when `drop_latent`.
inline Condition unconditional(const Condition& c, bool drop_latent) {
    Condition u;
    if (!drop_latent) u.latent = c.latent;
    return u;
}

/// A batched x0-predictor. `x` holds one chain per column.
template <class D>
concept Denoiser = requires(const D& d, const Eigen::MatrixXd& x, int t, std::span<const Condition> conds) {
    { d.predict(x, t, conds) } -> std::convertible_to<Eigen::MatrixXd>;
    { d.dim() } -> std::convertible_to<int>;
};

}  // namespace kaleido::diffusion
