#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "g2n/error.hpp"

namespace g2n {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
};

/// Bias-corrected Adam. State is lazily sized to match `params`.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      const AdamConfig& cfg) {
    require(params.size() == grads.size(), "adam_step: params/grads size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    require(state.m.size() == params.size(), "adam_step: state shape mismatch");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

struct RmsPropConfig {
    double lr = 7e-4;
    double alpha = 0.99;
    double eps = 1e-5;
};

struct RmsPropState {
    std::vector<double> mean_square;
    std::int64_t step = 0;
};

/// RMSProp with the epsilon inside the square root (the A2C reference convention).
inline void rmsprop_step(std::span<double> params, std::span<const double> grads, RmsPropState& state,
                         const RmsPropConfig& cfg) {
    require(params.size() == grads.size(), "rmsprop_step: params/grads size mismatch");
    if (state.mean_square.empty()) state.mean_square.assign(params.size(), 0.0);
    require(state.mean_square.size() == params.size(), "rmsprop_step: state shape mismatch");
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.mean_square[i] = cfg.alpha * state.mean_square[i] + (1.0 - cfg.alpha) * g * g;
        params[i] -= cfg.lr * g / std::sqrt(state.mean_square[i] + cfg.eps);
    }
}

enum class OptimizerKind { adam, rmsprop };

/// Either optimizer behind one interface; one instance per parameter block.
class Optimizer {
public:
    Optimizer() = default;
    explicit Optimizer(AdamConfig cfg) : kind_(OptimizerKind::adam), adam_(cfg) {}
    explicit Optimizer(RmsPropConfig cfg) : kind_(OptimizerKind::rmsprop), rms_(cfg) {}

    void step(std::span<double> params, std::span<const double> grads) {
        if (kind_ == OptimizerKind::adam)
            adam_step(params, grads, adam_state_, adam_);
        else
            rmsprop_step(params, grads, rms_state_, rms_);
    }

    OptimizerKind kind() const noexcept { return kind_; }
    std::int64_t steps() const noexcept {
        return kind_ == OptimizerKind::adam ? adam_state_.step : rms_state_.step;
    }

private:
    OptimizerKind kind_ = OptimizerKind::adam;
    AdamConfig adam_;
    AdamState adam_state_;
    RmsPropConfig rms_;
    RmsPropState rms_state_;
};

/// Scales every block in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
inline double clip_global_norm(std::span<const std::span<double>> blocks, double max_norm) {
    double sq = 0.0;
    for (auto b : blocks)
        for (double g : b) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / (norm + 1e-6);
        for (auto b : blocks)
            for (double& g : b) g *= scale;
    }
    return norm;
}

}  // namespace g2n
