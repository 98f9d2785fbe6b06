#pragma once

/// Action distributions, advantage estimators and actor-critic losses.
///
/// Losses are expressed in terms of per-sample log-probabilities, entropies and value
/// predictions. Each loss returns its value together with the derivative with respect
/// to those inputs; the distribution backward functions then map the derivatives onto
/// the network outputs (logits, Gaussian mean, log-std).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "g2n/error.hpp"
#include "g2n/matrix.hpp"
#include "g2n/random.hpp"

namespace g2n {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

namespace detail {
inline void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite ") + what);
}
}  // namespace detail

// ---------------------------------------------------------------- categorical

inline std::vector<double> log_softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    auto out = log_softmax(logits);
    for (double& v : out) v = std::exp(v);
    return out;
}

inline double categorical_entropy(std::span<const double> logits) {
    const auto lp = log_softmax(logits);
    double h = 0.0;
    for (double l : lp) h -= std::exp(l) * l;
    return h;
}

struct CategoricalSample {
    int action = 0;
    double logprob = 0.0;
};

inline CategoricalSample sample_categorical(std::span<const double> logits, Rng& rng) {
    detail::check_finite(logits, "logits");
    const auto lp = log_softmax(logits);
    const double u = rng.uniform();
    double cdf = 0.0;
    std::size_t a = lp.size() - 1;
    for (std::size_t i = 0; i < lp.size(); ++i) {
        cdf += std::exp(lp[i]);
        if (u < cdf) {
            a = i;
            break;
        }
    }
    return {static_cast<int>(a), lp[a]};
}

inline int argmax(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Per-sample log-probabilities and entropies of a batch of action choices.
struct HeadEvaluation {
    std::vector<double> logp;
    std::vector<double> entropy;
};

inline HeadEvaluation evaluate_categorical(const Matrix& logits, std::span<const int> actions) {
    require(actions.size() == logits.rows(), "evaluate_categorical: batch mismatch");
    HeadEvaluation out{std::vector<double>(actions.size()), std::vector<double>(actions.size())};
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto lp = log_softmax(logits.row(r));
        out.logp[r] = lp.at(static_cast<std::size_t>(actions[r]));
        double h = 0.0;
        for (double l : lp) h -= std::exp(l) * l;
        out.entropy[r] = h;
    }
    return out;
}

/// d(loss)/d(logits) given d(loss)/d(logp_r) and d(loss)/d(entropy_r).
inline Matrix categorical_backward(const Matrix& logits, std::span<const int> actions,
                                   std::span<const double> d_logp, std::span<const double> d_entropy) {
    Matrix grad(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto lp = log_softmax(logits.row(r));
        double h = 0.0;
        for (double l : lp) h -= std::exp(l) * l;
        for (std::size_t k = 0; k < lp.size(); ++k) {
            const double p = std::exp(lp[k]);
            const double onehot = static_cast<int>(k) == actions[r] ? 1.0 : 0.0;
            // d logp(a)/dz_k = 1[k=a] - p_k ;  dH/dz_k = -p_k (log p_k + H)
            grad(r, k) = d_logp[r] * (onehot - p) - d_entropy[r] * p * (lp[k] + h);
        }
    }
    return grad;
}

// ---------------------------------------------------------------- diagonal Gaussian

inline double gaussian_logprob(std::span<const double> mean, std::span<const double> log_std,
                               std::span<const double> action) {
    double lp = 0.0;
    for (std::size_t d = 0; d < mean.size(); ++d) {
        const double z = (action[d] - mean[d]) / std::exp(log_std[d]);
        lp += -0.5 * z * z - log_std[d] - kHalfLog2Pi;
    }
    return lp;
}

inline double gaussian_entropy(std::span<const double> log_std) {
    double h = 0.0;
    for (double s : log_std) h += 0.5 + kHalfLog2Pi + s;
    return h;
}

struct GaussianSample {
    std::vector<double> action;
    double logprob = 0.0;
};

inline GaussianSample sample_gaussian(std::span<const double> mean, std::span<const double> log_std,
                                      Rng& rng) {
    detail::check_finite(mean, "gaussian mean");
    detail::check_finite(log_std, "gaussian log_std");
    GaussianSample s{std::vector<double>(mean.size()), 0.0};
    for (std::size_t d = 0; d < mean.size(); ++d) s.action[d] = mean[d] + std::exp(log_std[d]) * rng.normal();
    s.logprob = gaussian_logprob(mean, log_std, s.action);
    return s;
}

inline HeadEvaluation evaluate_gaussian(const Matrix& mean, std::span<const double> log_std,
                                        const Matrix& actions) {
    require(actions.rows() == mean.rows() && actions.cols() == mean.cols() && log_std.size() == mean.cols(),
            "evaluate_gaussian: shape mismatch");
    HeadEvaluation out{std::vector<double>(mean.rows()), std::vector<double>(mean.rows())};
    const double h = gaussian_entropy(log_std);
    for (std::size_t r = 0; r < mean.rows(); ++r) {
        out.logp[r] = gaussian_logprob(mean.row(r), log_std, actions.row(r));
        out.entropy[r] = h;
    }
    return out;
}

struct GaussianGradients {
    Matrix d_mean;
    std::vector<double> d_log_std;
};

inline GaussianGradients gaussian_backward(const Matrix& mean, std::span<const double> log_std,
                                           const Matrix& actions, std::span<const double> d_logp,
                                           std::span<const double> d_entropy) {
    GaussianGradients g{Matrix(mean.rows(), mean.cols()), std::vector<double>(log_std.size(), 0.0)};
    for (std::size_t r = 0; r < mean.rows(); ++r)
        for (std::size_t d = 0; d < mean.cols(); ++d) {
            const double inv_var = std::exp(-2.0 * log_std[d]);
            const double diff = actions(r, d) - mean(r, d);
            // d logp/d mean = diff / var ;  d logp/d log_std = diff^2 / var - 1 ;  dH/d log_std = 1
            g.d_mean(r, d) = d_logp[r] * diff * inv_var;
            g.d_log_std[d] += d_logp[r] * (diff * diff * inv_var - 1.0) + d_entropy[r];
        }
    return g;
}

// ---------------------------------------------------------------- advantages

/// k-step advantage: sum_{i<k} gamma^i r_{t+i} + gamma^k V(s_{t+k}) - V(s_t).
/// `values` holds V(s_0..s_T) (T+1 entries, the last one the bootstrap). The window is
/// shortened at the end of the segment and cut at the first done flag, after which
/// no bootstrap is added.
inline std::vector<double> k_step_advantage(std::span<const double> rewards, std::span<const double> values,
                                            std::span<const std::uint8_t> dones, double gamma, std::size_t k) {
    const std::size_t T = rewards.size();
    require(values.size() == T + 1 && dones.size() == T, "k_step_advantage: length mismatch");
    require(k >= 1, "k_step_advantage: k must be >= 1");
    std::vector<double> adv(T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t steps = std::min(k, T - t);
        double ret = 0.0;
        double discount = 1.0;
        bool terminated = false;
        for (std::size_t i = 0; i < steps; ++i) {
            ret += discount * rewards[t + i];
            discount *= gamma;
            if (dones[t + i]) {
                terminated = true;
                break;
            }
        }
        if (!terminated) ret += discount * values[t + steps];
        adv[t] = ret - values[t];
    }
    return adv;
}

/// Generalized advantage estimation over one actor's segment; `values` as above.
inline std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                               std::span<const std::uint8_t> dones, double gamma, double lambda) {
    const std::size_t T = rewards.size();
    require(values.size() == T + 1 && dones.size() == T, "gae: length mismatch");
    std::vector<double> adv(T);
    double next = 0.0;
    for (std::size_t t = T; t-- > 0;) {
        const double live = dones[t] ? 0.0 : 1.0;
        const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    return adv;
}

/// In-place standardisation to zero mean and unit standard deviation.
inline void normalize_advantages(std::span<double> adv) {
    if (adv.size() < 2) return;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(adv.size()));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
}

// ---------------------------------------------------------------- losses

struct LossCoefficients {
    double value = 0.5;
    double entropy = 0.01;
};

/// Loss value, its parts, and derivatives with respect to each loss input.
struct LossTerms {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    std::vector<double> d_logp;
    std::vector<double> d_values;
    std::vector<double> d_entropy;
};

namespace detail {
inline void add_value_and_entropy(LossTerms& out, std::span<const double> values, std::span<const double> returns,
                                  std::span<const double> entropy, const LossCoefficients& coefs) {
    const std::size_t B = values.size();
    const double inv = 1.0 / static_cast<double>(B);
    out.d_values.assign(B, 0.0);
    out.d_entropy.assign(B, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
        const double err = values[i] - returns[i];
        out.value += err * err * inv;
        out.d_values[i] = coefs.value * 2.0 * err * inv;
        out.entropy += entropy[i] * inv;
        out.d_entropy[i] = -coefs.entropy * inv;
    }
    out.total = out.policy + coefs.value * out.value - coefs.entropy * out.entropy;
}
}  // namespace detail

/// -mean(logp * A) + c_v mean((V - R)^2) - c_e mean(H). Advantages are constants.
inline LossTerms a2c_loss(std::span<const double> logp, std::span<const double> advantages,
                          std::span<const double> values, std::span<const double> returns,
                          std::span<const double> entropy, const LossCoefficients& coefs) {
    const std::size_t B = logp.size();
    require(B > 0 && advantages.size() == B && values.size() == B && returns.size() == B && entropy.size() == B,
            "a2c_loss: batch mismatch");
    LossTerms out;
    const double inv = 1.0 / static_cast<double>(B);
    out.d_logp.assign(B, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
        out.policy -= logp[i] * advantages[i] * inv;
        out.d_logp[i] = -advantages[i] * inv;
    }
    detail::add_value_and_entropy(out, values, returns, entropy, coefs);
    if (!std::isfinite(out.total)) throw NumericError("a2c loss is not finite");
    return out;
}

/// Clipped surrogate: -mean(min(rho A, clip(rho, 1-eps, 1+eps) A)) with
/// rho = exp(logp_new - logp_old), plus the value and entropy terms of a2c_loss.
inline LossTerms ppo_clip_loss(std::span<const double> logp_new, std::span<const double> logp_old,
                               std::span<const double> advantages, double clip_eps,
                               std::span<const double> values, std::span<const double> returns,
                               std::span<const double> entropy, const LossCoefficients& coefs) {
    const std::size_t B = logp_new.size();
    require(B > 0 && logp_old.size() == B && advantages.size() == B && values.size() == B &&
                returns.size() == B && entropy.size() == B,
            "ppo_clip_loss: batch mismatch");
    LossTerms out;
    const double inv = 1.0 / static_cast<double>(B);
    out.d_logp.assign(B, 0.0);
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < B; ++i) {
        const double rho = std::exp(logp_new[i] - logp_old[i]);
        const double a = advantages[i];
        const double unclipped = rho * a;
        const double clipped_term = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps) * a;
        if (unclipped <= clipped_term) {
            out.policy -= unclipped * inv;
            out.d_logp[i] = -unclipped * inv;  // d(rho A)/d logp_new = rho A
        } else {
            out.policy -= clipped_term * inv;
            ++clipped;
        }
    }
    out.clip_fraction = static_cast<double>(clipped) * inv;
    detail::add_value_and_entropy(out, values, returns, entropy, coefs);
    if (!std::isfinite(out.total)) throw NumericError("ppo loss is not finite");
    return out;
}

}  // namespace g2n
