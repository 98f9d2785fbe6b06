#pragma once

/// Randomised finite-difference checks of every analytic gradient used in training:
/// the gated backward pass (per layer), both losses with respect to their inputs, and
/// the full actor paths (categorical + A2C, Gaussian + clipped surrogate).

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "g2n/gradcheck.hpp"
#include "g2n/network.hpp"
#include "g2n/policy.hpp"
#include "g2n/random.hpp"

namespace g2n {

struct GradientCheckResult {
    std::string name;
    double worst_relative_error = 0.0;
    std::size_t worst_instance = 0;
    std::size_t worst_index = 0;
    bool passed = true;
};

struct GradientCheckReport {
    std::vector<GradientCheckResult> results;
    std::size_t instances = 0;
    double tolerance = 1e-4;

    bool passed() const {
        return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
    }
};

struct GradientCheckOptions {
    std::uint64_t seed = 0;
    std::size_t instances = 20;
    double tolerance = 1e-4;
    double epsilon = 1e-5;
    /// Fault injection: the backward pass multiplies by the negated gate mask.
    bool flip_gate_sign = false;
    /// Every network parameter set to zero (gradients must then match as zeros).
    bool zero_network = false;
};

namespace detail {

/// Small gated network whose pre-activations keep clear of the ReLU kink on `x`,
/// so central differences do not straddle it.
struct GradInstance {
    Mlp net;
    Matrix x;
    Matrix gates;
};

inline GradInstance make_grad_instance(Rng& rng, std::size_t outputs, bool zero = false) {
    for (;;) {
        const std::size_t in = 2 + rng.below(3);
        const std::size_t h1 = 3 + rng.below(4);
        const std::size_t h2 = 3 + rng.below(4);
        const std::size_t batch = 3 + rng.below(3);
        GradInstance g;
        g.net = Mlp(MlpSpec{in, {h1, h2}, outputs, true, 1.0, 1.0}, rng);
        for (std::size_t l = 0; l < g.net.layers().size(); ++l)
            for (double& b : g.net.bias(l)) b = rng.uniform(-0.5, 0.5);
        g.x = Matrix(batch, in);
        for (double& v : g.x.data()) v = rng.uniform(-1.0, 1.0);
        g.gates = Matrix(batch, h2);
        for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t c = 0; c < h2; ++c) g.gates(r, c) = rng.bernoulli(0.6) ? 1.0 : 0.0;
            g.gates(r, rng.below(h2)) = 1.0;
        }
        if (zero) {
            std::fill(g.net.parameters().begin(), g.net.parameters().end(), 0.0);
            return g;
        }
        const auto cache = g.net.forward(g.x, &g.gates);
        bool clear = true;
        for (std::size_t l = 0; l + 1 < g.net.layers().size(); ++l)
            for (double z : cache.pre_activations[l].data())
                if (std::abs(z) < 1e-3) clear = false;
        if (clear) return g;
    }
}

class Tally {
public:
    Tally(GradientCheckReport& report) : report_(report) {}

    void add(const std::string& name, std::size_t instance, const GradientComparison& c) {
        auto it = index_.find(name);
        if (it == index_.end()) {
            it = index_.emplace(name, report_.results.size()).first;
            report_.results.push_back({name});
        }
        auto& r = report_.results[it->second];
        if (c.worst_relative_error >= r.worst_relative_error) {
            r.worst_relative_error = c.worst_relative_error;
            r.worst_instance = instance;
            r.worst_index = c.worst_index;
        }
        r.passed = r.worst_relative_error < report_.tolerance;
    }

private:
    GradientCheckReport& report_;
    std::map<std::string, std::size_t> index_;
};

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

inline double weighted_sum(const Matrix& a, const Matrix& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * w.data()[i];
    return s;
}

}  // namespace detail

inline GradientCheckReport run_gradient_checks(const GradientCheckOptions& opt = {}) {
    GradientCheckReport report;
    report.instances = opt.instances;
    report.tolerance = opt.tolerance;
    detail::Tally tally(report);
    const LossCoefficients coefs{0.5, 0.1};
    const BackwardOptions backward_options{opt.flip_gate_sign};

    for (std::size_t n = 0; n < opt.instances; ++n) {
        Rng rng(derive_seed(opt.seed, Stream::evaluation, n));

        // Gated backward pass, one comparison per layer.
        {
            auto g = detail::make_grad_instance(rng, 2 + rng.below(2), opt.zero_network);
            Matrix upstream(g.x.rows(), g.net.output_dim());
            for (double& v : upstream.data()) v = rng.uniform(-1.0, 1.0);
            const auto analytic = g.net.backward(g.net.forward(g.x, &g.gates), upstream, backward_options);
            const auto numeric = finite_difference_gradients(
                g.net.parameters(), [&] { return detail::weighted_sum(g.net.predict(g.x, &g.gates), upstream); },
                opt.epsilon);
            for (std::size_t l = 0; l < g.net.layers().size(); ++l) {
                const auto& s = g.net.layers()[l];
                const std::size_t begin = s.weight_offset, end = s.bias_offset + s.out;
                std::string name = "backward layer " + std::to_string(l);
                if (g.net.gated_layer() == l) name += " (gated)";
                const std::span<const double> a(analytic.data() + begin, end - begin);
                const std::span<const double> b(numeric.data() + begin, end - begin);
                tally.add(name, n, compare_gradients(a, b));
            }
        }

        // a2c_loss with respect to log-probs, values and entropies.
        {
            const std::size_t B = 3 + rng.below(6);
            auto logp = detail::random_vector(rng, B, -2.0, -0.1);
            auto adv = detail::random_vector(rng, B, -1.0, 1.0);
            auto values = detail::random_vector(rng, B, -1.0, 1.0);
            auto returns = detail::random_vector(rng, B, -1.0, 1.0);
            auto entropy = detail::random_vector(rng, B, 0.1, 1.0);
            const auto t = a2c_loss(logp, adv, values, returns, entropy, coefs);
            auto loss = [&] { return a2c_loss(logp, adv, values, returns, entropy, coefs).total; };
            tally.add("a2c_loss d/dlogp", n, compare_gradients(t.d_logp, finite_difference_gradients(logp, loss)));
            tally.add("a2c_loss d/dvalue", n,
                      compare_gradients(t.d_values, finite_difference_gradients(values, loss)));
            tally.add("a2c_loss d/dentropy", n,
                      compare_gradients(t.d_entropy, finite_difference_gradients(entropy, loss)));
        }

        // ppo_clip_loss; ratios are kept away from the clip corners.
        {
            const std::size_t B = 3 + rng.below(6);
            const double eps = 0.2;
            std::vector<double> old_logp(B), new_logp(B);
            for (std::size_t i = 0; i < B; ++i) {
                old_logp[i] = rng.uniform(-2.0, -0.1);
                double shift;
                do {
                    shift = rng.uniform(-0.4, 0.4);
                } while (std::abs(std::exp(shift) - (1.0 - eps)) < 1e-3 || std::abs(std::exp(shift) - (1.0 + eps)) < 1e-3);
                new_logp[i] = old_logp[i] + shift;
            }
            auto adv = detail::random_vector(rng, B, -1.0, 1.0);
            auto values = detail::random_vector(rng, B, -1.0, 1.0);
            auto returns = detail::random_vector(rng, B, -1.0, 1.0);
            auto entropy = detail::random_vector(rng, B, 0.1, 1.0);
            const auto t = ppo_clip_loss(new_logp, old_logp, adv, eps, values, returns, entropy, coefs);
            auto loss = [&] { return ppo_clip_loss(new_logp, old_logp, adv, eps, values, returns, entropy, coefs).total; };
            tally.add("ppo_clip_loss d/dlogp", n,
                      compare_gradients(t.d_logp, finite_difference_gradients(new_logp, loss)));
            tally.add("ppo_clip_loss d/dvalue", n,
                      compare_gradients(t.d_values, finite_difference_gradients(values, loss)));
            tally.add("ppo_clip_loss d/dentropy", n,
                      compare_gradients(t.d_entropy, finite_difference_gradients(entropy, loss)));
        }

        // Categorical actor under A2C, through the gated network.
        {
            auto g = detail::make_grad_instance(rng, 3, opt.zero_network);
            const std::size_t B = g.x.rows();
            std::vector<int> actions(B);
            for (int& a : actions) a = static_cast<int>(rng.below(3));
            const auto adv = detail::random_vector(rng, B, -1.0, 1.0);
            const std::vector<double> zeros(B, 0.0);
            auto loss_of = [&](const Matrix& logits) {
                const auto e = evaluate_categorical(logits, actions);
                return a2c_loss(e.logp, adv, zeros, zeros, e.entropy, coefs);
            };
            const auto cache = g.net.forward(g.x, &g.gates);
            const auto t = loss_of(cache.output());
            const auto d_logits = categorical_backward(cache.output(), actions, t.d_logp, t.d_entropy);
            const auto analytic = g.net.backward(cache, d_logits, backward_options);
            const auto numeric = finite_difference_gradients(
                g.net.parameters(), [&] { return loss_of(g.net.predict(g.x, &g.gates)).total; }, opt.epsilon);
            tally.add("categorical actor + a2c_loss", n, compare_gradients(analytic, numeric));
        }

        // Gaussian actor (mean network and log-std) under the clipped surrogate.
        {
            auto g = detail::make_grad_instance(rng, 2, opt.zero_network);
            const std::size_t B = g.x.rows();
            auto log_std = detail::random_vector(rng, 2, -0.7, 0.3);
            const Matrix mean0 = g.net.predict(g.x, &g.gates);
            Matrix actions(B, 2);
            std::vector<double> old_logp(B);
            for (std::size_t r = 0; r < B; ++r) {
                for (std::size_t d = 0; d < 2; ++d) actions(r, d) = mean0(r, d) + 0.3 * rng.normal();
                // Behaviour log-prob slightly off the current one, inside the clip range.
                old_logp[r] = gaussian_logprob(mean0.row(r), log_std, actions.row(r)) + rng.uniform(-0.1, 0.1);
            }
            const auto adv = detail::random_vector(rng, B, -1.0, 1.0);
            const std::vector<double> zeros(B, 0.0);
            auto loss_of = [&](const Matrix& mean) {
                const auto e = evaluate_gaussian(mean, log_std, actions);
                return ppo_clip_loss(e.logp, old_logp, adv, 0.2, zeros, zeros, e.entropy, coefs);
            };
            const auto cache = g.net.forward(g.x, &g.gates);
            const auto t = loss_of(cache.output());
            const auto gg = gaussian_backward(cache.output(), log_std, actions, t.d_logp, t.d_entropy);
            const auto analytic = g.net.backward(cache, gg.d_mean, backward_options);
            auto total = [&] { return loss_of(g.net.predict(g.x, &g.gates)).total; };
            tally.add("gaussian actor + ppo_clip_loss", n,
                      compare_gradients(analytic, finite_difference_gradients(g.net.parameters(), total, opt.epsilon)));
            tally.add("gaussian log_std + ppo_clip_loss", n,
                      compare_gradients(gg.d_log_std, finite_difference_gradients(log_std, total, opt.epsilon)));
        }
    }
    return report;
}

}  // namespace g2n
