#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "g2n/gradcheck.hpp"
#include "g2n/policy.hpp"

using namespace g2n;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST(KStepAdvantage, SingleStep) {
    const std::vector<double> r{1.0}, v{0.0, 0.0};
    const std::vector<std::uint8_t> d{0};
    EXPECT_DOUBLE_EQ(k_step_advantage(r, v, d, 0.99, 1)[0], 1.0);
}

TEST(KStepAdvantage, TwoStepWithBootstrap) {
    const std::vector<double> r{1.0, 1.0}, v{0.0, 0.3, 0.5};
    const std::vector<std::uint8_t> d{0, 0};
    EXPECT_NEAR(k_step_advantage(r, v, d, 0.99, 2)[0], 2.48005, 1e-12);
}

TEST(KStepAdvantage, TerminalCutsWindow) {
    const std::vector<double> r{1.0, 7.0}, v{0.4, 3.0, 5.0};
    const std::vector<std::uint8_t> d{1, 0};
    EXPECT_DOUBLE_EQ(k_step_advantage(r, v, d, 0.99, 2)[0], 1.0 - 0.4);
}

TEST(KStepAdvantage, WindowShortensAtSegmentEnd) {
    const std::vector<double> r{1.0, 2.0, 3.0}, v{0.1, 0.2, 0.3, 0.4};
    const std::vector<std::uint8_t> d{0, 0, 0};
    const auto a = k_step_advantage(r, v, d, 0.5, 5);
    EXPECT_DOUBLE_EQ(a[2], 3.0 + 0.5 * 0.4 - 0.3);
    EXPECT_DOUBLE_EQ(a[1], 2.0 + 0.5 * 3.0 + 0.25 * 0.4 - 0.2);
}

TEST(KStepAdvantage, LengthMismatchIsInternalError) {
    const std::vector<double> r{1.0}, v{0.0};
    const std::vector<std::uint8_t> d{0};
    EXPECT_THROW(k_step_advantage(r, v, d, 0.99, 1), InternalError);
}

TEST(Gae, LambdaZeroIsTdResidual) {
    Rng rng(1);
    const auto r = random_vector(rng, 12, -1, 1);
    const auto v = random_vector(rng, 13, -1, 1);
    std::vector<std::uint8_t> d(12, 0);
    d[5] = 1;
    const auto a = gae(r, v, d, 0.9, 0.0);
    for (std::size_t t = 0; t < 12; ++t) EXPECT_DOUBLE_EQ(a[t], r[t] + 0.9 * v[t + 1] * (d[t] ? 0 : 1) - v[t]);
}

TEST(Gae, MonteCarloLimitGivesRewardSuffixSums) {
    const std::vector<double> r{1, 2, 3, 4, 5}, v(6, 0.0);
    const std::vector<std::uint8_t> d{0, 1, 0, 0, 1};
    const auto a = gae(r, v, d, 1.0, 1.0);
    const std::vector<double> expected{3, 2, 12, 9, 5};
    for (std::size_t t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ(a[t], expected[t]);
}

TEST(Gae, MatchesBruteForceExpansion) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t T = 20;
        const auto r = random_vector(rng, T, -1, 1);
        const auto v = random_vector(rng, T + 1, -1, 1);
        std::vector<std::uint8_t> d(T);
        for (auto& x : d) x = rng.bernoulli(0.15);
        const double g = 0.97, l = 0.9;
        const auto a = gae(r, v, d, g, l);
        for (std::size_t t = 0; t < T; ++t) {
            double sum = 0.0, w = 1.0;
            for (std::size_t i = t; i < T; ++i) {
                sum += w * (r[i] + g * v[i + 1] * (d[i] ? 0.0 : 1.0) - v[i]);
                if (d[i]) break;
                w *= g * l;
            }
            EXPECT_NEAR(a[t], sum, 1e-10);
        }
    }
}

TEST(Gae, LambdaOneMatchesFullWindowKStep) {
    const std::vector<double> r{0.5, -1.0, 2.0}, v{0.3, -0.2, 0.7, 1.1};
    const std::vector<std::uint8_t> d{0, 0, 0};
    // A_0 under GAE(λ=1) telescopes to the 3-step return minus V(s_0); later steps use shorter windows.
    const auto a = gae(r, v, d, 0.9, 1.0);
    const auto k = k_step_advantage(r, v, d, 0.9, 3);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(a[t], k[t], 1e-12);
}

TEST(NormalizeAdvantages, ZeroMeanUnitStdKeepsArgmax) {
    Rng rng(3);
    auto a = random_vector(rng, 50, -3, 5);
    const auto best = std::max_element(a.begin(), a.end()) - a.begin();
    normalize_advantages(a);
    double mean = 0, var = 0;
    for (double x : a) mean += x / 50;
    for (double x : a) var += (x - mean) * (x - mean) / 50;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-6);
    EXPECT_EQ(std::max_element(a.begin(), a.end()) - a.begin(), best);
}

TEST(A2cLoss, ZeroAdvantagesGiveZeroPolicyGradient) {
    const std::vector<double> logp{-0.3, -1.2}, adv{0, 0}, v{0.1, 0.2}, R{1, 0}, h{1, 1};
    const auto t = a2c_loss(logp, adv, v, R, h, {0.5, 0.0});
    for (double g : t.d_logp) EXPECT_EQ(g, 0.0);
    EXPECT_EQ(t.policy, 0.0);
}

TEST(A2cLoss, HandValue) {
    const std::vector<double> logp{-0.5, -1.0}, adv{2.0, -1.0}, v{0.0, 1.0}, R{1.0, 1.5}, h{0.7, 0.9};
    const auto t = a2c_loss(logp, adv, v, R, h, {0.5, 0.01});
    const double policy = -((-0.5 * 2.0) + (-1.0 * -1.0)) / 2;
    const double value = (1.0 + 0.25) / 2;
    const double entropy = 0.8;
    EXPECT_DOUBLE_EQ(t.total, policy + 0.5 * value - 0.01 * entropy);
}

TEST(A2cLoss, UniformCategoricalEntropyIsLog4) {
    const std::vector<double> logits{0.3, 0.3, 0.3, 0.3};
    EXPECT_NEAR(categorical_entropy(logits), std::log(4.0), 1e-12);
}

TEST(A2cLoss, GradientsMatchFiniteDifferences) {
    Rng rng(4);
    const LossCoefficients c{0.5, 0.01};
    for (int trial = 0; trial < 20; ++trial) {
        auto logp = random_vector(rng, 6, -2, -0.1), adv = random_vector(rng, 6, -1, 1);
        auto v = random_vector(rng, 6, -1, 1), R = random_vector(rng, 6, -1, 1), h = random_vector(rng, 6, 0, 1);
        const auto t = a2c_loss(logp, adv, v, R, h, c);
        auto f = [&] { return a2c_loss(logp, adv, v, R, h, c).total; };
        EXPECT_LT(compare_gradients(t.d_logp, finite_difference_gradients(logp, f)).worst_relative_error, 1e-4);
        EXPECT_LT(compare_gradients(t.d_values, finite_difference_gradients(v, f)).worst_relative_error, 1e-4);
        EXPECT_LT(compare_gradients(t.d_entropy, finite_difference_gradients(h, f)).worst_relative_error, 1e-4);
    }
}

TEST(PpoClipLoss, EqualLogprobsGiveMeanAdvantage) {
    const std::vector<double> lp{-0.4, -2.0, -1.0}, adv{1.0, -2.0, 0.5}, z{0, 0, 0};
    const auto t = ppo_clip_loss(lp, lp, adv, 0.2, z, z, z, {0.5, 0.0});
    EXPECT_NEAR(-t.policy, (1.0 - 2.0 + 0.5) / 3, 1e-15);
    EXPECT_EQ(t.clip_fraction, 0.0);
}

TEST(PpoClipLoss, RatioTwoPositiveAdvantageClips) {
    const std::vector<double> lp_new{std::log(2.0)}, lp_old{0.0}, adv{1.5}, z{0};
    const auto t = ppo_clip_loss(lp_new, lp_old, adv, 0.2, z, z, z, {0.5, 0.0});
    EXPECT_NEAR(-t.policy, 1.2 * 1.5, 1e-12);
    EXPECT_EQ(t.d_logp[0], 0.0);
    EXPECT_EQ(t.clip_fraction, 1.0);
}

TEST(PpoClipLoss, ZeroAdvantagesGiveZeroPolicyGradient) {
    Rng rng(5);
    const auto lp_new = random_vector(rng, 5, -2, 0), lp_old = random_vector(rng, 5, -2, 0);
    const std::vector<double> adv(5, 0.0), z(5, 0.0);
    const auto t = ppo_clip_loss(lp_new, lp_old, adv, 0.2, z, z, z, {0.5, 0.0});
    for (double g : t.d_logp) EXPECT_EQ(g, 0.0);
}

TEST(PpoClipLoss, ShiftInvariant) {
    const std::vector<double> lp_new{-0.5, -1.0}, lp_old{-0.75, -0.5}, adv{1.0, -1.0}, z{0, 0};
    const std::vector<double> new_shift{2.5, 2.0}, old_shift{2.25, 2.5};
    EXPECT_EQ(ppo_clip_loss(lp_new, lp_old, adv, 0.2, z, z, z, {}).total,
              ppo_clip_loss(new_shift, old_shift, adv, 0.2, z, z, z, {}).total);
}

TEST(PpoClipLoss, GradientsMatchFiniteDifferences) {
    Rng rng(6);
    const LossCoefficients c{0.5, 0.01};
    for (int trial = 0; trial < 20; ++trial) {
        auto old = random_vector(rng, 6, -2, -0.1);
        std::vector<double> lp(6);
        for (std::size_t i = 0; i < 6; ++i) {
            double s;
            do s = rng.uniform(-0.4, 0.4);
            while (std::abs(std::exp(s) - 0.8) < 1e-3 || std::abs(std::exp(s) - 1.2) < 1e-3);
            lp[i] = old[i] + s;
        }
        auto adv = random_vector(rng, 6, -1, 1), v = random_vector(rng, 6, -1, 1);
        auto R = random_vector(rng, 6, -1, 1), h = random_vector(rng, 6, 0, 1);
        const auto t = ppo_clip_loss(lp, old, adv, 0.2, v, R, h, c);
        auto f = [&] { return ppo_clip_loss(lp, old, adv, 0.2, v, R, h, c).total; };
        EXPECT_LT(compare_gradients(t.d_logp, finite_difference_gradients(lp, f)).worst_relative_error, 1e-4);
        EXPECT_LT(compare_gradients(t.d_values, finite_difference_gradients(v, f)).worst_relative_error, 1e-4);
    }
}

TEST(PpoClipLoss, NonFiniteInputIsNumericError) {
    const std::vector<double> lp{NAN}, z{0.0}, adv{1.0};
    EXPECT_THROW(ppo_clip_loss(lp, z, adv, 0.2, z, z, z, {}), NumericError);
}

TEST(Categorical, UniformLogprob) {
    Rng rng(7);
    const std::vector<double> logits(4, 1.7);
    for (int i = 0; i < 20; ++i) EXPECT_NEAR(sample_categorical(logits, rng).logprob, std::log(0.25), 1e-12);
}

TEST(Categorical, SamplingFrequenciesMatchSoftmax) {
    Rng rng(8);
    const std::vector<double> logits{0.5, -1.0, 1.2, 0.0};
    const auto p = softmax(logits);
    std::vector<int> counts(4, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto s = sample_categorical(logits, rng);
        ASSERT_NEAR(s.logprob, std::log(p[s.action]), 1e-12);
        ++counts[s.action];
    }
    for (int a = 0; a < 4; ++a) {
        const double sd = std::sqrt(n * p[a] * (1 - p[a]));
        EXPECT_NEAR(counts[a], n * p[a], 3 * sd);
    }
}

TEST(Categorical, ProbabilitiesSumToOne) {
    const std::vector<double> logits{1000.0, -1000.0, 3.0};
    const auto p = softmax(logits);
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
}

TEST(Categorical, NonFiniteLogitsAreNumericError) {
    Rng rng(9);
    const std::vector<double> logits{0.0, INFINITY};
    EXPECT_THROW(sample_categorical(logits, rng), NumericError);
}

TEST(Gaussian, StandardLogprobAtMean) {
    const std::vector<double> mean{0.0, 0.0}, log_std{0.0, 0.0}, action{0.0, 0.0};
    EXPECT_NEAR(gaussian_logprob(mean, log_std, action), -2 * 0.5 * std::log(2 * std::numbers::pi), 1e-14);
}

TEST(Gaussian, SampleLogprobIsExact) {
    Rng rng(10);
    const std::vector<double> mean{0.3, -0.2}, log_std{-0.5, 0.1};
    for (int i = 0; i < 10; ++i) {
        const auto s = sample_gaussian(mean, log_std, rng);
        double lp = 0;
        for (int d = 0; d < 2; ++d) {
            const double sd = std::exp(log_std[d]);
            lp += -0.5 * std::pow((s.action[d] - mean[d]) / sd, 2) - std::log(sd) - 0.5 * std::log(2 * std::numbers::pi);
        }
        EXPECT_NEAR(s.logprob, lp, 1e-12);
    }
}

TEST(Gaussian, EntropyClosedForm) {
    const std::vector<double> log_std{-0.5, 0.25};
    const double expected = -0.25 + 2 * 0.5 * (1 + std::log(2 * std::numbers::pi));
    EXPECT_NEAR(gaussian_entropy(log_std), expected, 1e-12);
}

TEST(Gaussian, NonFiniteMeanIsNumericError) {
    Rng rng(11);
    const std::vector<double> mean{NAN}, log_std{0.0};
    EXPECT_THROW(sample_gaussian(mean, log_std, rng), NumericError);
}

TEST(Gaussian, BackwardMatchesFiniteDifferences) {
    Rng rng(12);
    Matrix mean(4, 2), actions(4, 2);
    for (double& v : mean.data()) v = rng.uniform(-1, 1);
    for (double& v : actions.data()) v = rng.uniform(-1, 1);
    std::vector<double> log_std{-0.3, 0.2};
    const auto w = random_vector(rng, 4, -1, 1);
    auto f = [&] {
        const auto e = evaluate_gaussian(mean, log_std, actions);
        double s = 0;
        for (std::size_t r = 0; r < 4; ++r) s += w[r] * e.logp[r] + 0.1 * e.entropy[r];
        return s;
    };
    const std::vector<double> d_entropy(4, 0.1);
    const auto g = gaussian_backward(mean, log_std, actions, w, d_entropy);
    EXPECT_LT(compare_gradients(g.d_mean.data(), finite_difference_gradients(mean.data(), f)).worst_relative_error, 1e-6);
    EXPECT_LT(compare_gradients(g.d_log_std, finite_difference_gradients(log_std, f)).worst_relative_error, 1e-6);
}

TEST(Categorical, BackwardMatchesFiniteDifferences) {
    Rng rng(13);
    Matrix logits(5, 3);
    for (double& v : logits.data()) v = rng.uniform(-2, 2);
    const std::vector<int> actions{0, 2, 1, 1, 0};
    const auto w = random_vector(rng, 5, -1, 1), we = random_vector(rng, 5, -1, 1);
    auto f = [&] {
        const auto e = evaluate_categorical(logits, actions);
        double s = 0;
        for (std::size_t r = 0; r < 5; ++r) s += w[r] * e.logp[r] + we[r] * e.entropy[r];
        return s;
    };
    const auto g = categorical_backward(logits, actions, w, we);
    EXPECT_LT(compare_gradients(g.data(), finite_difference_gradients(logits.data(), f)).worst_relative_error, 1e-6);
}
