#pragma once

/// Multi-actor experience collection. Actor slot i steps its own environment and
/// samples from its own random stream, acting under gate row i, so a slot's
/// trajectory does not depend on how many other slots run beside it or on how the
/// slots are spread over worker threads.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "g2n/envs.hpp"
#include "g2n/genome.hpp"
#include "g2n/model.hpp"

namespace g2n {

enum class Phase { elite, ga_elite };

inline const char* phase_name(Phase p) { return p == Phase::elite ? "elite" : "ga_elite"; }

/// Runs fn(i) for i in [0, count) on up to `workers` threads, contiguous chunks each.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (count + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w * chunk; i < std::min(count, (w + 1) * chunk); ++i) fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// One environment per actor slot plus the observation each slot will act on next.
class VecEnv {
public:
    VecEnv() = default;
    VecEnv(const std::string& name, std::span<const std::uint64_t> seeds) {
        for (auto s : seeds) envs_.push_back(make_environment(name, s));
        require(!envs_.empty(), "VecEnv needs at least one environment");
        spec_ = envs_.front()->spec();
        current_ = Matrix(envs_.size(), spec_.observation_dim);
        for (std::size_t i = 0; i < envs_.size(); ++i) current_.set_row(i, envs_[i]->reset());
    }

    std::size_t size() const noexcept { return envs_.size(); }
    const EnvSpec& spec() const noexcept { return spec_; }
    const Matrix& observations() const noexcept { return current_; }
    Environment& env(std::size_t i) { return *envs_.at(i); }
    void set_observation(std::size_t i, std::span<const double> obs) { current_.set_row(i, obs); }

private:
    std::vector<std::unique_ptr<Environment>> envs_;
    EnvSpec spec_;
    Matrix current_;
};

/// Transitions of N actors over T steps, record (t, i) at row t * N + i.
struct RolloutBatch {
    std::size_t horizon = 0;
    std::size_t actors = 0;
    Matrix observations;
    std::vector<int> discrete_actions;
    Matrix continuous_actions;
    std::vector<double> rewards;
    std::vector<std::uint8_t> dones;
    std::vector<double> values;
    std::vector<double> behavior_logp;
    std::vector<std::size_t> actor_index;
    /// V(s_T) per actor, the critic's value of the observation after the last step.
    std::vector<double> bootstrap_values;
    /// Gate row per actor slot used while acting (empty for ungated collection).
    Matrix gates;

    std::size_t size() const noexcept { return horizon * actors; }
    std::size_t index(std::size_t t, std::size_t actor) const noexcept { return t * actors + actor; }

    /// Rewards / dones / values of one actor in time order; values include the bootstrap.
    std::vector<double> actor_rewards(std::size_t i) const {
        std::vector<double> out(horizon);
        for (std::size_t t = 0; t < horizon; ++t) out[t] = rewards[index(t, i)];
        return out;
    }
    std::vector<std::uint8_t> actor_dones(std::size_t i) const {
        std::vector<std::uint8_t> out(horizon);
        for (std::size_t t = 0; t < horizon; ++t) out[t] = dones[index(t, i)];
        return out;
    }
    std::vector<double> actor_values(std::size_t i) const {
        std::vector<double> out(horizon + 1);
        for (std::size_t t = 0; t < horizon; ++t) out[t] = values[index(t, i)];
        out[horizon] = bootstrap_values[i];
        return out;
    }
};

/// Collects T steps from every slot. `gates` (N x G) assigns a gate row to each slot;
/// pass nullptr for the ungated network. `action_rngs` holds one stream per slot.
/// Returns with every done environment already reset.
inline RolloutBatch collect(VecEnv& envs, const ActorCritic& model, const Matrix* gates, std::size_t horizon,
                            std::vector<Rng>& action_rngs, std::size_t workers = 1) {
    const std::size_t N = envs.size();
    require(action_rngs.size() == N, "collect: one action stream per slot required");
    if (gates) require(gates->rows() == N, "collect: one gate row per slot required");
    const auto& spec = envs.spec();
    const bool continuous = spec.action.kind == ActionKind::continuous;

    RolloutBatch b;
    b.horizon = horizon;
    b.actors = N;
    b.observations = Matrix(horizon * N, spec.observation_dim);
    if (continuous)
        b.continuous_actions = Matrix(horizon * N, spec.action.dim);
    else
        b.discrete_actions.assign(horizon * N, 0);
    b.rewards.assign(horizon * N, 0.0);
    b.dones.assign(horizon * N, 0);
    b.values.assign(horizon * N, 0.0);
    b.behavior_logp.assign(horizon * N, 0.0);
    b.actor_index.assign(horizon * N, 0);
    if (gates) b.gates = *gates;

    for (std::size_t t = 0; t < horizon; ++t) {
        const Matrix& obs = envs.observations();
        const Matrix head = model.actor.predict(obs, gates);
        const Matrix value = model.critic.predict(obs);
        parallel_for(N, workers, [&](std::size_t i) {
            const std::size_t k = b.index(t, i);
            b.observations.set_row(k, obs.row(i));
            b.actor_index[k] = i;
            b.values[k] = value(i, 0);
            Action action;
            try {
                if (continuous) {
                    auto s = sample_gaussian(head.row(i), model.log_std, action_rngs[i]);
                    b.continuous_actions.set_row(k, s.action);
                    b.behavior_logp[k] = s.logprob;
                    action = to_env_action(spec.action, 0, s.action);
                } else {
                    auto s = sample_categorical(head.row(i), action_rngs[i]);
                    b.discrete_actions[k] = s.action;
                    b.behavior_logp[k] = s.logprob;
                    action = to_env_action(spec.action, s.action, {});
                }
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (actor " + std::to_string(i) + ")");
            }
            auto& env = envs.env(i);
            auto step = env.step(action);
            b.rewards[k] = step.reward;
            b.dones[k] = step.done ? 1 : 0;
            envs.set_observation(i, step.done ? env.reset() : step.observation);
        });
    }
    const Matrix last = model.critic.predict(envs.observations());
    b.bootstrap_values.resize(N);
    for (std::size_t i = 0; i < N; ++i) b.bootstrap_values[i] = last(i, 0);
    return b;
}

struct CompletedEpisode {
    std::size_t actor = 0;
    double total_return = 0.0;
    std::size_t length = 0;
    Phase phase = Phase::elite;
};

/// Running return and length per actor slot; survives across batches and phases.
class EpisodeTracker {
public:
    EpisodeTracker() = default;
    explicit EpisodeTracker(std::size_t actors) : running_(actors, 0.0), length_(actors, 0) {}

    std::size_t actors() const noexcept { return running_.size(); }
    double running_return(std::size_t i) const { return running_.at(i); }
    std::size_t running_length(std::size_t i) const { return length_.at(i); }

    /// Adds one step; returns the finished episode when `done`.
    std::optional<CompletedEpisode> step(std::size_t actor, double reward, bool done, Phase phase) {
        running_.at(actor) += reward;
        ++length_[actor];
        if (!done) return std::nullopt;
        CompletedEpisode e{actor, running_[actor], length_[actor], phase};
        running_[actor] = 0.0;
        length_[actor] = 0;
        return e;
    }

private:
    std::vector<double> running_;
    std::vector<std::size_t> length_;
};

/// Scans the batch in time order, closes finished episodes, and credits them to the
/// fitness table only during the GA+elite phase (an episode belongs to the phase in
/// which it terminates).
inline std::vector<CompletedEpisode> finish_episodes(EpisodeTracker& tracker, const RolloutBatch& batch,
                                                     FitnessTable& table, Phase phase) {
    require(tracker.actors() == batch.actors, "finish_episodes: tracker/batch size mismatch");
    std::vector<CompletedEpisode> finished;
    for (std::size_t t = 0; t < batch.horizon; ++t)
        for (std::size_t i = 0; i < batch.actors; ++i) {
            const std::size_t k = batch.index(t, i);
            if (auto e = tracker.step(i, batch.rewards[k], batch.dones[k] != 0, phase)) {
                if (phase == Phase::ga_elite) table.record(i, e->total_return);
                finished.push_back(*e);
            }
        }
    return finished;
}

}  // namespace g2n
