#pragma once

/// Generation loop: an elite phase (every slot acts and learns under the elite gate),
/// then a GA+elite phase (slot i acts under population row i, learning still flows
/// through the elite gate only), then fitness evaluation, selection and reproduction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "g2n/config.hpp"
#include "g2n/envs.hpp"
#include "g2n/genome.hpp"
#include "g2n/log.hpp"
#include "g2n/model.hpp"
#include "g2n/optim.hpp"
#include "g2n/policy.hpp"
#include "g2n/random.hpp"
#include "g2n/rollout.hpp"

namespace g2n {

/// One row of the metrics log: the outcome of one update call (all its minibatch steps).
struct UpdateRecord {
    std::uint64_t timestep = 0;
    std::size_t generation = 0;
    Phase phase = Phase::elite;
    std::optional<double> mean_return;  // over the last 100 finished episodes
    double loss = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;
    double clip_fraction = 0.0;
    std::size_t samples = 0;
    std::size_t optimizer_steps = 0;
    std::size_t elite_index = 0;
};

struct GenerationReport {
    std::size_t generation = 0;
    std::vector<std::optional<double>> fitness;
    std::vector<std::size_t> episodes;
    std::size_t elite_before = 0;
    std::size_t elite_after = 0;
    bool elite_changed = false;
    bool all_undefined = false;
    std::uint64_t timesteps = 0;  // cumulative, all actors
    std::uint64_t elite_phase_steps = 0;
    std::uint64_t ga_phase_steps = 0;
    std::optional<double> elite_phase_mean_return;
    std::optional<double> ga_phase_mean_return;
    std::optional<double> elite_fitness;      // fitness of the elite that acted this generation
    std::optional<double> top_fitness;        // best fitness in the population
    std::optional<double> population_fitness; // mean over individuals with a defined fitness
    std::optional<double> elite_eval;         // greedy evaluation of the new elite
};

/// Mean action of one individual on the toy surface, logged once per generation.
struct TrajectoryPoint {
    std::size_t generation = 0;
    std::size_t actor = 0;
    double x = 0.0;
    double y = 0.0;
    double reward = 0.0;
    bool is_elite = false;
};

class TrainingObserver {
public:
    virtual ~TrainingObserver() = default;
    virtual void on_update(const UpdateRecord&) {}
    virtual void on_generation(const GenerationReport&) {}
    virtual void on_trajectory(const std::vector<TrajectoryPoint>&) {}
};

inline Optimizer make_optimizer(const RunConfig& c) {
    if (c.optimizer == OptimizerKind::adam)
        return Optimizer(AdamConfig{c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_eps});
    return Optimizer(RmsPropConfig{c.learning_rate, c.rmsprop_alpha, c.rmsprop_eps});
}

/// Greedy episodes (argmax / mean action) of the model under one gate. Environments
/// are seeded from the evaluation stream, so the result does not disturb training.
inline double evaluate_policy(const ActorCritic& model, const std::string& env_name,
                              const std::vector<double>* gate, std::size_t episodes, std::uint64_t seed) {
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto env = make_environment(env_name, derive_seed(seed, Stream::evaluation, e));
        Matrix obs = Matrix::from_rows({env->reset()});
        double ret = 0.0;
        for (std::size_t t = 0; t < env->spec().max_episode_steps; ++t) {
            Matrix g;
            if (gate) g = repeat_gate(*gate, 1);
            const Matrix head = model.actor.predict(obs, gate ? &g : nullptr);
            const Action a = model.continuous() ? to_env_action(model.action_space, 0, head.row(0))
                                                : to_env_action(model.action_space, argmax(head.row(0)), {});
            auto step = env->step(a);
            ret += step.reward;
            if (step.done) break;
            obs.set_row(0, step.observation);
        }
        total += ret;
    }
    return episodes ? total / static_cast<double>(episodes) : 0.0;
}

class Trainer {
public:
    explicit Trainer(RunConfig cfg) : cfg_(std::move(cfg)) {
        const auto errors = cfg_.validate();
        if (!errors.empty()) {
            std::string msg = "invalid config:";
            for (const auto& e : errors) msg += "\n  - " + e;
            throw ConfigError(msg);
        }
        spec_ = environment_spec(cfg_.env);
        const std::size_t N = cfg_.population_size();

        Rng init(derive_seed(cfg_.seed, Stream::network_init, 0));
        model_ = make_actor_critic(spec_, cfg_.network, init);
        actor_opt_ = make_optimizer(cfg_);
        critic_opt_ = make_optimizer(cfg_);
        log_std_opt_ = make_optimizer(cfg_);

        genetics_ = Rng(derive_seed(cfg_.seed, Stream::genetics, 0));
        minibatch_ = Rng(derive_seed(cfg_.seed, Stream::minibatch, 0));
        population_ = init_population(N, model_.gate_width(), gated() ? cfg_.genetic.keep_prob : 1.0, genetics_);

        std::vector<std::uint64_t> env_seeds(N);
        for (std::size_t i = 0; i < N; ++i) {
            env_seeds[i] = derive_seed(cfg_.seed, Stream::env, i);
            action_rngs_.emplace_back(derive_seed(cfg_.seed, Stream::action, i));
        }
        envs_ = VecEnv(cfg_.env, env_seeds);
        tracker_ = EpisodeTracker(N);
        table_ = FitnessTable(N);
    }

    const RunConfig& config() const noexcept { return cfg_; }
    const ActorCritic& model() const noexcept { return model_; }
    ActorCritic& model() noexcept { return model_; }
    const Population& population() const noexcept { return population_; }
    const FitnessTable& fitness_table() const noexcept { return table_; }
    std::uint64_t timesteps() const noexcept { return timesteps_; }
    std::size_t generation() const noexcept { return generation_; }
    void set_observer(TrainingObserver* obs) noexcept { observer_ = obs; }

    /// Budget exhausted or generation cap reached.
    bool finished() const noexcept {
        if (timesteps_ >= cfg_.total_timesteps) return true;
        return cfg_.max_generations > 0 && generation_ >= cfg_.max_generations;
    }

    /// Acting/updating gate of the elite, or nothing for the ungated baseline.
    std::optional<std::vector<double>> elite_gate() const {
        if (!gated()) return std::nullopt;
        return population_.elite_row().as_gate();
    }

    /// Runs the elite phase; returns the steps taken per actor.
    std::size_t run_elite_phase(std::vector<double>& returns) {
        std::size_t done = 0;
        const std::size_t N = cfg_.population_size();
        const auto gate = elite_gate();
        const Matrix gates = gate ? repeat_gate(*gate, N) : Matrix{};
        while (done < cfg_.elite_phase_steps && !budget_exhausted()) {
            const std::size_t T = std::min(cfg_.horizon, cfg_.elite_phase_steps - done);
            step_chunk(T, gate ? &gates : nullptr, Phase::elite, returns);
            done += T;
        }
        return done;
    }

    /// Runs the GA+elite phase until every actor logs the episode quota (or the cap
    /// or budget is hit); returns the steps taken per actor.
    std::size_t run_ga_elite_phase(std::vector<double>& returns) {
        const std::size_t N = cfg_.population_size();
        const auto cap = static_cast<std::size_t>(cfg_.ga_phase_cap_factor *
                                                  static_cast<double>(cfg_.ga_phase_episodes) *
                                                  static_cast<double>(spec_.max_episode_steps));
        Matrix gates;
        if (gated()) {
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < N; ++i) rows.push_back(population_.rows()[i].as_gate());
            gates = gate_matrix(rows);
        }
        std::size_t done = 0;
        auto quota_met = [&] {
            for (std::size_t i = 0; i < N; ++i)
                if (table_.episodes(i) < cfg_.ga_phase_episodes) return false;
            return true;
        };
        while (!quota_met() && done < cap && !budget_exhausted()) {
            const std::size_t T = std::min(cfg_.horizon, cap - done);
            step_chunk(T, gated() ? &gates : nullptr, Phase::ga_elite, returns);
            done += T;
        }
        if (!quota_met())
            log::warn("generation " + std::to_string(generation_) + ": GA+elite phase stopped before every actor " +
                      "reached the episode quota of " + std::to_string(cfg_.ga_phase_episodes));
        return done;
    }

    GenerationReport run_generation() {
        GenerationReport r;
        r.generation = generation_;
        r.elite_before = population_.elite();
        const std::size_t N = cfg_.population_size();
        table_.clear();

        std::vector<double> elite_returns, ga_returns;
        r.elite_phase_steps = static_cast<std::uint64_t>(run_elite_phase(elite_returns)) * N;
        r.ga_phase_steps = static_cast<std::uint64_t>(run_ga_elite_phase(ga_returns)) * N;
        r.elite_phase_mean_return = mean_of(elite_returns);
        r.ga_phase_mean_return = mean_of(ga_returns);

        for (std::size_t i = 0; i < N; ++i) {
            r.fitness.push_back(table_.fitness(i));
            r.episodes.push_back(table_.episodes(i));
        }
        r.all_undefined = !table_.any_defined();
        r.elite_fitness = r.fitness[r.elite_before];
        std::vector<double> defined;
        for (const auto& f : r.fitness)
            if (f) defined.push_back(*f);
        if (!defined.empty()) {
            r.top_fitness = *std::max_element(defined.begin(), defined.end());
            r.population_fitness = mean_of(defined);
        }

        r.elite_after = r.all_undefined ? r.elite_before : elite_index(table_, r.elite_before);
        r.elite_changed = r.elite_after != r.elite_before;
        if (r.all_undefined)
            log::warn("generation " + std::to_string(generation_) + ": no individual finished an episode; " +
                      "population kept");

        if (observer_ && cfg_.trajectory_log && cfg_.env == "toy2d") observer_->on_trajectory(toy_points(r.elite_after));
        reproduce(r.elite_after);

        ++generation_;
        population_.set_generation(generation_);
        r.timesteps = timesteps_;
        if (cfg_.env == "toy2d") {
            r.elite_eval = elite_toy_reward();
        } else if (cfg_.eval_episodes > 0 && generation_ % cfg_.eval_interval == 0) {
            const auto gate = elite_gate();
            r.elite_eval = evaluate_policy(model_, cfg_.env, gate ? &*gate : nullptr, cfg_.eval_episodes,
                                           derive_seed(cfg_.seed, Stream::evaluation, generation_));
        }
        if (observer_) observer_->on_generation(r);
        return r;
    }

    std::vector<GenerationReport> train() {
        std::vector<GenerationReport> reports;
        while (!finished()) reports.push_back(run_generation());
        return reports;
    }

    /// Deterministic reward of the elite's mean action on the toy surface.
    double elite_toy_reward() const {
        const auto p = mean_action(population_.elite());
        return toy2d_reward(p[0], p[1], Toy2DSurface::standard());
    }

    /// Mean action of individual i on the initial observation.
    std::vector<double> mean_action(std::size_t i) const {
        auto env = make_environment(cfg_.env, 0);
        const Matrix obs = Matrix::from_rows({env->reset()});
        Matrix g;
        if (gated()) g = repeat_gate(population_.rows()[i].as_gate(), 1);
        const Matrix head = model_.actor.predict(obs, gated() ? &g : nullptr);
        return {head.row(0).begin(), head.row(0).end()};
    }

private:
    bool gated() const noexcept { return cfg_.algorithm != Algorithm::baseline; }
    bool budget_exhausted() const noexcept { return timesteps_ >= cfg_.total_timesteps; }

    static std::optional<double> mean_of(const std::vector<double>& v) {
        if (v.empty()) return std::nullopt;
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }

    std::optional<double> recent_mean() const {
        if (recent_.empty()) return std::nullopt;
        return std::accumulate(recent_.begin(), recent_.end(), 0.0) / static_cast<double>(recent_.size());
    }

    void step_chunk(std::size_t T, const Matrix* gates, Phase phase, std::vector<double>& returns) {
        RolloutBatch batch = collect(envs_, model_, gates, T, action_rngs_, cfg_.workers);
        timesteps_ += static_cast<std::uint64_t>(batch.size());
        for (const auto& e : finish_episodes(tracker_, batch, table_, phase)) {
            returns.push_back(e.total_return);
            recent_.push_back(e.total_return);
            if (recent_.size() > 100) recent_.pop_front();
        }
        if (cfg_.algorithm == Algorithm::separated && phase == Phase::ga_elite) return;
        update(batch, phase);
    }

    void reproduce(std::size_t elite) {
        if (!gated()) {
            population_.set_elite(elite);
            return;
        }
        if (cfg_.algorithm == Algorithm::random_gate) {
            population_.set_elite(elite);
            for (std::size_t i = 0; i < population_.size(); ++i)
                if (i != elite)
                    population_.set_row(i, random_chromosome(model_.gate_width(), cfg_.genetic.keep_prob, genetics_));
            return;
        }
        if (table_.any_defined()) {
            population_.set_elite(elite);
            population_ = next_generation(population_, table_, cfg_.genetic, genetics_);
        }
    }

    std::vector<TrajectoryPoint> toy_points(std::size_t elite) const {
        std::vector<TrajectoryPoint> pts;
        for (std::size_t i = 0; i < population_.size(); ++i) {
            const auto p = mean_action(i);
            pts.push_back({generation_, i, p[0], p[1], toy2d_reward(p[0], p[1], Toy2DSurface::standard()),
                           i == elite});
        }
        return pts;
    }

    /// Gradient step(s) on one batch, differentiated through the elite gate only.
    void update(const RolloutBatch& batch, Phase phase) {
        const std::size_t N = batch.actors;
        const std::size_t T = batch.horizon;

        std::vector<double> adv(batch.size()), ret(batch.size());
        for (std::size_t i = 0; i < N; ++i) {
            const auto r = batch.actor_rewards(i);
            const auto v = batch.actor_values(i);
            const auto d = batch.actor_dones(i);
            const auto a = cfg_.learner == Learner::a2c
                               ? k_step_advantage(r, v, d, cfg_.gamma, cfg_.k_steps ? cfg_.k_steps : T)
                               : gae(r, v, d, cfg_.gamma, cfg_.gae_lambda);
            for (std::size_t t = 0; t < T; ++t) {
                adv[batch.index(t, i)] = a[t];
                ret[batch.index(t, i)] = a[t] + v[t];
            }
        }

        const auto gate = elite_gate();
        std::vector<std::size_t> samples;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            if (cfg_.elite_only_gradients && phase == Phase::ga_elite && gate && !batch.gates.empty()) {
                const auto row = batch.gates.row(batch.actor_index[k]);
                if (!std::equal(row.begin(), row.end(), gate->begin(), gate->end())) continue;
            }
            samples.push_back(k);
        }
        if (samples.empty()) return;

        UpdateRecord rec;
        rec.generation = generation_;
        rec.phase = phase;
        rec.elite_index = population_.elite();
        rec.samples = samples.size();

        if (cfg_.learner == Learner::a2c) {
            accumulate(rec, gradient_step(batch, samples, adv, ret, gate));
        } else {
            const std::size_t mb = std::min(cfg_.minibatch_size, samples.size());
            for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
                shuffle(samples);
                for (std::size_t start = 0; start < samples.size(); start += mb) {
                    const std::vector<std::size_t> part(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                                        samples.begin() + static_cast<std::ptrdiff_t>(
                                                                              std::min(start + mb, samples.size())));
                    accumulate(rec, gradient_step(batch, part, adv, ret, gate));
                }
            }
        }
        const double inv = 1.0 / static_cast<double>(rec.optimizer_steps);
        rec.loss *= inv;
        rec.policy_loss *= inv;
        rec.value_loss *= inv;
        rec.entropy *= inv;
        rec.grad_norm *= inv;
        rec.clip_fraction *= inv;
        rec.timestep = timesteps_;
        rec.mean_return = recent_mean();
        if (observer_) observer_->on_update(rec);
    }

    struct StepStats {
        LossTerms terms;
        double grad_norm = 0.0;
    };

    static void accumulate(UpdateRecord& rec, const StepStats& s) {
        rec.loss += s.terms.total;
        rec.policy_loss += s.terms.policy;
        rec.value_loss += s.terms.value;
        rec.entropy += s.terms.entropy;
        rec.clip_fraction += s.terms.clip_fraction;
        rec.grad_norm += s.grad_norm;
        ++rec.optimizer_steps;
    }

    void shuffle(std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[minibatch_.below(i)]);
    }

    StepStats gradient_step(const RolloutBatch& batch, const std::vector<std::size_t>& idx,
                            const std::vector<double>& all_adv, const std::vector<double>& all_ret,
                            const std::optional<std::vector<double>>& gate) {
        const std::size_t B = idx.size();
        Matrix obs(B, batch.observations.cols());
        std::vector<double> adv(B), ret(B), old_logp(B);
        for (std::size_t r = 0; r < B; ++r) {
            obs.set_row(r, batch.observations.row(idx[r]));
            adv[r] = all_adv[idx[r]];
            ret[r] = all_ret[idx[r]];
            old_logp[r] = batch.behavior_logp[idx[r]];
        }
        if (cfg_.normalize_advantages) normalize_advantages(adv);

        const Matrix gates = gate ? repeat_gate(*gate, B) : Matrix{};
        const auto actor_cache = model_.actor.forward(obs, gate ? &gates : nullptr);
        const auto critic_cache = model_.critic.forward(obs);
        const Matrix& head = actor_cache.output();
        std::vector<double> values(B);
        for (std::size_t r = 0; r < B; ++r) values[r] = critic_cache.output()(r, 0);

        HeadEvaluation eval;
        std::vector<int> disc;
        Matrix cont;
        if (model_.continuous()) {
            cont = gather_rows(batch.continuous_actions, idx);
            eval = evaluate_gaussian(head, model_.log_std, cont);
        } else {
            for (auto k : idx) disc.push_back(batch.discrete_actions[k]);
            eval = evaluate_categorical(head, disc);
        }

        const LossCoefficients coefs{cfg_.value_coef, cfg_.entropy_coef};
        StepStats s;
        s.terms = cfg_.learner == Learner::a2c
                      ? a2c_loss(eval.logp, adv, values, ret, eval.entropy, coefs)
                      : ppo_clip_loss(eval.logp, old_logp, adv, cfg_.clip_eps, values, ret, eval.entropy, coefs);

        std::vector<double> g_actor, g_log_std;
        if (model_.continuous()) {
            auto g = gaussian_backward(head, model_.log_std, cont, s.terms.d_logp, s.terms.d_entropy);
            g_actor = model_.actor.backward(actor_cache, g.d_mean);
            g_log_std = std::move(g.d_log_std);
        } else {
            g_actor = model_.actor.backward(actor_cache,
                                            categorical_backward(head, disc, s.terms.d_logp, s.terms.d_entropy));
        }
        Matrix d_values(B, 1);
        for (std::size_t r = 0; r < B; ++r) d_values(r, 0) = s.terms.d_values[r];
        auto g_critic = model_.critic.backward(critic_cache, d_values);

        std::vector<std::span<double>> blocks{g_actor, g_critic};
        if (!g_log_std.empty()) blocks.emplace_back(g_log_std);
        s.grad_norm = clip_global_norm(blocks, cfg_.max_grad_norm);
        if (!std::isfinite(s.grad_norm))
            throw NumericError("non-finite gradient at timestep " + std::to_string(timesteps_) + ", generation " +
                               std::to_string(generation_));

        actor_opt_.step(model_.actor.parameters(), g_actor);
        critic_opt_.step(model_.critic.parameters(), g_critic);
        if (!g_log_std.empty()) {
            log_std_opt_.step(model_.log_std, g_log_std);
            for (double& v : model_.log_std) v = std::clamp(v, kLogStdMin, kLogStdMax);
        }
        return s;
    }

    RunConfig cfg_;
    EnvSpec spec_;
    ActorCritic model_;
    Optimizer actor_opt_, critic_opt_, log_std_opt_;
    Rng genetics_, minibatch_;
    std::vector<Rng> action_rngs_;
    Population population_;
    FitnessTable table_;
    EpisodeTracker tracker_;
    VecEnv envs_;
    std::deque<double> recent_;
    std::uint64_t timesteps_ = 0;
    std::size_t generation_ = 0;
    TrainingObserver* observer_ = nullptr;
};

}  // namespace g2n
