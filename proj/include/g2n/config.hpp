#pragma once

/// Run configuration and its JSON loader.
///
/// Config files are flat JSON objects. Missing keys take defaults chosen by the base
/// learner (A2C: RMSProp, 64 actors, 500-step elite phase, 20-episode GA phase;
/// PPO: Adam 3e-4, horizon 512, 10 epochs of 64-sample minibatches, 8 actors) and,
/// for the toy surface, by the toy settings (8 actors, keep 0.3, horizon 32, Adam 1e-4,
/// 2 epochs of 16, no elite phase, 200-episode GA phase). Unknown keys are rejected.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "g2n/envs.hpp"
#include "g2n/error.hpp"
#include "g2n/genome.hpp"
#include "g2n/log.hpp"
#include "g2n/model.hpp"
#include "g2n/optim.hpp"

namespace g2n {

enum class Algorithm { g2ac, g2ppo, random_gate, separated, baseline };
enum class Learner { a2c, ppo };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::g2ac: return "g2ac";
        case Algorithm::g2ppo: return "g2ppo";
        case Algorithm::random_gate: return "random_gate";
        case Algorithm::separated: return "separated";
        case Algorithm::baseline: return "baseline";
    }
    return "?";
}

inline std::optional<Algorithm> parse_algorithm(const std::string& s) {
    for (auto a : {Algorithm::g2ac, Algorithm::g2ppo, Algorithm::random_gate, Algorithm::separated,
                   Algorithm::baseline})
        if (s == algorithm_name(a)) return a;
    return std::nullopt;
}

inline const char* learner_name(Learner l) { return l == Learner::a2c ? "a2c" : "ppo"; }

struct RunConfig {
    Algorithm algorithm = Algorithm::g2ppo;
    Learner learner = Learner::ppo;
    std::string env = "pointreacher";
    GeneticConfig genetic;

    std::size_t elite_phase_steps = 10240;  // per actor
    std::size_t ga_phase_episodes = 5;      // per actor
    /// GA+elite phase stops after cap_factor * episodes * max_episode_steps steps per actor.
    double ga_phase_cap_factor = 4.0;

    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 3e-4;
    double rmsprop_alpha = 0.99;
    double rmsprop_eps = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    std::size_t horizon = 512;
    std::size_t k_steps = 0;  // A2C bootstrap window; 0 means the whole horizon chunk
    double gamma = 0.99;
    double gae_lambda = 0.95;
    std::size_t epochs = 10;
    std::size_t minibatch_size = 64;
    double clip_eps = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    double max_grad_norm = 0.5;
    bool normalize_advantages = true;
    /// Gradient updates use only samples collected under the elite chromosome.
    bool elite_only_gradients = false;

    NetworkConfig network;

    std::uint64_t total_timesteps = 1'000'000;
    std::size_t max_generations = 0;  // 0: unlimited
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    std::size_t eval_episodes = 0;  // greedy evaluation of the elite after each generation
    std::size_t eval_interval = 1;
    bool trajectory_log = false;

    std::size_t population_size() const { return genetic.population_size; }

    std::vector<std::string> validate() const {
        auto errors = genetic.validate();
        auto positive = [&](const char* name, double v) {
            if (!(v > 0.0) || !std::isfinite(v)) errors.push_back(std::string(name) + " must be > 0");
        };
        auto unit = [&](const char* name, double v, bool open_low) {
            const bool ok = open_low ? (v > 0.0 && v <= 1.0) : (v >= 0.0 && v <= 1.0);
            if (!ok)
                errors.push_back(std::string(name) + (open_low ? " must be in (0, 1]" : " must be in [0, 1]") +
                                 ", got " + std::to_string(v));
        };
        if (!is_known_env(env)) errors.push_back("env must be one of toy2d, cartpole, pointreacher; got '" + env + "'");
        if (horizon < 1) errors.emplace_back("horizon must be >= 1");
        if (epochs < 1) errors.emplace_back("epochs must be >= 1");
        if (minibatch_size < 1) errors.emplace_back("minibatch_size must be >= 1");
        if (workers < 1) errors.emplace_back("workers must be >= 1");
        if (ga_phase_episodes < 1) errors.emplace_back("ga_phase_episodes must be >= 1");
        if (!(ga_phase_cap_factor >= 1.0)) errors.emplace_back("ga_phase_cap_factor must be >= 1");
        positive("learning_rate", learning_rate);
        unit("gamma", gamma, true);
        unit("gae_lambda", gae_lambda, false);
        unit("rmsprop_alpha", rmsprop_alpha, false);
        unit("adam_beta1", adam_beta1, false);
        unit("adam_beta2", adam_beta2, false);
        positive("rmsprop_eps", rmsprop_eps);
        positive("adam_eps", adam_eps);
        if (!(clip_eps > 0.0 && clip_eps < 1.0)) errors.emplace_back("clip_eps must be in (0, 1)");
        if (!(value_coef >= 0.0)) errors.emplace_back("value_coef must be >= 0");
        if (!(entropy_coef >= 0.0)) errors.emplace_back("entropy_coef must be >= 0");
        if (!(max_grad_norm >= 0.0)) errors.emplace_back("max_grad_norm must be >= 0");
        if (network.actor_hidden.empty()) errors.emplace_back("actor_hidden needs at least one layer");
        for (auto w : network.actor_hidden)
            if (w < 1) errors.emplace_back("actor_hidden widths must be >= 1");
        for (auto w : network.critic_hidden)
            if (w < 1) errors.emplace_back("critic_hidden widths must be >= 1");
        if (!(network.init_log_std >= kLogStdMin && network.init_log_std <= kLogStdMax))
            errors.emplace_back("init_log_std must be in [-20, 2]");
        if (eval_interval < 1) errors.emplace_back("eval_interval must be >= 1");
        if (is_known_env(env)) {
            const auto spec = environment_spec(env);
            if (algorithm == Algorithm::g2ac && spec.action.kind != ActionKind::discrete)
                errors.emplace_back("g2ac needs a discrete-action env");
            if (learner == Learner::a2c && spec.action.kind == ActionKind::continuous &&
                algorithm == Algorithm::g2ac)
                errors.emplace_back("g2ac cannot drive a continuous env");
        }
        return errors;
    }
};

/// Defaults for a given algorithm/env pair, before any user overrides.
inline RunConfig default_config(Algorithm algorithm, const std::string& env, std::optional<Learner> learner = {}) {
    RunConfig c;
    c.algorithm = algorithm;
    c.env = env;
    if (learner) {
        c.learner = *learner;
    } else if (algorithm == Algorithm::g2ac) {
        c.learner = Learner::a2c;
    } else if (algorithm == Algorithm::g2ppo) {
        c.learner = Learner::ppo;
    } else {
        const bool discrete = is_known_env(env) && environment_spec(env).action.kind == ActionKind::discrete;
        c.learner = discrete ? Learner::a2c : Learner::ppo;
    }

    if (c.learner == Learner::a2c) {
        c.optimizer = OptimizerKind::rmsprop;
        c.learning_rate = 7e-4;
        c.rmsprop_eps = 1e-5;
        c.rmsprop_alpha = 0.99;
        c.genetic.population_size = 64;
        c.elite_phase_steps = 500;
        c.ga_phase_episodes = 20;
        c.horizon = 5;
        c.epochs = 1;
        c.minibatch_size = 64;
        c.entropy_coef = 0.01;
        c.normalize_advantages = false;
    } else {
        c.optimizer = OptimizerKind::adam;
        c.learning_rate = 3e-4;
        c.genetic.population_size = 8;
        c.elite_phase_steps = 10240;
        c.ga_phase_episodes = 5;
        c.horizon = 512;
        c.epochs = 10;
        c.minibatch_size = 64;
        c.entropy_coef = 0.0;
        c.normalize_advantages = true;
    }
    c.genetic.keep_prob = 0.8;
    c.genetic.mutation_prob = 0.03;
    c.genetic.crossover_prob = 0.8;
    c.gamma = 0.99;
    c.gae_lambda = 0.95;

    if (env == "toy2d") {
        c.genetic.population_size = 8;
        c.genetic.keep_prob = 0.3;
        c.horizon = 32;
        c.optimizer = OptimizerKind::adam;
        c.learning_rate = 1e-4;
        c.epochs = 2;
        c.minibatch_size = 16;
        c.elite_phase_steps = 0;
        c.ga_phase_episodes = 200;
        c.elite_only_gradients = true;
        c.trajectory_log = true;
        c.max_generations = 50;
        // A wide output layer lets single gate flips move the emitted point across the box;
        // a narrow noise keeps the smoothed surface's global peak above the local ones.
        c.network.policy_output_gain = 20.0;
        c.network.init_log_std = -2.5;
    }
    c.genetic.num_parents = GeneticConfig::default_parents(c.genetic.population_size);
    return c;
}

namespace detail {

inline std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1, line_start = 0;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') {
            ++line;
            line_start = i + 1;
        }
    const std::size_t line_end = text.find('\n', line_start);
    const std::string snippet = text.substr(line_start, line_end == std::string::npos ? std::string::npos
                                                                                       : line_end - line_start);
    return "line " + std::to_string(line) + ", column " + std::to_string(byte - line_start + 1) + ": " + snippet;
}

inline std::string key_location(const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) return {};
    return " (" + line_context(text, pos) + ")";
}

inline std::vector<std::string> known_keys() {
    return {"algorithm",        "learner",         "env",
            "population_size",  "keep_prob",       "crossover_prob",
            "mutation_prob",    "num_parents",     "elite_phase_steps",
            "ga_phase_episodes", "ga_phase_cap_factor", "optimizer",
            "learning_rate",    "rmsprop_alpha",   "rmsprop_eps",
            "adam_beta1",       "adam_beta2",      "adam_eps",
            "horizon",          "k_steps",         "gamma",
            "gae_lambda",       "epochs",          "minibatch_size",
            "clip_eps",         "value_coef",      "entropy_coef",
            "max_grad_norm",    "normalize_advantages", "elite_only_gradients",
            "actor_hidden",     "critic_hidden",   "hidden_gain",
            "policy_output_gain", "value_output_gain", "init_log_std",
            "total_timesteps",  "max_generations", "seed",
            "workers",          "eval_episodes",   "eval_interval",
            "trajectory_log"};
}

}  // namespace detail

/// Builds a validated RunConfig from a parsed JSON object. `source` (the raw text, if
/// known) is used to point validation messages at the offending line.
inline RunConfig config_from_json(const nlohmann::json& j, const std::string& source = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    std::vector<std::string> errors;
    const auto known = detail::known_keys();
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            errors.push_back("unknown key '" + key + "'" + detail::key_location(source, key));

    Algorithm algorithm = Algorithm::g2ppo;
    if (j.contains("algorithm")) {
        const auto a = j["algorithm"].is_string() ? parse_algorithm(j["algorithm"].get<std::string>()) : std::nullopt;
        if (!a)
            errors.push_back("algorithm must be one of g2ac, g2ppo, random_gate, separated, baseline" +
                             detail::key_location(source, "algorithm"));
        else
            algorithm = *a;
    }
    std::optional<Learner> learner;
    if (j.contains("learner")) {
        const auto v = j["learner"].is_string() ? j["learner"].get<std::string>() : std::string{};
        if (v == "a2c")
            learner = Learner::a2c;
        else if (v == "ppo")
            learner = Learner::ppo;
        else
            errors.push_back("learner must be a2c or ppo" + detail::key_location(source, "learner"));
    }
    std::string env = algorithm == Algorithm::g2ac ? "cartpole" : "pointreacher";
    if (j.contains("env") && j["env"].is_string()) env = j["env"].get<std::string>();

    RunConfig c = default_config(algorithm, env, learner);
    const bool explicit_parents = j.contains("num_parents");

    auto read = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            using T = std::decay_t<decltype(field)>;
            if constexpr (std::is_same_v<T, bool>) {
                if (!j[key].is_boolean()) throw std::invalid_argument("expected a boolean");
                field = j[key].get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!j[key].is_number_integer() || (j[key].is_number_integer() && j[key].get<std::int64_t>() < 0))
                    throw std::invalid_argument("expected a non-negative integer");
                field = j[key].get<T>();
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!j[key].is_number()) throw std::invalid_argument("expected a number");
                field = j[key].get<T>();
            } else {
                field = j[key].get<T>();
            }
        } catch (const std::exception& e) {
            errors.push_back(std::string(key) + ": " + e.what() + detail::key_location(source, key));
        }
    };

    read("population_size", c.genetic.population_size);
    read("keep_prob", c.genetic.keep_prob);
    read("crossover_prob", c.genetic.crossover_prob);
    read("mutation_prob", c.genetic.mutation_prob);
    read("num_parents", c.genetic.num_parents);
    if (!explicit_parents) c.genetic.num_parents = GeneticConfig::default_parents(c.genetic.population_size);
    read("elite_phase_steps", c.elite_phase_steps);
    read("ga_phase_episodes", c.ga_phase_episodes);
    read("ga_phase_cap_factor", c.ga_phase_cap_factor);
    if (j.contains("optimizer")) {
        const auto v = j["optimizer"].is_string() ? j["optimizer"].get<std::string>() : std::string{};
        if (v == "adam")
            c.optimizer = OptimizerKind::adam;
        else if (v == "rmsprop")
            c.optimizer = OptimizerKind::rmsprop;
        else
            errors.push_back("optimizer must be adam or rmsprop" + detail::key_location(source, "optimizer"));
    }
    read("learning_rate", c.learning_rate);
    read("rmsprop_alpha", c.rmsprop_alpha);
    read("rmsprop_eps", c.rmsprop_eps);
    read("adam_beta1", c.adam_beta1);
    read("adam_beta2", c.adam_beta2);
    read("adam_eps", c.adam_eps);
    read("horizon", c.horizon);
    read("k_steps", c.k_steps);
    read("gamma", c.gamma);
    read("gae_lambda", c.gae_lambda);
    read("epochs", c.epochs);
    read("minibatch_size", c.minibatch_size);
    read("clip_eps", c.clip_eps);
    read("value_coef", c.value_coef);
    read("entropy_coef", c.entropy_coef);
    read("max_grad_norm", c.max_grad_norm);
    read("normalize_advantages", c.normalize_advantages);
    read("elite_only_gradients", c.elite_only_gradients);
    read("actor_hidden", c.network.actor_hidden);
    read("critic_hidden", c.network.critic_hidden);
    read("hidden_gain", c.network.hidden_gain);
    read("policy_output_gain", c.network.policy_output_gain);
    read("value_output_gain", c.network.value_output_gain);
    read("init_log_std", c.network.init_log_std);
    read("total_timesteps", c.total_timesteps);
    read("max_generations", c.max_generations);
    read("seed", c.seed);
    read("workers", c.workers);
    read("eval_episodes", c.eval_episodes);
    read("eval_interval", c.eval_interval);
    read("trajectory_log", c.trajectory_log);

    if (errors.empty()) {
        for (auto& e : c.validate()) {
            const auto field = e.substr(0, e.find(' '));
            errors.push_back(e + detail::key_location(source, field));
        }
    }
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return c;
}

inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw ConfigError("config parse error at " + detail::line_context(text, byte) + "\n  " + e.what());
    }
    return config_from_json(j, text);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    return {{"algorithm", algorithm_name(c.algorithm)},
            {"learner", learner_name(c.learner)},
            {"env", c.env},
            {"population_size", c.genetic.population_size},
            {"keep_prob", c.genetic.keep_prob},
            {"crossover_prob", c.genetic.crossover_prob},
            {"mutation_prob", c.genetic.mutation_prob},
            {"num_parents", c.genetic.num_parents},
            {"elite_phase_steps", c.elite_phase_steps},
            {"ga_phase_episodes", c.ga_phase_episodes},
            {"ga_phase_cap_factor", c.ga_phase_cap_factor},
            {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "rmsprop"},
            {"learning_rate", c.learning_rate},
            {"rmsprop_alpha", c.rmsprop_alpha},
            {"rmsprop_eps", c.rmsprop_eps},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"horizon", c.horizon},
            {"k_steps", c.k_steps},
            {"gamma", c.gamma},
            {"gae_lambda", c.gae_lambda},
            {"epochs", c.epochs},
            {"minibatch_size", c.minibatch_size},
            {"clip_eps", c.clip_eps},
            {"value_coef", c.value_coef},
            {"entropy_coef", c.entropy_coef},
            {"max_grad_norm", c.max_grad_norm},
            {"normalize_advantages", c.normalize_advantages},
            {"elite_only_gradients", c.elite_only_gradients},
            {"actor_hidden", c.network.actor_hidden},
            {"critic_hidden", c.network.critic_hidden},
            {"hidden_gain", c.network.hidden_gain},
            {"policy_output_gain", c.network.policy_output_gain},
            {"value_output_gain", c.network.value_output_gain},
            {"init_log_std", c.network.init_log_std},
            {"total_timesteps", c.total_timesteps},
            {"max_generations", c.max_generations},
            {"seed", c.seed},
            {"workers", c.workers},
            {"eval_episodes", c.eval_episodes},
            {"eval_interval", c.eval_interval},
            {"trajectory_log", c.trajectory_log}};
}

/// Logs every resolved value at info level.
inline void log_config(const RunConfig& c) {
    const auto j = config_to_json(c);
    for (const auto& [k, v] : j.items()) log::info("config " + k + " = " + v.dump());
}

}  // namespace g2n
