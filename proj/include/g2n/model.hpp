#pragma once

#include <algorithm>
#include <vector>

#include <json.hpp>

#include "g2n/envs.hpp"
#include "g2n/network.hpp"
#include "g2n/policy.hpp"

namespace g2n {

struct NetworkConfig {
    std::vector<std::size_t> actor_hidden{64, 64};
    std::vector<std::size_t> critic_hidden{64, 64};
    double hidden_gain = std::numbers::sqrt2;
    double policy_output_gain = 0.01;
    double value_output_gain = 1.0;
    double init_log_std = 0.0;
};

/// Gated actor (plus a learned state-independent log-std for continuous actions)
/// and a single ungated critic.
struct ActorCritic {
    Mlp actor;
    std::vector<double> log_std;
    Mlp critic;
    ActionSpace action_space;

    std::size_t gate_width() const { return actor.gate_width(); }
    bool continuous() const { return action_space.kind == ActionKind::continuous; }
};

inline ActorCritic make_actor_critic(const EnvSpec& env, const NetworkConfig& cfg, Rng& rng) {
    ActorCritic m;
    MlpSpec actor_spec{env.observation_dim, cfg.actor_hidden, env.action.policy_outputs(), true,
                       cfg.hidden_gain, cfg.policy_output_gain};
    MlpSpec critic_spec{env.observation_dim, cfg.critic_hidden, 1, false, cfg.hidden_gain, cfg.value_output_gain};
    m.actor = Mlp(actor_spec, rng);
    m.critic = Mlp(critic_spec, rng);
    m.action_space = env.action;
    if (env.action.kind == ActionKind::continuous)
        m.log_std.assign(env.action.dim, std::clamp(cfg.init_log_std, kLogStdMin, kLogStdMax));
    return m;
}

/// Environment action for a policy sample: continuous samples are clipped to the box.
inline Action to_env_action(const ActionSpace& space, int discrete, std::span<const double> continuous) {
    Action a;
    if (space.kind == ActionKind::discrete) {
        a.discrete = discrete;
    } else {
        a.continuous.assign(continuous.begin(), continuous.end());
        for (double& v : a.continuous) v = std::clamp(v, space.low, space.high);
    }
    return a;
}

inline nlohmann::json actor_critic_to_json(const ActorCritic& m) {
    return {{"actor", mlp_to_json(m.actor)}, {"critic", mlp_to_json(m.critic)}, {"log_std", m.log_std}};
}

}  // namespace g2n
