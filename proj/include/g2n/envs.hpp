#pragma once

/// Desk-scale environments: the multimodal 2D toy surface, cart-pole, and a
/// continuous point-mass reacher.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "g2n/error.hpp"
#include "g2n/random.hpp"

namespace g2n {

enum class ActionKind { discrete, continuous };

struct ActionSpace {
    ActionKind kind = ActionKind::discrete;
    std::size_t n = 0;    // discrete choices
    std::size_t dim = 0;  // continuous dimensions
    double low = -1.0;
    double high = 1.0;

    std::size_t policy_outputs() const { return kind == ActionKind::discrete ? n : dim; }
};

struct EnvSpec {
    std::string name;
    std::size_t observation_dim = 1;
    ActionSpace action;
    std::size_t max_episode_steps = 1;
};

struct Action {
    int discrete = 0;
    std::vector<double> continuous;
};

struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
};

class Environment {
public:
    virtual ~Environment() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<double> reset() = 0;
    /// After done, the caller must reset before stepping again.
    virtual StepResult step(const Action& action) = 0;
};

// ---------------------------------------------------------------- 2D toy surface

struct Bump {
    double x = 0.0;
    double y = 0.0;
    double amplitude = 0.0;
    double width = 0.1;
};

struct Toy2DSurface {
    std::vector<Bump> bumps;
    std::size_t global = 0;

    /// One narrow global peak in the upper-right corner and three broader, lower local peaks.
    static Toy2DSurface standard() {
        return {{{0.7, 0.7, 1.0, 0.1}, {-0.6, -0.6, 0.6, 0.15}, {-0.5, 0.6, 0.5, 0.15}, {0.6, -0.5, 0.5, 0.15}}, 0};
    }

    double amplitude_sum() const {
        double s = 0.0;
        for (const auto& b : bumps) s += b.amplitude;
        return s;
    }

    double global_amplitude() const { return bumps.at(global).amplitude; }

    /// The global peak must beat every other amplitude by at least 20%.
    bool valid() const {
        if (global >= bumps.size()) return false;
        for (std::size_t i = 0; i < bumps.size(); ++i)
            if (i != global && !(bumps[global].amplitude >= 1.2 * bumps[i].amplitude)) return false;
        return true;
    }
};

/// Sum of Gaussian bumps at (x, y) after clipping the point into [-1, 1]^2.
inline double toy2d_reward(double x, double y, const Toy2DSurface& surface) {
    x = std::clamp(x, -1.0, 1.0);
    y = std::clamp(y, -1.0, 1.0);
    double r = 0.0;
    for (const auto& b : surface.bumps) {
        const double dx = x - b.x;
        const double dy = y - b.y;
        r += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.width * b.width));
    }
    return r;
}

/// One-shot bandit: the observation is the constant vector [1], the action is the
/// (x, y) point, and the episode ends immediately with the surface value.
class Toy2DEnv final : public Environment {
public:
    explicit Toy2DEnv(Toy2DSurface surface = Toy2DSurface::standard())
        : surface_(std::move(surface)),
          spec_{"toy2d", 1, {ActionKind::continuous, 0, 2, -1.0, 1.0}, 1} {}

    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset() override { return {1.0}; }
    StepResult step(const Action& action) override {
        require(action.continuous.size() == 2, "toy2d expects a 2D action");
        return {{1.0}, toy2d_reward(action.continuous[0], action.continuous[1], surface_), true};
    }
    const Toy2DSurface& surface() const { return surface_; }

private:
    Toy2DSurface surface_;
    EnvSpec spec_;
};

inline StepResult toy2d_episode(double x, double y, const Toy2DSurface& surface = Toy2DSurface::standard()) {
    Toy2DEnv env(surface);
    env.reset();
    return env.step({0, {x, y}});
}

// ---------------------------------------------------------------- cart-pole

struct CartPoleState {
    double x = 0.0;
    double x_dot = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;
    friend bool operator==(const CartPoleState&, const CartPoleState&) = default;
};

struct CartPoleConstants {
    static constexpr double gravity = 9.8;
    static constexpr double cart_mass = 1.0;
    static constexpr double pole_mass = 0.1;
    static constexpr double total_mass = cart_mass + pole_mass;
    static constexpr double half_length = 0.5;
    static constexpr double pole_mass_length = pole_mass * half_length;
    static constexpr double force = 10.0;
    static constexpr double dt = 0.02;
    static constexpr double theta_limit = 12.0 * 2.0 * std::numbers::pi / 360.0;
    static constexpr double x_limit = 2.4;
    static constexpr std::size_t max_steps = 500;
};

struct CartPoleTransition {
    CartPoleState next;
    double reward = 1.0;
    bool done = false;
};

/// Explicit Euler step of the classic cart-pole; action 1 pushes right, 0 left.
inline CartPoleTransition cartpole_step(const CartPoleState& s, int action) {
    using C = CartPoleConstants;
    require(action == 0 || action == 1, "cart-pole action must be 0 or 1");
    const double force = action == 1 ? C::force : -C::force;
    const double cos_t = std::cos(s.theta);
    const double sin_t = std::sin(s.theta);
    const double temp = (force + C::pole_mass_length * s.theta_dot * s.theta_dot * sin_t) / C::total_mass;
    const double theta_acc = (C::gravity * sin_t - cos_t * temp) /
                             (C::half_length * (4.0 / 3.0 - C::pole_mass * cos_t * cos_t / C::total_mass));
    const double x_acc = temp - C::pole_mass_length * theta_acc * cos_t / C::total_mass;
    CartPoleTransition t;
    t.next.x = s.x + C::dt * s.x_dot;
    t.next.x_dot = s.x_dot + C::dt * x_acc;
    t.next.theta = s.theta + C::dt * s.theta_dot;
    t.next.theta_dot = s.theta_dot + C::dt * theta_acc;
    t.done = t.next.x < -C::x_limit || t.next.x > C::x_limit || t.next.theta < -C::theta_limit ||
             t.next.theta > C::theta_limit;
    return t;
}

class CartPoleEnv final : public Environment {
public:
    explicit CartPoleEnv(std::uint64_t seed) : rng_(seed) {}

    const EnvSpec& spec() const override { return spec_; }

    std::vector<double> reset() override {
        state_ = {rng_.uniform(-0.05, 0.05), rng_.uniform(-0.05, 0.05), rng_.uniform(-0.05, 0.05),
                  rng_.uniform(-0.05, 0.05)};
        steps_ = 0;
        return observe();
    }

    StepResult step(const Action& action) override {
        const auto t = cartpole_step(state_, action.discrete);
        state_ = t.next;
        ++steps_;
        return {observe(), t.reward, t.done || steps_ >= CartPoleConstants::max_steps};
    }

    const CartPoleState& state() const { return state_; }

private:
    std::vector<double> observe() const { return {state_.x, state_.x_dot, state_.theta, state_.theta_dot}; }

    Rng rng_;
    CartPoleState state_;
    std::size_t steps_ = 0;
    EnvSpec spec_{"cartpole", 4, {ActionKind::discrete, 2, 0, 0.0, 1.0}, CartPoleConstants::max_steps};
};

// ---------------------------------------------------------------- point reacher

struct ReacherState {
    std::array<double, 2> pos{};
    std::array<double, 2> vel{};
    std::array<double, 2> goal{};
    std::size_t steps = 0;
};

struct ReacherConstants {
    static constexpr double damping = 0.95;
    static constexpr double dt = 0.05;
    static constexpr double action_cost = 0.01;
    static constexpr double arena = 2.0;  // position is confined to [-arena, arena]^2
    static constexpr std::size_t max_steps = 200;
};

struct ReacherTransition {
    ReacherState next;
    double reward = 0.0;
    bool done = false;
};

/// Damped point mass driven by an acceleration in [-1, 1]^2 (actions are clipped).
/// Semi-implicit Euler: velocity first, then position with the new velocity.
/// Reward is -|pos - goal| - 0.01 |a|^2 at the new position.
inline ReacherTransition pointreacher_step(const ReacherState& s, std::span<const double> action) {
    using C = ReacherConstants;
    require(action.size() == 2, "point reacher expects a 2D action");
    ReacherTransition t;
    t.next = s;
    double cost = 0.0;
    double dist_sq = 0.0;
    for (std::size_t d = 0; d < 2; ++d) {
        const double a = std::clamp(action[d], -1.0, 1.0);
        cost += a * a;
        double v = C::damping * s.vel[d] + C::dt * a;
        double p = s.pos[d] + C::dt * v;
        if (p > C::arena || p < -C::arena) {
            p = std::clamp(p, -C::arena, C::arena);
            v = 0.0;
        }
        t.next.vel[d] = v;
        t.next.pos[d] = p;
        const double diff = p - s.goal[d];
        dist_sq += diff * diff;
    }
    t.next.steps = s.steps + 1;
    t.reward = -std::sqrt(dist_sq) - C::action_cost * cost;
    t.done = t.next.steps >= C::max_steps;
    return t;
}

/// Starts at the origin at rest; the goal is drawn uniformly from [-1, 1]^2 each episode.
/// Observation: position, velocity, goal - position.
class PointReacherEnv final : public Environment {
public:
    explicit PointReacherEnv(std::uint64_t seed) : rng_(seed) {}

    const EnvSpec& spec() const override { return spec_; }

    std::vector<double> reset() override {
        state_ = ReacherState{};
        state_.goal = {rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0)};
        return observe();
    }

    StepResult step(const Action& action) override {
        const auto t = pointreacher_step(state_, action.continuous);
        state_ = t.next;
        return {observe(), t.reward, t.done};
    }

    const ReacherState& state() const { return state_; }

private:
    std::vector<double> observe() const {
        return {state_.pos[0],   state_.pos[1],
                state_.vel[0],   state_.vel[1],
                state_.goal[0] - state_.pos[0], state_.goal[1] - state_.pos[1]};
    }

    Rng rng_;
    ReacherState state_;
    EnvSpec spec_{"pointreacher", 6, {ActionKind::continuous, 0, 2, -1.0, 1.0}, ReacherConstants::max_steps};
};

// ---------------------------------------------------------------- factory

inline bool is_known_env(const std::string& name) {
    return name == "toy2d" || name == "cartpole" || name == "pointreacher";
}

inline std::unique_ptr<Environment> make_environment(const std::string& name, std::uint64_t seed) {
    if (name == "toy2d") return std::make_unique<Toy2DEnv>();
    if (name == "cartpole") return std::make_unique<CartPoleEnv>(seed);
    if (name == "pointreacher") return std::make_unique<PointReacherEnv>(seed);
    throw ConfigError("unknown environment '" + name + "'");
}

inline EnvSpec environment_spec(const std::string& name) { return make_environment(name, 0)->spec(); }

}  // namespace g2n
