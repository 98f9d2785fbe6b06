#pragma once

/// Run directory files: metrics.csv (one row per update), generations.jsonl (one
/// report per generation) and trajectories.jsonl (toy-surface mean actions).

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "g2n/error.hpp"
#include "g2n/trainer.hpp"

namespace g2n {

/// Shortest text that reads back to the same double; "nan"/"inf" spelled out.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

inline const char* kMetricsHeader =
    "timestep,generation,phase,mean_return,loss,policy_loss,value_loss,entropy,grad_norm,clip_fraction,samples,"
    "optimizer_steps,elite_index";

inline std::string metrics_row(const UpdateRecord& r) {
    return std::to_string(r.timestep) + "," + std::to_string(r.generation) + "," + phase_name(r.phase) + "," +
           format_optional(r.mean_return) + "," + format_number(r.loss) + "," + format_number(r.policy_loss) + "," +
           format_number(r.value_loss) + "," + format_number(r.entropy) + "," + format_number(r.grad_norm) + "," +
           format_number(r.clip_fraction) + "," + std::to_string(r.samples) + "," +
           std::to_string(r.optimizer_steps) + "," + std::to_string(r.elite_index);
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json report_to_json(const GenerationReport& r) {
    nlohmann::json fitness = nlohmann::json::array();
    for (const auto& f : r.fitness) fitness.push_back(optional_json(f));
    return {{"generation", r.generation},
            {"fitness", fitness},
            {"episodes", r.episodes},
            {"elite_before", r.elite_before},
            {"elite_after", r.elite_after},
            {"elite_changed", r.elite_changed},
            {"all_undefined", r.all_undefined},
            {"timesteps", r.timesteps},
            {"elite_phase_steps", r.elite_phase_steps},
            {"ga_phase_steps", r.ga_phase_steps},
            {"elite_phase_mean_return", optional_json(r.elite_phase_mean_return)},
            {"ga_phase_mean_return", optional_json(r.ga_phase_mean_return)},
            {"elite_fitness", optional_json(r.elite_fitness)},
            {"top_fitness", optional_json(r.top_fitness)},
            {"population_fitness", optional_json(r.population_fitness)},
            {"elite_eval", optional_json(r.elite_eval)}};
}

inline nlohmann::json trajectory_to_json(const TrajectoryPoint& p) {
    return {{"gen", p.generation}, {"actor", p.actor}, {"x", p.x}, {"y", p.y}, {"reward", p.reward},
            {"is_elite", p.is_elite}};
}

/// Streams trainer events into the three run files under `dir`.
class RunWriter final : public TrainingObserver {
public:
    explicit RunWriter(const std::string& dir)
        : metrics_(dir + "/metrics.csv"), generations_(dir + "/generations.jsonl"),
          trajectories_(dir + "/trajectories.jsonl") {
        if (!metrics_ || !generations_ || !trajectories_) throw ConfigError("cannot create run files in " + dir);
        metrics_ << kMetricsHeader << '\n';
    }

    void on_update(const UpdateRecord& r) override { metrics_ << metrics_row(r) << '\n'; }
    void on_generation(const GenerationReport& r) override {
        generations_ << report_to_json(r).dump() << '\n';
        generations_.flush();
        metrics_.flush();
    }
    void on_trajectory(const std::vector<TrajectoryPoint>& pts) override {
        for (const auto& p : pts) trajectories_ << trajectory_to_json(p).dump() << '\n';
    }

private:
    std::ofstream metrics_;
    std::ofstream generations_;
    std::ofstream trajectories_;
};

}  // namespace g2n
