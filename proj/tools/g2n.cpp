// g2n: train, ablate, gradcheck, plotdata and sweep front-end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "g2n/g2n.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    bool force = false;
};

/// Writes into a fresh sibling directory and renames it over `out` at the end, so a
/// failed run never leaves a half-written run directory behind.
class StagedDir {
public:
    StagedDir(const std::string& out, bool force) : out_(out) {
        if (fs::exists(out_) && !force)
            throw g2n::ConfigError("output directory " + out + " exists; pass --force to replace it");
        const fs::path parent = out_.has_parent_path() ? out_.parent_path() : fs::path(".");
        fs::create_directories(parent);
        std::random_device rd;
        for (int attempt = 0; attempt < 100; ++attempt) {
            staging_ = parent / ("." + out_.filename().string() + ".tmp-" + std::to_string(rd()));
            if (fs::create_directory(staging_)) return;
        }
        throw g2n::ConfigError("cannot create a staging directory next to " + out);
    }
    ~StagedDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(staging_, ec);
        }
    }
    std::string path() const { return staging_.string(); }
    void commit() {
        if (fs::exists(out_)) fs::remove_all(out_);
        fs::rename(staging_, out_);
        committed_ = true;
    }

private:
    fs::path out_;
    fs::path staging_;
    bool committed_ = false;
};

g2n::RunConfig resolve(const RunFlags& f) {
    auto cfg = g2n::load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.workers) {
        cfg.workers = *f.workers;
        if (cfg.workers < 1) throw g2n::ConfigError("--workers must be >= 1");
    }
    return cfg;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw g2n::ConfigError("cannot write " + path.string());
}

/// Trains one configuration into `dir` and returns its generation reports.
std::vector<g2n::GenerationReport> train_into(const g2n::RunConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    write_json(dir / "config.json", g2n::config_to_json(cfg));
    g2n::log_config(cfg);
    g2n::Trainer trainer(cfg);
    std::vector<g2n::GenerationReport> reports;
    {
        g2n::RunWriter writer(dir.string());
        trainer.set_observer(&writer);
        while (!trainer.finished()) {
            reports.push_back(trainer.run_generation());
            const auto& r = reports.back();
            g2n::log::info("generation " + std::to_string(r.generation) + " timesteps " +
                           std::to_string(r.timesteps) + " elite " + std::to_string(r.elite_after) +
                           (r.elite_changed ? " (changed)" : ""));
        }
    }
    fs::create_directories(dir / "checkpoints");
    write_json(dir / "checkpoints" / "model.json", g2n::actor_critic_to_json(trainer.model()));
    write_json(dir / "checkpoints" / "population.json", g2n::population_to_json(trainer.population()));
    return reports;
}

struct RunSummary {
    std::size_t generations = 0;
    std::uint64_t timesteps = 0;
    std::size_t elite_changes = 0;
    std::optional<double> final_elite_eval;
    std::optional<double> best_elite_eval;
    std::optional<double> final_top_fitness;
    std::optional<double> final_population_fitness;
};

RunSummary summarize(const std::vector<g2n::GenerationReport>& reports) {
    RunSummary s;
    s.generations = reports.size();
    for (const auto& r : reports) {
        s.timesteps = r.timesteps;
        if (r.elite_changed) ++s.elite_changes;
        if (r.elite_eval) {
            s.final_elite_eval = r.elite_eval;
            if (!s.best_elite_eval || *r.elite_eval > *s.best_elite_eval) s.best_elite_eval = r.elite_eval;
        }
        if (r.top_fitness) s.final_top_fitness = r.top_fitness;
        if (r.population_fitness) s.final_population_fitness = r.population_fitness;
    }
    return s;
}

std::string summary_csv(const RunSummary& s) {
    return std::to_string(s.generations) + "," + std::to_string(s.timesteps) + "," +
           std::to_string(s.elite_changes) + "," + g2n::format_optional(s.final_elite_eval) + "," +
           g2n::format_optional(s.best_elite_eval) + "," + g2n::format_optional(s.final_top_fitness) + "," +
           g2n::format_optional(s.final_population_fitness);
}

constexpr const char* kSummaryColumns =
    "generations,timesteps,elite_changes,final_elite_eval,best_elite_eval,final_top_fitness,"
    "final_population_fitness";

int cmd_train(const RunFlags& f) {
    const auto cfg = resolve(f);
    StagedDir staged(f.out, f.force);
    train_into(cfg, staged.path());
    staged.commit();
    std::cout << "wrote " << f.out << "\n";
    return 0;
}

int cmd_ablate(const RunFlags& f) {
    const auto base = resolve(f);
    std::vector<g2n::Algorithm> variants;
    const bool discrete = g2n::environment_spec(base.env).action.kind == g2n::ActionKind::discrete;
    variants.push_back(base.algorithm == g2n::Algorithm::g2ac || base.algorithm == g2n::Algorithm::g2ppo
                           ? base.algorithm
                           : (discrete ? g2n::Algorithm::g2ac : g2n::Algorithm::g2ppo));
    for (auto a : {g2n::Algorithm::random_gate, g2n::Algorithm::separated, g2n::Algorithm::baseline})
        variants.push_back(a);

    StagedDir staged(f.out, f.force);
    std::ofstream csv(fs::path(staged.path()) / "comparison.csv");
    csv << "variant,seed," << kSummaryColumns << '\n';
    for (auto a : variants) {
        auto cfg = base;
        cfg.algorithm = a;
        const auto reports = train_into(cfg, fs::path(staged.path()) / g2n::algorithm_name(a));
        csv << g2n::algorithm_name(a) << ',' << cfg.seed << ',' << summary_csv(summarize(reports)) << '\n';
    }
    csv.close();
    staged.commit();
    std::cout << "wrote " << f.out << "/comparison.csv\n";
    return 0;
}

int cmd_sweep(const RunFlags& f) {
    const auto base = resolve(f);
    StagedDir staged(f.out, f.force);
    std::ofstream csv(fs::path(staged.path()) / "sweep.csv");
    csv << "mutation_prob,crossover_prob,seed," << kSummaryColumns << '\n';
    for (double m : {0.03, 0.1, 0.3})
        for (double c : {0.4, 0.8}) {
            auto cfg = base;
            cfg.genetic.mutation_prob = m;
            cfg.genetic.crossover_prob = c;
            std::ostringstream name;
            name << "m" << m << "_c" << c;
            const auto reports = train_into(cfg, fs::path(staged.path()) / name.str());
            csv << g2n::format_number(m) << ',' << g2n::format_number(c) << ',' << cfg.seed << ','
                << summary_csv(summarize(reports)) << '\n';
        }
    csv.close();
    staged.commit();
    std::cout << "wrote " << f.out << "/sweep.csv\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, const std::string& fault, bool zero) {
    g2n::GradientCheckOptions opt;
    opt.seed = seed;
    opt.instances = instances;
    opt.zero_network = zero;
    if (fault == "sign-flip-gate")
        opt.flip_gate_sign = true;
    else if (!fault.empty())
        throw g2n::ConfigError("unknown fault '" + fault + "' (known: sign-flip-gate)");
    const auto report = g2n::run_gradient_checks(opt);
    for (const auto& r : report.results) {
        std::printf("%s %-36s worst relative error %.3e (instance %zu, index %zu)\n", r.passed ? "ok  " : "FAIL",
                    r.name.c_str(), r.worst_relative_error, r.worst_instance, r.worst_index);
    }
    std::printf("%s: %zu instances, tolerance %.0e\n", report.passed() ? "passed" : "FAILED", report.instances,
                report.tolerance);
    return report.passed() ? 0 : 1;
}

/// Trailing moving average over `window` points.
std::vector<std::optional<double>> smooth(const std::vector<std::optional<double>>& v, std::size_t window) {
    std::vector<std::optional<double>> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t j = i + 1 > window ? i + 1 - window : 0; j <= i; ++j)
            if (v[j]) {
                sum += *v[j];
                ++n;
            }
        if (n) out[i] = sum / static_cast<double>(n);
    }
    return out;
}

int cmd_plotdata(const std::string& run, std::size_t window) {
    const fs::path dir(run);
    if (!fs::is_directory(dir)) throw g2n::ConfigError("run directory " + run + " does not exist");
    const fs::path gens = dir / "generations.jsonl";
    if (!fs::exists(gens) || fs::file_size(gens) == 0)
        throw g2n::ConfigError("no generation metrics in " + run + " (generations.jsonl missing or empty)");
    if (window < 1) throw g2n::ConfigError("--window must be >= 1");

    std::vector<json> rows;
    std::ifstream in(gens);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            // The last line of an in-progress run may be cut short.
            if (in.peek() == EOF) break;
            throw g2n::ConfigError(gens.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (rows.empty()) throw g2n::ConfigError("no generation metrics in " + run);

    auto column = [&](const char* key) {
        std::vector<std::optional<double>> v;
        for (const auto& r : rows)
            v.push_back(r.contains(key) && r[key].is_number() ? std::optional<double>(r[key].get<double>())
                                                              : std::nullopt);
        return v;
    };
    const auto pop = column("population_fitness");
    const auto elite = column("elite_fitness");
    const auto top = column("top_fitness");
    const auto spop = smooth(pop, window), selite = smooth(elite, window), stop = smooth(top, window);

    std::ostringstream curve;
    curve << "generation,timesteps,population_mean,elite,top,population_mean_smoothed,elite_smoothed,top_smoothed\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        curve << rows[i].value("generation", i) << ',' << rows[i].value("timesteps", std::uint64_t{0}) << ','
              << g2n::format_optional(pop[i]) << ',' << g2n::format_optional(elite[i]) << ','
              << g2n::format_optional(top[i]) << ',' << g2n::format_optional(spop[i]) << ','
              << g2n::format_optional(selite[i]) << ',' << g2n::format_optional(stop[i]) << '\n';
    }

    json trajectories = json::array();
    std::ifstream tin(dir / "trajectories.jsonl");
    while (tin && std::getline(tin, line))
        if (!line.empty()) trajectories.push_back(json::parse(line));

    // Both files appear together or not at all.
    const fs::path curve_tmp = dir / ".curves.csv.tmp", traj_tmp = dir / ".trajectories.json.tmp";
    {
        std::ofstream c(curve_tmp), t(traj_tmp);
        c << curve.str();
        t << trajectories.dump() << '\n';
        if (!c || !t) {
            fs::remove(curve_tmp);
            fs::remove(traj_tmp);
            throw g2n::ConfigError("cannot write plot data into " + run);
        }
    }
    fs::rename(curve_tmp, dir / "curves.csv");
    fs::rename(traj_tmp, dir / "trajectories.json");
    std::cout << "wrote " << (dir / "curves.csv").string() << " and " << (dir / "trajectories.json").string()
              << "\n";
    return 0;
}

void add_run_flags(CLI::App* sub, RunFlags& f) {
    sub->add_option("--config", f.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output run directory")->required();
    sub->add_option("--seed", f.seed, "override the config seed");
    sub->add_option("--workers", f.workers, "environment worker threads");
    sub->add_flag("--force", f.force, "replace an existing output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Genetic-gated actor-critic training"};
    app.require_subcommand(1);

    RunFlags train_flags, ablate_flags, sweep_flags;
    auto* train = app.add_subcommand("train", "train one configuration");
    add_run_flags(train, train_flags);
    auto* ablate = app.add_subcommand("ablate", "run the method, random_gate, separated and baseline");
    add_run_flags(ablate, ablate_flags);
    auto* sweep = app.add_subcommand("sweep", "mutation_prob x crossover_prob grid");
    add_run_flags(sweep, sweep_flags);

    std::uint64_t gc_seed = 0;
    std::size_t gc_instances = 20;
    std::string gc_fault;
    bool gc_zero = false;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
    gradcheck->add_option("--seed", gc_seed, "instance seed");
    gradcheck->add_option("--instances", gc_instances, "random instances per check");
    gradcheck->add_option("--fault", gc_fault, "inject a known bug (sign-flip-gate)");
    gradcheck->add_flag("--zero-network", gc_zero, "check networks whose parameters are all zero");

    std::string plot_run;
    std::size_t plot_window = 10;
    auto* plotdata = app.add_subcommand("plotdata", "learning-curve CSV and trajectory JSON from a run");
    plotdata->add_option("--run", plot_run, "run directory")->required();
    plotdata->add_option("--window", plot_window, "smoothing window in generations");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(train_flags);
        if (*ablate) return cmd_ablate(ablate_flags);
        if (*sweep) return cmd_sweep(sweep_flags);
        if (*gradcheck) return cmd_gradcheck(gc_seed, gc_instances, gc_fault, gc_zero);
        if (*plotdata) return cmd_plotdata(plot_run, plot_window);
    } catch (const g2n::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
