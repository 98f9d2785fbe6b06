#pragma once

/// Binary chromosomes, the population matrix, per-generation fitness bookkeeping and
/// the genetic operators (truncation selection, uniform crossover, bit-flip mutation,
/// strong elitism).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "g2n/error.hpp"
#include "g2n/log.hpp"
#include "g2n/random.hpp"

namespace g2n {

/// Gate vector for one hidden layer. Gene 1 keeps a unit open, 0 closes it.
class Chromosome {
public:
    Chromosome() = default;
    explicit Chromosome(std::size_t length, std::uint8_t value = 1) : genes_(length, value) {}
    explicit Chromosome(std::vector<std::uint8_t> genes) : genes_(std::move(genes)) {
        for (auto g : genes_) require(g <= 1, "chromosome genes must be 0 or 1");
    }

    std::size_t size() const noexcept { return genes_.size(); }
    std::uint8_t operator[](std::size_t i) const { return genes_[i]; }
    void set(std::size_t i, bool open) { genes_.at(i) = open ? 1 : 0; }
    void flip(std::size_t i) { genes_.at(i) ^= 1; }

    std::span<const std::uint8_t> genes() const noexcept { return genes_; }
    std::size_t count_open() const {
        return static_cast<std::size_t>(std::count(genes_.begin(), genes_.end(), 1));
    }

    /// Gate values as reals, ready to be multiplied into activations.
    std::vector<double> as_gate() const { return {genes_.begin(), genes_.end()}; }

    friend bool operator==(const Chromosome&, const Chromosome&) = default;

private:
    std::vector<std::uint8_t> genes_;
};

/// N chromosomes of equal length with one designated elite row.
class Population {
public:
    Population() = default;
    Population(std::vector<Chromosome> rows, std::size_t elite, std::size_t generation = 0)
        : rows_(std::move(rows)), elite_(elite), generation_(generation) {
        require(rows_.size() >= 2, "population needs at least two rows");
        for (const auto& r : rows_)
            require(r.size() == rows_.front().size(), "population rows must share one length");
        require(elite_ < rows_.size(), "elite index out of range");
    }

    std::size_t size() const noexcept { return rows_.size(); }
    std::size_t gene_count() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }
    const Chromosome& row(std::size_t i) const { return rows_.at(i); }
    const std::vector<Chromosome>& rows() const noexcept { return rows_; }
    std::size_t elite() const noexcept { return elite_; }
    const Chromosome& elite_row() const { return rows_.at(elite_); }
    std::size_t generation() const noexcept { return generation_; }

    void set_elite(std::size_t i) {
        require(i < rows_.size(), "elite index out of range");
        elite_ = i;
    }
    void set_row(std::size_t i, Chromosome c) {
        require(c.size() == gene_count(), "row length mismatch");
        rows_.at(i) = std::move(c);
    }
    void set_generation(std::size_t g) noexcept { generation_ = g; }

    friend bool operator==(const Population&, const Population&) = default;

private:
    std::vector<Chromosome> rows_;
    std::size_t elite_ = 0;
    std::size_t generation_ = 0;
};

/// Episode scores per individual, collected during one GA+elite phase.
class FitnessTable {
public:
    FitnessTable() = default;
    explicit FitnessTable(std::size_t individuals) : scores_(individuals) {}

    std::size_t size() const noexcept { return scores_.size(); }

    void record(std::size_t individual, double episode_return) {
        require(individual < scores_.size(), "fitness table index out of range");
        scores_[individual].push_back(episode_return);
    }

    std::span<const double> scores(std::size_t individual) const { return scores_.at(individual); }
    std::size_t episodes(std::size_t individual) const { return scores_.at(individual).size(); }

    /// Mean episodic score, or nullopt if the individual finished no episode.
    std::optional<double> fitness(std::size_t individual) const {
        const auto& s = scores_.at(individual);
        if (s.empty()) return std::nullopt;
        double sum = 0.0;
        for (double v : s) sum += v;
        return sum / static_cast<double>(s.size());
    }

    std::vector<std::optional<double>> fitness_vector() const {
        std::vector<std::optional<double>> out(scores_.size());
        for (std::size_t i = 0; i < scores_.size(); ++i) out[i] = fitness(i);
        return out;
    }

    bool any_defined() const {
        return std::any_of(scores_.begin(), scores_.end(), [](const auto& s) { return !s.empty(); });
    }

    void clear() {
        for (auto& s : scores_) s.clear();
    }

private:
    std::vector<std::vector<double>> scores_;
};

struct GeneticConfig {
    std::size_t population_size = 8;
    double keep_prob = 0.8;
    double crossover_prob = 0.8;
    double mutation_prob = 0.03;
    std::size_t num_parents = 2;

    /// Default parent count: a quarter of the population, at least two.
    static std::size_t default_parents(std::size_t n) { return std::max<std::size_t>(2, n / 4); }

    std::vector<std::string> validate() const {
        std::vector<std::string> errors;
        auto prob = [&](const char* name, double p) {
            if (!(p >= 0.0 && p <= 1.0))
                errors.push_back(std::string(name) + " must be in [0, 1], got " + std::to_string(p));
        };
        if (population_size < 2) errors.emplace_back("population_size must be >= 2");
        prob("keep_prob", keep_prob);
        prob("crossover_prob", crossover_prob);
        prob("mutation_prob", mutation_prob);
        if (num_parents < 2 || num_parents > population_size)
            errors.push_back("num_parents must be in [2, population_size], got " +
                             std::to_string(num_parents));
        return errors;
    }
};

inline Chromosome random_chromosome(std::size_t length, double keep_prob, Rng& rng) {
    Chromosome c(length, 0);
    for (std::size_t i = 0; i < length; ++i) c.set(i, rng.bernoulli(keep_prob));
    return c;
}

inline Population init_population(std::size_t n, std::size_t genes, double keep_prob, Rng& rng) {
    if (n < 2) throw ConfigError("population size must be >= 2");
    if (genes < 1) throw ConfigError("chromosome length must be >= 1");
    if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) throw ConfigError("keep_prob must be in [0, 1]");
    std::vector<Chromosome> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) rows.push_back(random_chromosome(genes, keep_prob, rng));
    return Population(std::move(rows), 0, 0);
}

inline Population init_population(std::size_t n, std::size_t genes, double keep_prob,
                                  std::uint64_t seed) {
    Rng rng(seed);
    return init_population(n, genes, keep_prob, rng);
}

/// Argmax of mean episodic score. Individuals without a finished episode are skipped.
/// Ties keep `current_elite` if it is among the best, else the lowest index wins.
/// When nobody has a score the current elite is returned and a warning logged.
inline std::size_t elite_index(const FitnessTable& table, std::size_t current_elite) {
    std::optional<std::size_t> best;
    double best_score = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto f = table.fitness(i);
        if (!f) continue;
        if (!best || *f > best_score) {
            best = i;
            best_score = *f;
        }
    }
    if (!best) {
        log::warn("no individual finished an episode this generation; elite retained");
        return current_elite;
    }
    if (current_elite < table.size()) {
        const auto cur = table.fitness(current_elite);
        if (cur && *cur == best_score) return current_elite;
    }
    return *best;
}

/// Truncation selection: the top `num_parents` individuals with defined fitness,
/// best first, ties broken by lower index. Clamped to the number of scored individuals.
inline std::vector<std::size_t> select_parents(const FitnessTable& table, std::size_t num_parents) {
    std::vector<std::size_t> scored;
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table.fitness(i)) scored.push_back(i);
    std::stable_sort(scored.begin(), scored.end(), [&](std::size_t a, std::size_t b) {
        return *table.fitness(a) > *table.fitness(b);
    });
    if (scored.size() > num_parents) scored.resize(num_parents);
    return scored;
}

/// Uniform crossover. `mask[i]` is 1 where the child gene came from `a`.
inline Chromosome crossover(const Chromosome& a, const Chromosome& b, Rng& rng,
                            std::vector<std::uint8_t>* mask = nullptr) {
    require(a.size() == b.size(), "crossover parents differ in length");
    Chromosome child(a.size(), 0);
    if (mask) mask->assign(a.size(), 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool from_a = rng.uniform() < 0.5;
        child.set(i, (from_a ? a[i] : b[i]) != 0);
        if (mask) (*mask)[i] = from_a ? 1 : 0;
    }
    return child;
}

inline Chromosome crossover(const Chromosome& a, const Chromosome& b, std::uint64_t seed) {
    Rng rng(seed);
    return crossover(a, b, rng);
}

/// Independent per-gene flips with probability `mutation_prob`.
inline Chromosome mutate(Chromosome c, double mutation_prob, Rng& rng) {
    for (std::size_t i = 0; i < c.size(); ++i)
        if (rng.bernoulli(mutation_prob)) c.flip(i);
    return c;
}

inline Chromosome mutate(const Chromosome& c, double mutation_prob, std::uint64_t seed) {
    Rng rng(seed);
    return mutate(c, mutation_prob, rng);
}

/// How a non-elite child was produced; lets tests replay provenance.
struct BreedingRecord {
    std::size_t child = 0;
    std::size_t first_parent = 0;
    std::size_t second_parent = 0;
    bool crossed = false;
};

/// Builds the next population. The elite row is carried over bit-exactly at its index;
/// every other row is bred from two distinct truncation-selected parents (uniform
/// crossover with `crossover_prob`, otherwise a copy of the first parent), then mutated.
/// With no scored individual the population is returned unchanged apart from the
/// generation counter.
inline Population next_generation(const Population& pop, const FitnessTable& table,
                                  const GeneticConfig& cfg, Rng& rng,
                                  std::vector<BreedingRecord>* records = nullptr) {
    require(table.size() == pop.size(), "fitness table and population differ in size");
    Population next = pop;
    next.set_generation(pop.generation() + 1);
    if (records) records->clear();
    if (!table.any_defined()) {
        log::warn("all fitness values undefined; population carried over unchanged");
        return next;
    }

    const std::size_t elite = elite_index(table, pop.elite());
    next.set_elite(elite);
    const auto parents = select_parents(table, cfg.num_parents);

    for (std::size_t i = 0; i < pop.size(); ++i) {
        if (i == elite) continue;
        const std::size_t first = parents[rng.below(parents.size())];
        std::size_t second = first;
        if (parents.size() > 1) {
            // Second parent drawn from the remaining ones so the pair is distinct.
            std::size_t k = rng.below(parents.size() - 1);
            for (std::size_t j = 0; j < parents.size(); ++j) {
                if (parents[j] == first) continue;
                if (k-- == 0) {
                    second = parents[j];
                    break;
                }
            }
        }
        const bool crossed = rng.bernoulli(cfg.crossover_prob);
        Chromosome child = crossed ? crossover(pop.row(first), pop.row(second), rng) : pop.row(first);
        next.set_row(i, mutate(std::move(child), cfg.mutation_prob, rng));
        if (records) records->push_back({i, first, second, crossed});
    }
    return next;
}

inline Population next_generation(const Population& pop, const FitnessTable& table,
                                  const GeneticConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    return next_generation(pop, table, cfg, rng);
}

/// Snapshot format: {"generation": int, "elite": int, "rows": [[0|1, ...], ...]}.
inline nlohmann::json population_to_json(const Population& pop) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : pop.rows()) {
        nlohmann::json row = nlohmann::json::array();
        for (auto g : r.genes()) row.push_back(static_cast<int>(g));
        rows.push_back(std::move(row));
    }
    return {{"generation", pop.generation()}, {"elite", pop.elite()}, {"rows", std::move(rows)}};
}

inline Population population_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("generation") || !j.contains("elite") || !j.contains("rows"))
        throw ConfigError("population snapshot needs generation, elite and rows");
    std::vector<Chromosome> rows;
    for (const auto& r : j.at("rows")) {
        std::vector<std::uint8_t> genes;
        for (const auto& g : r) {
            const int v = g.get<int>();
            if (v != 0 && v != 1) throw ConfigError("population snapshot genes must be 0 or 1");
            genes.push_back(static_cast<std::uint8_t>(v));
        }
        rows.emplace_back(std::move(genes));
    }
    if (rows.size() < 2) throw ConfigError("population snapshot needs at least two rows");
    for (const auto& r : rows)
        if (r.size() != rows.front().size()) throw ConfigError("population snapshot rows differ in length");
    const auto elite = j.at("elite").get<std::size_t>();
    if (elite >= rows.size()) throw ConfigError("population snapshot elite out of range");
    return Population(std::move(rows), elite, j.at("generation").get<std::size_t>());
}

}  // namespace g2n
