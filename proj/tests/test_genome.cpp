#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "g2n/genome.hpp"

using namespace g2n;

namespace {

FitnessTable table_with(const std::vector<std::optional<double>>& fitness) {
    FitnessTable t(fitness.size());
    for (std::size_t i = 0; i < fitness.size(); ++i)
        if (fitness[i]) t.record(i, *fitness[i]);
    return t;
}

Population random_population(std::size_t n, std::size_t g, std::uint64_t seed) {
    return init_population(n, g, 0.5, seed);
}

}  // namespace

TEST(InitPopulation, KeepOneOpensEveryGene) {
    const auto pop = init_population(4, 8, 1.0, 1);
    for (const auto& row : pop.rows()) EXPECT_EQ(row.count_open(), 8u);
    EXPECT_EQ(pop.elite(), 0u);
}

TEST(InitPopulation, KeepZeroClosesEveryGene) {
    const auto pop = init_population(4, 8, 0.0, 1);
    for (const auto& row : pop.rows()) EXPECT_EQ(row.count_open(), 0u);
}

TEST(InitPopulation, OpenFractionNearKeepProbability) {
    const auto pop = init_population(64, 512, 0.8, 7);
    std::size_t open = 0;
    for (const auto& row : pop.rows()) open += row.count_open();
    const double frac = static_cast<double>(open) / (64.0 * 512.0);
    EXPECT_GE(frac, 0.78);
    EXPECT_LE(frac, 0.82);
}

TEST(InitPopulation, RejectsBadShapes) {
    EXPECT_THROW(init_population(1, 8, 0.5, 0), ConfigError);
    EXPECT_THROW(init_population(4, 0, 0.5, 0), ConfigError);
}

TEST(InitPopulation, SameSeedSameMatrix) {
    EXPECT_EQ(init_population(8, 64, 0.3, 42), init_population(8, 64, 0.3, 42));
    EXPECT_NE(init_population(8, 64, 0.3, 42), init_population(8, 64, 0.3, 43));
}

TEST(FitnessTable, RecordAppends) {
    FitnessTable t(4);
    t.record(2, 10.0);
    ASSERT_EQ(t.scores(2).size(), 1u);
    EXPECT_EQ(t.scores(2)[0], 10.0);
    t.record(2, 20.0);
    EXPECT_EQ(*t.fitness(2), 15.0);
    EXPECT_FALSE(t.fitness(0).has_value());
}

TEST(FitnessTable, OutOfRangeIsInternalError) {
    FitnessTable t(3);
    EXPECT_THROW(t.record(3, 1.0), InternalError);
}

TEST(FitnessTable, MeansMatchIndependentLoop) {
    Rng rng(5);
    FitnessTable t(8);
    std::vector<std::vector<double>> raw(8);
    for (std::size_t i = 0; i < 8; ++i)
        for (int k = 0; k < 5; ++k) {
            const double v = rng.uniform(-10.0, 10.0);
            raw[i].push_back(v);
            t.record(i, v);
        }
    const auto f = t.fitness_vector();
    for (std::size_t i = 0; i < 8; ++i) {
        double s = 0.0;
        for (double v : raw[i]) s += v;
        EXPECT_DOUBLE_EQ(*f[i], s / 5.0);
    }
}

TEST(FitnessTable, ClearForgetsScores) {
    FitnessTable t(2);
    t.record(0, 1.0);
    t.clear();
    EXPECT_FALSE(t.any_defined());
    EXPECT_EQ(t.size(), 2u);
}

TEST(EliteIndex, StrictArgmax) { EXPECT_EQ(elite_index(table_with({1.0, 3.0, 2.0}), 0), 1u); }

TEST(EliteIndex, TieKeepsCurrentElite) { EXPECT_EQ(elite_index(table_with({5.0, 5.0, 2.0}), 1), 1u); }

TEST(EliteIndex, TieWithoutEliteTakesLowestIndex) {
    EXPECT_EQ(elite_index(table_with({1.0, 5.0, 5.0}), 0), 1u);
}

TEST(EliteIndex, UndefinedExcluded) {
    EXPECT_EQ(elite_index(table_with({std::nullopt, 4.0, std::nullopt}), 0), 1u);
}

TEST(EliteIndex, AllUndefinedKeepsElite) {
    EXPECT_EQ(elite_index(table_with({std::nullopt, std::nullopt, std::nullopt}), 2), 2u);
}

TEST(EliteIndex, InvariantUnderUniformShift) {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        FitnessTable a(6), b(6);
        for (std::size_t i = 0; i < 6; ++i)
            for (int k = 0; k < 3; ++k) {
                const double v = std::round(rng.uniform(0.0, 4.0));
                a.record(i, v);
                b.record(i, v + 7.0);
            }
        const std::size_t cur = rng.below(6);
        EXPECT_EQ(elite_index(a, cur), elite_index(b, cur));
    }
}

TEST(SelectParents, SortedDescending) {
    EXPECT_EQ(select_parents(table_with({1.0, 4.0, 3.0, 2.0}), 2), (std::vector<std::size_t>{1, 2}));
}

TEST(SelectParents, TiesByIndex) {
    EXPECT_EQ(select_parents(table_with({7.0, 7.0, 7.0, 7.0}), 2), (std::vector<std::size_t>{0, 1}));
}

TEST(SelectParents, MatchesFullSort) {
    Rng rng(11);
    std::vector<std::optional<double>> f(64);
    std::vector<std::pair<double, std::size_t>> sorted;
    for (std::size_t i = 0; i < 64; ++i) {
        f[i] = rng.uniform();
        sorted.emplace_back(*f[i], i);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a.first > b.first; });
    std::vector<std::size_t> expected;
    for (std::size_t k = 0; k < 16; ++k) expected.push_back(sorted[k].second);
    EXPECT_EQ(select_parents(table_with(f), 16), expected);
}

TEST(SelectParents, ClampsToDefinedCount) {
    EXPECT_EQ(select_parents(table_with({std::nullopt, 2.0, std::nullopt, 1.0}), 3),
              (std::vector<std::size_t>{1, 3}));
}

TEST(Crossover, IdenticalParents) {
    Rng rng(3);
    const auto a = random_chromosome(40, 0.5, rng);
    EXPECT_EQ(crossover(a, a, 99), a);
}

TEST(Crossover, ChildFollowsMask) {
    const Chromosome ones(32, 1), zeros(32, 0);
    Rng rng(4);
    std::vector<std::uint8_t> mask;
    const auto child = crossover(ones, zeros, rng, &mask);
    ASSERT_EQ(mask.size(), 32u);
    for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(child[i], mask[i] ? 1 : 0);
}

TEST(Crossover, HalfFromEachParent) {
    const Chromosome ones(16, 1), zeros(16, 0);
    Rng rng(8);
    std::vector<int> count(16, 0);
    for (int t = 0; t < 10000; ++t) {
        const auto c = crossover(ones, zeros, rng);
        for (std::size_t i = 0; i < 16; ++i) count[i] += c[i];
    }
    for (int c : count) {
        EXPECT_GE(c / 10000.0, 0.47);
        EXPECT_LE(c / 10000.0, 0.53);
    }
}

TEST(Crossover, LengthMismatch) { EXPECT_THROW(crossover(Chromosome(3), Chromosome(4), 0), InternalError); }

TEST(Mutate, ZeroProbabilityIsIdentity) {
    Rng rng(1);
    const auto c = random_chromosome(64, 0.5, rng);
    EXPECT_EQ(mutate(c, 0.0, 5), c);
}

TEST(Mutate, OneFlipsEverything) {
    Rng rng(1);
    const auto c = random_chromosome(64, 0.5, rng);
    const auto m = mutate(c, 1.0, 5);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NE(m[i], c[i]);
}

TEST(Mutate, MeanFlipsMatchRate) {
    Rng rng(12);
    const Chromosome c(512, 1);
    double total = 0.0;
    for (int t = 0; t < 1000; ++t) total += 512.0 - static_cast<double>(mutate(c, 0.03, rng).count_open());
    const double mean = total / 1000.0;
    EXPECT_GE(mean, 14.0);
    EXPECT_LE(mean, 16.8);
}

TEST(NextGeneration, TwoIndividualsNoOperators) {
    Population pop({Chromosome(std::vector<std::uint8_t>{1, 0, 1, 0}), Chromosome(std::vector<std::uint8_t>{0, 0, 1, 1})},
                   0);
    GeneticConfig cfg{2, 0.5, 0.0, 0.0, 2};
    const auto next = next_generation(pop, table_with({3.0, 1.0}), cfg, 17);
    EXPECT_EQ(next.row(0), pop.row(0));
    // The only other child copies its first parent, which is one of the two rows.
    EXPECT_TRUE(next.row(1) == pop.row(0) || next.row(1) == pop.row(1));
    EXPECT_EQ(next.generation(), 1u);
}

TEST(NextGeneration, ElitePreservedForAnyConfig) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(10);
        auto pop = init_population(n, 16, 0.5, rng);
        std::vector<std::optional<double>> f(n);
        for (auto& v : f) v = rng.uniform();
        const auto table = table_with(f);
        pop.set_elite(elite_index(table, pop.elite()));
        GeneticConfig cfg{n, 0.5, rng.uniform(), rng.uniform(), 2 + rng.below(n - 1)};
        const auto next = next_generation(pop, table, cfg, rng);
        EXPECT_EQ(next.elite(), pop.elite());
        EXPECT_EQ(next.elite_row(), pop.elite_row());
    }
}

TEST(NextGeneration, ChildGenesComeFromRecordedParents) {
    auto pop = random_population(8, 32, 3);
    std::vector<std::optional<double>> f{1.0, 8.0, 3.0, 7.0, 2.0, 6.0, 5.0, 4.0};
    const auto table = table_with(f);
    pop.set_elite(1);
    GeneticConfig cfg{8, 0.5, 0.8, 0.0, 4};
    Rng rng(30);
    std::vector<BreedingRecord> records;
    const auto next = next_generation(pop, table, cfg, rng, &records);
    const auto parents = select_parents(table, 4);
    ASSERT_EQ(records.size(), 7u);
    for (const auto& r : records) {
        EXPECT_NE(r.first_parent, r.second_parent);
        EXPECT_NE(std::find(parents.begin(), parents.end(), r.first_parent), parents.end());
        EXPECT_NE(std::find(parents.begin(), parents.end(), r.second_parent), parents.end());
        const auto& child = next.row(r.child);
        for (std::size_t g = 0; g < 32; ++g)
            EXPECT_TRUE(child[g] == pop.row(r.first_parent)[g] || child[g] == pop.row(r.second_parent)[g]);
        if (!r.crossed) {
            EXPECT_EQ(child, pop.row(r.first_parent));
        }
    }
}

TEST(NextGeneration, NoNewChromosomesWithoutVariation) {
    auto pop = random_population(8, 24, 13);
    const auto table = table_with({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0});
    pop.set_elite(7);
    GeneticConfig cfg{8, 0.5, 0.0, 0.0, 3};
    const auto parents = select_parents(table, 3);
    const auto next = next_generation(pop, table, cfg, 2);
    for (const auto& row : next.rows()) {
        bool found = false;
        for (auto p : parents) found = found || row == pop.row(p);
        EXPECT_TRUE(found);
    }
}

TEST(NextGeneration, FrozenWhenAllParentsBreedCopies) {
    // With every row identical and no variation, the population cannot change.
    Population pop(std::vector<Chromosome>(6, Chromosome(std::vector<std::uint8_t>{1, 0, 1, 1})), 0);
    GeneticConfig cfg{6, 0.5, 0.0, 0.0, 6};
    const auto next = next_generation(pop, table_with({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}), cfg, 4);
    EXPECT_EQ(next.rows(), pop.rows());
}

TEST(NextGeneration, AllUndefinedKeepsPopulation) {
    const auto pop = random_population(4, 8, 1);
    GeneticConfig cfg{4, 0.5, 0.8, 0.5, 2};
    const auto next = next_generation(pop, FitnessTable(4), cfg, 3);
    EXPECT_EQ(next.rows(), pop.rows());
    EXPECT_EQ(next.elite(), pop.elite());
}

TEST(NextGeneration, DeterministicPerSeed) {
    const auto pop = random_population(8, 32, 1);
    const auto table = table_with({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0});
    GeneticConfig cfg{8, 0.5, 0.8, 0.1, 2};
    EXPECT_EQ(next_generation(pop, table, cfg, 77), next_generation(pop, table, cfg, 77));
}

TEST(GeneticConfig, ValidationNamesFields) {
    GeneticConfig cfg{8, 1.2, 0.8, -0.1, 9};
    const auto errors = cfg.validate();
    ASSERT_EQ(errors.size(), 3u);
    EXPECT_NE(errors[0].find("keep_prob"), std::string::npos);
    EXPECT_NE(errors[1].find("mutation_prob"), std::string::npos);
    EXPECT_NE(errors[2].find("num_parents"), std::string::npos);
}

TEST(GeneticConfig, DefaultParents) {
    EXPECT_EQ(GeneticConfig::default_parents(8), 2u);
    EXPECT_EQ(GeneticConfig::default_parents(64), 16u);
    EXPECT_EQ(GeneticConfig::default_parents(3), 2u);
}

TEST(PopulationJson, RoundTrip) {
    auto pop = random_population(5, 12, 6);
    pop.set_elite(3);
    pop.set_generation(9);
    const auto j = population_to_json(pop);
    EXPECT_EQ(j["generation"], 9);
    EXPECT_EQ(j["elite"], 3);
    EXPECT_EQ(j["rows"].size(), 5u);
    EXPECT_EQ(population_from_json(j), pop);
}

TEST(Population, RejectsRaggedRows) {
    EXPECT_THROW(Population({Chromosome(3), Chromosome(4)}, 0), InternalError);
    EXPECT_THROW(Population({Chromosome(3)}, 0), InternalError);
}
