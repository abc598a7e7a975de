#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace itself;

TEST(Automaton, MatchesBruteForceOracle) {
    std::mt19937 rng(37);
    std::uniform_int_distribution<int> layers(1, 5), side(3, 12), steps(1, 4);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = side(rng), h = side(rng), m = layers(rng), k = steps(rng);
        std::vector<SaliencyMap> maps;
        for (int i = 0; i < m; ++i) maps.push_back(testing_support::random_map(w, h, rng));
        AutomatonGrid g = init_grid(maps, 0.05);
        for (int s = 0; s < k; ++s) g = step(g);
        const auto want = testing_support::ca_oracle_steps(maps, 0.05, k);
        for (int i = 0; i < m; ++i)
            for (std::size_t p = 0; p < want[std::size_t(i)].size(); ++p)
                ASSERT_NEAR(g.cells[std::size_t(i)][p], want[std::size_t(i)][p], 1e-12);
        EXPECT_EQ(g.t, k);
    }
}

TEST(Automaton, ConstantMapIsAFixedPoint) {
    const std::vector<SaliencyMap> maps{SaliencyMap(7, 5, 0.37), SaliencyMap(7, 5, 0.9)};
    AutomatonGrid g = init_grid(maps, 0.01);
    const auto before = g.cells;
    for (int s = 0; s < 5; ++s) g = step(g);
    EXPECT_EQ(g.cells, before);
}

TEST(Automaton, SurroundedByLowNeighborsDropsByFourLambda) {
    SaliencyMap m(3, 3, 0.1);
    m(1, 1) = 0.9;
    AutomatonGrid g = init_grid(std::vector<SaliencyMap>{m}, 0.01);
    const double before = g.cells[0][4];
    g = step(g);
    EXPECT_NEAR(g.cells[0][4], before - 4 * 0.01, 1e-15);
    // The corner sees two low edge neighbours.
    EXPECT_NEAR(g.cells[0][0], std::log(0.1) - 2 * 0.01, 1e-15);
    // Edge cells see the bright center (+1) and two low corners (-2).
    EXPECT_NEAR(g.cells[0][1], std::log(0.1) - 0.01, 1e-15);
}

TEST(Automaton, FinalizeClosedForm) {
    std::mt19937 rng(41);
    const std::vector<SaliencyMap> maps{testing_support::random_map(6, 4, rng), testing_support::random_map(6, 4, rng)};
    const AutomatonGrid g = init_grid(maps, 0.01);
    std::vector<double> want(24);
    for (std::size_t p = 0; p < 24; ++p)
        for (const auto& mp : maps) {
            const double v = std::clamp(mp.values[p], 1e-6, 1.0);
            want[p] += 0.5 * v / (1 + v);
        }
    want = minmax_normalize(std::span<const double>(want));
    const auto got = finalize(g);
    for (std::size_t p = 0; p < 24; ++p) EXPECT_NEAR(got.values[p], want[p], 1e-12);
}

TEST(Automaton, SingleLayerFinalizePreservesRanking) {
    std::mt19937 rng(43);
    const SaliencyMap m = testing_support::random_map(10, 10, rng);
    const auto out = integrate(std::vector<SaliencyMap>{m}, 0.01, 0);
    for (std::size_t a = 0; a < 100; ++a)
        for (std::size_t b = 0; b < 100; ++b)
            if (m.values[a] < m.values[b]) {
                EXPECT_LE(out.values[a], out.values[b]);
            }
    EXPECT_DOUBLE_EQ(*std::max_element(out.values.begin(), out.values.end()), 1.0);
}

TEST(Automaton, RejectsBadInput) {
    EXPECT_THROW(init_grid(std::vector<SaliencyMap>{}, 0.01), InvalidArgument);
    EXPECT_THROW(init_grid(std::vector<SaliencyMap>{SaliencyMap(2, 2)}, 0.0), InvalidArgument);
    EXPECT_THROW(init_grid(std::vector<SaliencyMap>{SaliencyMap(2, 2), SaliencyMap(3, 2)}, 0.1), InvalidArgument);
}

TEST(PersistentAutomaton, KeepsEvolvedLayersByName) {
    std::mt19937 rng(47);
    const SaliencyMap a = testing_support::random_map(8, 8, rng);
    const SaliencyMap b = testing_support::random_map(8, 8, rng);
    const SaliencyMap c = testing_support::random_map(8, 8, rng);

    PersistentAutomaton pa(0.02);
    pa.update_layers({{"a", &a}, {"b", &b}});
    pa.advance(2);
    const auto evolved_a = pa.grid().cells[0];

    // "a" survives with its evolved cells, "b" is dropped, "c" starts fresh.
    pa.update_layers({{"c", &c}, {"a", &b}});
    ASSERT_EQ(pa.grid().layers(), 2u);
    EXPECT_EQ(pa.grid().names[1], "a");
    EXPECT_EQ(pa.grid().cells[1], evolved_a);
    EXPECT_EQ(pa.grid().t, 2);

    AutomatonGrid fresh = init_grid(std::vector<SaliencyMap>{c}, 0.02);
    EXPECT_EQ(pa.grid().cells[0], fresh.cells[0]);

    // Same as running two plain steps over both maps then one more over the new stack.
    AutomatonGrid manual = init_grid(std::vector<SaliencyMap>{a, b}, 0.02);
    manual = step(step(manual));
    AutomatonGrid joined = init_grid(std::vector<SaliencyMap>{c, a}, 0.02);
    joined.cells[1] = manual.cells[0];
    joined.mu[1] = manual.mu[0];
    joined = step(joined);
    pa.advance(1);
    EXPECT_EQ(pa.grid().cells, joined.cells);
    EXPECT_EQ(pa.result().values, finalize(joined).values);
}
