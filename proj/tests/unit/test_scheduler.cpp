#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ehfl/errors.hpp"
#include "ehfl/scheduler.hpp"

using namespace ehfl;

using Ids = std::vector<ClientId>;

TEST(Myopic, LongestQueuesFirst) {
    auto d = myopic_schedule(EnergyState::from_levels({2, 0, 3, 1}), 2);
    EXPECT_EQ(d.candidates, (Ids{2, 0}));
    EXPECT_EQ(d.participants, (Ids{0, 2}));
    EXPECT_EQ(d.n(), 2u);
    EXPECT_FALSE(d.non_causal);
}

TEST(Myopic, EmptyQueuesGiveEmptyCohort) {
    auto d = myopic_schedule(EnergyState::from_levels({0, 0, 0}), 2);
    EXPECT_EQ(d.candidates.size(), 2u);
    EXPECT_TRUE(d.participants.empty());
}

TEST(Myopic, FullSelection) {
    auto d = myopic_schedule(EnergyState::from_levels({5, 5, 5, 5}), 4);
    EXPECT_EQ(d.participants, (Ids{0, 1, 2, 3}));
}

TEST(Myopic, TiesGoToLowerId) {
    auto d = myopic_schedule(EnergyState::from_levels({1, 2, 2, 1, 2}), 2);
    EXPECT_EQ(d.candidates, (Ids{1, 2}));
    d = myopic_schedule(EnergyState::from_levels({1, 1, 1, 1}), 3);
    EXPECT_EQ(d.candidates, (Ids{0, 1, 2}));
}

TEST(RoundRobin, CyclesLambdaSlotsPerRound) {
    auto s = EnergyState::from_levels({1, 1, 1, 1});
    EXPECT_EQ(round_robin_schedule(0, 2, s).candidates, (Ids{0, 1}));
    EXPECT_EQ(round_robin_schedule(1, 2, s).candidates, (Ids{2, 3}));
    EXPECT_EQ(round_robin_schedule(2, 2, s).candidates, (Ids{0, 1}));
    // wrap-around inside a round
    auto s5 = EnergyState::from_levels({1, 1, 1, 1, 1});
    EXPECT_EQ(round_robin_schedule(1, 3, s5).candidates, (Ids{3, 4, 0}));
    EXPECT_EQ(round_robin_schedule(1, 3, s5).participants, (Ids{0, 3, 4}));
}

TEST(RoundRobin, FullCycleEveryRound) {
    auto s = EnergyState::from_levels({2, 1, 3});
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(round_robin_schedule(t, 3, s).participants, (Ids{0, 1, 2}));
}

TEST(RoundRobin, DropsEmptyBatteries) {
    auto d = round_robin_schedule(0, 2, EnergyState::from_levels({0, 1, 1, 1}));
    EXPECT_EQ(d.candidates, (Ids{0, 1}));
    EXPECT_EQ(d.participants, (Ids{1}));
}

TEST(Greedy, Examples) {
    EXPECT_EQ(greedy_schedule(EnergyState::from_levels({2, 0, 1})).participants, (Ids{0, 2}));
    EXPECT_TRUE(greedy_schedule(EnergyState::from_levels({0, 0})).participants.empty());
    EXPECT_EQ(greedy_schedule(EnergyState::from_levels({1, 3, 1})).participants, (Ids{0, 1, 2}));
}

TEST(OracleUniform, IgnoresEnergy) {
    auto empty = EnergyState::from_levels({0, 0, 0, 0});
    auto all = oracle_uniform_schedule(3, 4, empty);
    EXPECT_EQ(all.participants, (Ids{0, 1, 2, 3}));
    EXPECT_TRUE(all.non_causal);
    for (std::size_t t = 0; t < 6; ++t) {
        auto o = oracle_uniform_schedule(t, 2, empty);
        auto full = EnergyState::from_levels({1, 1, 1, 1});
        EXPECT_EQ(o.participants, round_robin_schedule(t, 2, full).participants);
        EXPECT_EQ(o.n(), 2u);
    }
}

TEST(SchedulerKind, ValidationAndNames) {
    EXPECT_THROW(validate_scheduler(Myopic{0}, 4), ConfigError);
    EXPECT_THROW(validate_scheduler(RoundRobin{5}, 4), ConfigError);
    EXPECT_THROW(validate_scheduler(OracleUniform{0}, 4), ConfigError);
    EXPECT_NO_THROW(validate_scheduler(Greedy{}, 4));
    EXPECT_NO_THROW(validate_scheduler(Myopic{4}, 4));
    EXPECT_EQ(scheduler_name(Myopic{1}), "myopic");
    EXPECT_EQ(scheduler_name(RoundRobin{1}), "round_robin");
    EXPECT_EQ(scheduler_name(Greedy{}), "greedy");
    EXPECT_EQ(scheduler_name(OracleUniform{1}), "oracle");
}

TEST(SchedulerProperties, CausalSubsetAndDeterministic) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t m = 1 + rng() % 12;
        std::vector<int> levels(m);
        for (auto& e : levels) e = static_cast<int>(rng() % 4);
        auto s = EnergyState::from_levels(levels);
        const std::size_t lambda = 1 + rng() % m;
        const std::size_t t = rng() % 100;
        for (const SchedulerKind& kind : {SchedulerKind{Myopic{lambda}}, SchedulerKind{RoundRobin{lambda}},
                                          SchedulerKind{Greedy{}}}) {
            auto d = schedule(kind, t, s);
            EXPECT_LE(d.n(), m);
            EXPECT_TRUE(std::is_sorted(d.participants.begin(), d.participants.end()));
            for (ClientId i : d.participants) {
                EXPECT_GE(levels[i], 1);
                EXPECT_NE(std::find(d.candidates.begin(), d.candidates.end(), i), d.candidates.end());
            }
            auto again = schedule(kind, t, s);
            EXPECT_EQ(d.candidates, again.candidates);
            EXPECT_EQ(d.participants, again.participants);
        }
    }
}

TEST(SchedulerProperties, MyopicSpreadStaysBounded) {
    // Homogeneous arrivals at rate Lambda/M, unbounded batteries. Reference: the
    // same arrivals with nobody ever served, whose spread grows like sqrt(t).
    const std::size_t m = 10, lambda = 5;
    auto cfg = EnergyConfig::homogeneous(m, 0.5, std::nullopt);
    double myopic_spread = 0, idle_spread = 0;
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
        auto streams = make_client_streams(seed, StreamDomain::Arrivals, m);
        EnergyState s(cfg), idle(cfg);
        int worst_late = 0;
        for (std::size_t t = 0; t < 2000; ++t) {
            auto a = sample_arrivals(cfg, streams);
            auto d = myopic_schedule(s, lambda);
            s = update_energy(s, d.participants, a, cfg);
            idle = update_energy(idle, {}, a, cfg);
            if (t >= 1000) {
                auto [lo, hi] = std::minmax_element(s.levels().begin(), s.levels().end());
                worst_late = std::max(worst_late, *hi - *lo);
            }
        }
        auto [lo, hi] = std::minmax_element(s.levels().begin(), s.levels().end());
        auto [ilo, ihi] = std::minmax_element(idle.levels().begin(), idle.levels().end());
        myopic_spread += *hi - *lo;
        idle_spread += *ihi - *ilo;
        EXPECT_LE(worst_late, 4);
    }
    EXPECT_LT(myopic_spread / seeds, 0.1 * idle_spread / seeds);
}
