#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "ehfl/energy.hpp"
#include "ehfl/errors.hpp"
#include "ehfl/rng.hpp"

using namespace ehfl;

namespace {

ArrivalSample arrivals_of(std::vector<std::uint8_t> a) { return ArrivalSample{std::move(a)}; }

EnergyConfig config_with(std::vector<int> initial, std::optional<int> cap) {
    EnergyConfig c;
    c.num_clients = initial.size();
    c.arrival_rates.assign(initial.size(), 0.5);
    c.capacity = cap;
    c.initial_levels = std::move(initial);
    return c;
}

}  // namespace

TEST(SampleArrivals, DegenerateRates) {
    auto ones = EnergyConfig::homogeneous(6, 1.0, 10);
    auto zeros = EnergyConfig::homogeneous(6, 0.0, 10);
    auto streams = make_client_streams(3, StreamDomain::Arrivals, 6);
    for (int r = 0; r < 50; ++r) {
        for (auto a : sample_arrivals(ones, streams).arrivals) EXPECT_EQ(a, 1);
        for (auto a : sample_arrivals(zeros, streams).arrivals) EXPECT_EQ(a, 0);
    }
}

TEST(SampleArrivals, EmpiricalMeanMatchesRate) {
    auto cfg = EnergyConfig::homogeneous(4, 0.5, 10);
    auto streams = make_client_streams(17, StreamDomain::Arrivals, 4);
    std::vector<double> sums(4, 0.0);
    const int rounds = 100000;
    for (int r = 0; r < rounds; ++r) {
        auto s = sample_arrivals(cfg, streams);
        for (std::size_t i = 0; i < 4; ++i) sums[i] += s.arrivals[i];
    }
    for (double s : sums) EXPECT_NEAR(s / rounds, 0.5, 0.01);
}

TEST(SampleArrivals, RepeatableAndClientIndependent) {
    auto cfg4 = EnergyConfig::homogeneous(4, 0.3, 10);
    auto cfg6 = EnergyConfig::homogeneous(6, 0.3, 10);
    auto a = make_client_streams(9, StreamDomain::Arrivals, 4);
    auto b = make_client_streams(9, StreamDomain::Arrivals, 4);
    auto c = make_client_streams(9, StreamDomain::Arrivals, 6);
    for (int r = 0; r < 200; ++r) {
        auto x = sample_arrivals(cfg4, a).arrivals;
        auto y = sample_arrivals(cfg4, b).arrivals;
        auto z = sample_arrivals(cfg6, c).arrivals;
        EXPECT_EQ(x, y);
        // adding clients does not reshuffle the existing clients' arrivals
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(x[i], z[i]);
    }
}

TEST(UpdateEnergy, ParticipantWithArrivalKeepsLevel) {
    auto cfg = config_with({3}, 5);
    auto s = EnergyState::from_levels({3});
    std::vector<ClientId> n{0};
    auto next = update_energy(s, n, arrivals_of({1}), cfg);
    EXPECT_EQ(next.level(0), 3);
    EXPECT_EQ(next.round(), 1u);
}

TEST(UpdateEnergy, ClipsAtCapacity) {
    auto cfg = config_with({5}, 5);
    auto next = update_energy(EnergyState::from_levels({5}), {}, arrivals_of({1}), cfg);
    EXPECT_EQ(next.level(0), 5);
}

TEST(UpdateEnergy, LastUnitCanBeSpent) {
    auto cfg = config_with({1}, 5);
    std::vector<ClientId> n{0};
    auto next = update_energy(EnergyState::from_levels({1}), n, arrivals_of({0}), cfg);
    EXPECT_EQ(next.level(0), 0);
}

TEST(UpdateEnergy, EmptyBatteryCannotParticipate) {
    auto cfg = config_with({0, 2}, 5);
    std::vector<ClientId> n{0};
    EXPECT_THROW(update_energy(EnergyState::from_levels({0, 2}), n, arrivals_of({1, 1}), cfg), CausalityViolation);
}

TEST(UpdateEnergy, RejectsBadParticipantLists) {
    auto cfg = config_with({2, 2}, 5);
    auto s = EnergyState::from_levels({2, 2});
    std::vector<ClientId> out_of_range{2};
    std::vector<ClientId> duplicate{1, 1};
    EXPECT_THROW(update_energy(s, out_of_range, arrivals_of({0, 0}), cfg), ShapeMismatch);
    EXPECT_THROW(update_energy(s, duplicate, arrivals_of({0, 0}), cfg), ShapeMismatch);
    EXPECT_THROW(update_energy(s, {}, arrivals_of({0}), cfg), ShapeMismatch);
}

TEST(UpdateEnergy, IdentityWithoutActivity) {
    auto cfg = config_with({0, 3, 7}, 10);
    auto s = EnergyState::from_levels({0, 3, 7}, 4);
    auto next = update_energy(s, {}, arrivals_of({0, 0, 0}), cfg);
    EXPECT_EQ(std::vector<int>(next.levels().begin(), next.levels().end()), (std::vector<int>{0, 3, 7}));
}

TEST(AvailableClients, Examples) {
    EXPECT_EQ(available_clients(EnergyState::from_levels({0, 1, 2, 0})), (std::vector<ClientId>{1, 2}));
    EXPECT_TRUE(available_clients(EnergyState::from_levels({0, 0, 0})).empty());
    EXPECT_EQ(available_clients(EnergyState::from_levels({1, 4, 2})), (std::vector<ClientId>{0, 1, 2}));
}

TEST(EnergyConfig, Validation) {
    auto good = EnergyConfig::homogeneous(3, 0.5, 10);
    EXPECT_NO_THROW(good.validate());

    auto bad_rate = good;
    bad_rate.arrival_rates[1] = 1.5;
    EXPECT_THROW(bad_rate.validate(), ConfigError);

    auto over_cap = good;
    over_cap.initial_levels[0] = 11;
    EXPECT_THROW(over_cap.validate(), ConfigError);

    auto bad_cap = good;
    bad_cap.capacity = 0;
    EXPECT_THROW(bad_cap.validate(), ConfigError);

    auto negative = EnergyConfig::homogeneous(3, 0.5, std::nullopt);
    negative.initial_levels[2] = -1;
    EXPECT_THROW(negative.validate(), ConfigError);

    auto wrong_len = good;
    wrong_len.arrival_rates.pop_back();
    EXPECT_THROW(wrong_len.validate(), ConfigError);
}

// Random participation drawn from the available set, so causality always holds.
TEST(EnergyProperties, BoundsAndConservation) {
    std::mt19937_64 pick(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t m = 1 + pick() % 8;
        const bool finite = trial % 2 == 0;
        std::optional<int> cap = finite ? std::optional<int>(1 + static_cast<int>(pick() % 6)) : std::nullopt;
        EnergyConfig cfg;
        cfg.num_clients = m;
        cfg.capacity = cap;
        for (std::size_t i = 0; i < m; ++i) {
            cfg.arrival_rates.push_back(std::uniform_real_distribution<double>(0, 1)(pick));
            cfg.initial_levels.push_back(static_cast<int>(pick() % (finite ? *cap + 1 : 4)));
        }
        auto streams = make_client_streams(trial, StreamDomain::Arrivals, m);
        EnergyState s(cfg);
        std::vector<long> harvested(m, 0), spent(m, 0);
        for (int t = 0; t < 300; ++t) {
            std::vector<ClientId> n;
            for (ClientId i : available_clients(s))
                if (pick() % 2) n.push_back(i);
            auto a = sample_arrivals(cfg, streams);
            for (std::size_t i = 0; i < m; ++i) harvested[i] += a.arrivals[i];
            for (ClientId i : n) ++spent[i];
            s = update_energy(s, n, a, cfg);
            for (int e : s.levels()) {
                ASSERT_GE(e, 0);
                if (finite) ASSERT_LE(e, *cap);
            }
        }
        if (!finite)
            for (std::size_t i = 0; i < m; ++i)
                EXPECT_EQ(s.level(i), cfg.initial_levels[i] + harvested[i] - spent[i]);
    }
}

TEST(EnergyProperties, DeterministicTrajectories) {
    auto cfg = EnergyConfig::homogeneous(5, 0.4, 3);
    auto run = [&] {
        auto streams = make_client_streams(21, StreamDomain::Arrivals, 5);
        EnergyState s(cfg);
        std::vector<std::vector<int>> traj;
        for (int t = 0; t < 100; ++t) {
            auto avail = available_clients(s);
            std::vector<ClientId> n(avail.begin(), avail.begin() + static_cast<long>(avail.size() / 2));
            s = update_energy(s, n, sample_arrivals(cfg, streams), cfg);
            traj.emplace_back(s.levels().begin(), s.levels().end());
        }
        return traj;
    };
    EXPECT_EQ(run(), run());
}

TEST(Rng, DerivedSeedsDiffer) {
    EXPECT_NE(derive_seed(1, StreamDomain::Arrivals, 0), derive_seed(1, StreamDomain::Arrivals, 1));
    EXPECT_NE(derive_seed(1, StreamDomain::Arrivals, 0), derive_seed(1, StreamDomain::Minibatch, 0));
    EXPECT_NE(derive_seed(1, StreamDomain::Arrivals, 0), derive_seed(2, StreamDomain::Arrivals, 0));
    EXPECT_EQ(derive_seed(7, StreamDomain::Probing, 3), derive_seed(7, StreamDomain::Probing, 3));
    Engine e(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(e);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}
