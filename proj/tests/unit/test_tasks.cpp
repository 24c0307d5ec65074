#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "ehfl/errors.hpp"
#include "ehfl/tasks.hpp"
#include "support/oracles.hpp"

using namespace ehfl;

namespace {

Vector random_vector(Eigen::Index d, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Vector v(d);
    for (Eigen::Index k = 0; k < d; ++k) v(k) = n(rng);
    return v;
}

QuadraticTask small_quadratic() {
    QuadraticSpec s;
    s.dim = 10;
    s.samples = 1000;
    s.clients = 10;
    s.seed = 4;
    return generate_quadratic(s);
}

LogisticTask small_logistic() {
    LogisticSpec s;
    s.dim = 8;
    s.samples = 400;
    s.clients = 4;
    s.seed = 6;
    return generate_logistic(s);
}

double relative_error(const Vector& a, const Vector& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-12);
}

}  // namespace

TEST(Quadratic, OnesColumnInstance) {
    RowMatrix a = RowMatrix::Ones(4, 1);
    QuadraticTask task(a, Vector::Zero(4), contiguous_partition(4, 2));
    EXPECT_NEAR(task.minimizer()(0), 0.0, 1e-15);
    EXPECT_NEAR(task.optimal_value(), 0.0, 1e-15);
    EXPECT_NEAR(task.smoothness(), 1.0, 1e-15);
}

TEST(Quadratic, IsotropicSpectrum) {
    QuadraticSpec s;
    s.dim = 6;
    s.samples = 60;
    s.clients = 3;
    s.condition_number = 1.0;
    s.smoothness = 2.5;
    auto task = generate_quadratic(s);
    const RowMatrix& a = task.design();
    Eigen::MatrixXd gram = a.transpose() * a / static_cast<double>(a.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) EXPECT_NEAR(eig.eigenvalues()(k), 2.5, 1e-10);
    EXPECT_NEAR(task.smoothness(), 2.5, 1e-12);
}

TEST(Quadratic, SmoothnessMatchesPowerIteration) {
    auto task = small_quadratic();
    const RowMatrix& a = task.design();
    Eigen::MatrixXd gram = a.transpose() * a / static_cast<double>(a.rows());
    EXPECT_NEAR(oracle::power_iteration(gram), task.smoothness(), 1e-6);
    EXPECT_NEAR(task.smoothness(), 1.0, 1e-9);
}

TEST(Quadratic, OptimumIsStationary) {
    auto task = small_quadratic();
    EXPECT_LE(task.gradient(task.minimizer()).norm(), 1e-8);
    auto all = std::vector<std::size_t>(task.num_samples());
    std::iota(all.begin(), all.end(), 0);
    EXPECT_LE(task.batch_gradient(task.minimizer(), all).norm(), 1e-8);
}

TEST(Quadratic, RejectsBadSpecs) {
    QuadraticSpec s;
    s.samples = 5;
    s.dim = 10;
    EXPECT_THROW(generate_quadratic(s), InvalidShape);
    s = QuadraticSpec{};
    s.condition_number = 0.5;
    EXPECT_THROW(generate_quadratic(s), InvalidShape);
    s = QuadraticSpec{};
    s.samples = 1001;
    EXPECT_THROW(generate_quadratic(s), InvalidShape);
}

TEST(Logistic, SmoothnessFormula) {
    auto task = small_logistic();
    const RowMatrix& x = task.features();
    Eigen::MatrixXd gram = x.transpose() * x / static_cast<double>(x.rows());
    EXPECT_NEAR(task.smoothness(), 0.25 * oracle::power_iteration(gram) + task.regularization(), 1e-9);
}

TEST(Logistic, OptimumIsStationary) {
    auto task = small_logistic();
    EXPECT_LE(task.gradient(task.minimizer()).norm(), 1e-10);
    EXPECT_NEAR(task.loss(task.minimizer()), task.optimal_value(), 0.0);
}

TEST(Logistic, RejectsBadLabels) {
    RowMatrix x = RowMatrix::Ones(2, 1);
    Vector y(2);
    y << 1.0, 0.0;
    EXPECT_THROW(LogisticTask(x, y, 0.1, contiguous_partition(2, 1)), InvalidShape);
}

TEST(TaskOracles, FiniteDifferenceGradients) {
    auto q = small_quadratic();
    auto l = small_logistic();
    std::mt19937_64 rng(8);
    for (const Task* task : {static_cast<const Task*>(&q), static_cast<const Task*>(&l)}) {
        for (int p = 0; p < 10; ++p) {
            Vector x = random_vector(static_cast<Eigen::Index>(task->dimension()), rng);
            Vector fd = oracle::finite_difference_gradient([&](const Vector& z) { return task->loss(z); }, x);
            EXPECT_LE(relative_error(task->gradient(x), fd), 1e-5) << task->kind();
            auto [f, g] = task->loss_and_gradient(x);
            EXPECT_EQ(f, task->loss(x));
            EXPECT_LE(relative_error(g, task->gradient(x)), 1e-14);
        }
    }
}

TEST(TaskOracles, PerSampleGradientsAverageToFullGradient) {
    auto l = small_logistic();
    std::mt19937_64 rng(9);
    Vector x = random_vector(8, rng);
    Vector acc = Vector::Zero(8);
    for (std::size_t i = 0; i < l.num_samples(); ++i) acc += l.sample_gradient(x, i);
    EXPECT_LE(relative_error(acc / static_cast<double>(l.num_samples()), l.gradient(x)), 1e-12);
}

TEST(TaskOracles, LossAboveOptimum) {
    auto q = small_quadratic();
    auto l = small_logistic();
    std::mt19937_64 rng(10);
    for (int p = 0; p < 100; ++p) {
        EXPECT_GE(q.loss(random_vector(10, rng, 2.0)), q.optimal_value());
        EXPECT_GE(l.loss(random_vector(8, rng, 2.0)), l.optimal_value());
    }
}

TEST(TaskOracles, GradientLipschitz) {
    auto q = small_quadratic();
    auto l = small_logistic();
    std::mt19937_64 rng(12);
    for (int p = 0; p < 100; ++p) {
        Vector x = random_vector(10, rng, 3.0), y = random_vector(10, rng, 3.0);
        EXPECT_LE((q.gradient(x) - q.gradient(y)).norm(), q.smoothness() * (x - y).norm() * (1 + 1e-12));
        Vector u = random_vector(8, rng, 3.0), v = random_vector(8, rng, 3.0);
        EXPECT_LE((l.gradient(u) - l.gradient(v)).norm(), l.smoothness() * (u - v).norm() * (1 + 1e-12));
    }
}

TEST(Partition, RandomSplitIsDisjointCover) {
    auto p = random_partition(120, 6, 3);
    ASSERT_EQ(p.size(), 6u);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& part : p) {
        EXPECT_EQ(part.size(), 20u);
        total += part.size();
        seen.insert(part.begin(), part.end());
    }
    EXPECT_EQ(total, 120u);
    EXPECT_EQ(seen.size(), 120u);
    EXPECT_EQ(*seen.rbegin(), 119u);
    EXPECT_EQ(random_partition(120, 6, 3), p);
    EXPECT_NE(random_partition(120, 6, 4), p);
}

TEST(Partition, RejectsUnevenSplits) {
    EXPECT_THROW(random_partition(10, 3, 1), InvalidShape);
    EXPECT_THROW(contiguous_partition(10, 0), InvalidShape);
    RowMatrix a = RowMatrix::Ones(4, 1);
    Partition overlap{{0, 1}, {1, 2, 3}};
    EXPECT_THROW(QuadraticTask(a, Vector::Zero(4), overlap), InvalidShape);
    Partition missing{{0, 1}, {2}};
    EXPECT_THROW(QuadraticTask(a, Vector::Zero(4), missing), InvalidShape);
}

TEST(StochasticGradient, FullBatchIsLocalGradient) {
    auto q = small_quadratic();
    std::mt19937_64 rng(13);
    Vector x = random_vector(10, rng);
    Engine eng(1);
    EXPECT_EQ(stochastic_gradient(q, x, 3, q.client_indices(3).size(), eng), q.local_gradient(x, 3));
}

TEST(StochasticGradient, BatchSizeChecked) {
    auto q = small_quadratic();
    Engine eng(1);
    Vector x = Vector::Zero(10);
    EXPECT_THROW(stochastic_gradient(q, x, 0, 0, eng), InvalidShape);
    EXPECT_THROW(stochastic_gradient(q, x, 0, 101, eng), InvalidShape);
}

TEST(StochasticGradient, UnbiasedForLocalGradient) {
    auto q = small_quadratic();
    std::mt19937_64 rng(14);
    Vector x = random_vector(10, rng);
    Engine eng(2);
    const int draws = 10000;
    Vector sum = Vector::Zero(10), sum_sq = Vector::Zero(10);
    for (int k = 0; k < draws; ++k) {
        Vector g = stochastic_gradient(q, x, 5, 10, eng);
        sum += g;
        sum_sq += g.cwiseProduct(g);
    }
    Vector mean = sum / draws;
    Vector var = sum_sq / draws - mean.cwiseProduct(mean);
    Vector target = q.local_gradient(x, 5);
    for (Eigen::Index k = 0; k < 10; ++k) EXPECT_LE(std::abs(mean(k) - target(k)), 3.0 * std::sqrt(var(k) / draws));
}

TEST(StochasticGradient, UnbiasedForGlobalGradientOverClients) {
    auto q = small_quadratic();
    std::mt19937_64 rng(15);
    Vector x = random_vector(10, rng);
    Engine eng(3);
    std::uniform_int_distribution<std::size_t> client(0, 9);
    const int draws = 100000;
    Vector sum = Vector::Zero(10), sum_sq = Vector::Zero(10);
    for (int k = 0; k < draws; ++k) {
        Vector g = stochastic_gradient(q, x, client(eng), 1, eng);
        sum += g;
        sum_sq += g.cwiseProduct(g);
    }
    Vector mean = sum / draws;
    Vector var = sum_sq / draws - mean.cwiseProduct(mean);
    Vector target = q.gradient(x);
    for (Eigen::Index k = 0; k < 10; ++k) EXPECT_LE(std::abs(mean(k) - target(k)), 3.0 * std::sqrt(var(k) / draws));
}

TEST(Sigma, TwoPointClosedForm) {
    // l_1 = (x - 1)^2 / 2, l_2 = (x + 1)^2 / 2: per-sample gradients x -/+ 1, variance 1.
    RowMatrix a = RowMatrix::Ones(2, 1);
    Vector b(2);
    b << 1.0, -1.0;
    QuadraticTask task(a, b, contiguous_partition(2, 1));
    std::vector<Vector> probes;
    for (int k = 0; k < 10; ++k) probes.push_back(Vector::Constant(1, -3.0 + k));
    auto prof = estimate_sigma_sq(task, probes, 2, 0);
    EXPECT_NEAR(prof.max_variance, 1.0, 1e-15);
    EXPECT_NEAR(prof.sigma_sq, 1.1, 1e-15);
}

TEST(Sigma, IdenticalSamplesHaveNoNoise) {
    RowMatrix a(4, 2);
    a << 1, 2, 1, 2, 1, 2, 1, 2;
    QuadraticTask task(a, Vector::Constant(4, 3.0), contiguous_partition(4, 2));
    auto probes = probe_points(task, Vector::Constant(2, 5.0), 12, 1);
    EXPECT_EQ(estimate_sigma_sq(task, probes, 4, 0).sigma_sq, 0.0);
}

TEST(Sigma, RepeatableAndChecked) {
    auto q = small_quadratic();
    auto probes = probe_points(q, Vector::Zero(10), 10, 5);
    auto a = estimate_sigma_sq(q, probes, 50, 9);
    auto b = estimate_sigma_sq(q, probes, 50, 9);
    EXPECT_EQ(a.sigma_sq, b.sigma_sq);
    EXPECT_GT(a.sigma_sq, 0.0);
    std::vector<Vector> few(probes.begin(), probes.begin() + 9);
    EXPECT_THROW(estimate_sigma_sq(q, few, 50, 9), InvalidArgument);
}

TEST(Sigma, ProbesStayInsideBall) {
    auto q = small_quadratic();
    Vector x0 = Vector::Zero(10);
    const double radius = 2.0 * (x0 - q.minimizer()).norm();
    auto probes = probe_points(q, x0, 200, 7);
    ASSERT_EQ(probes.size(), 200u);
    for (const auto& p : probes) EXPECT_LE((p - q.minimizer()).norm(), radius * (1 + 1e-12));
    EXPECT_EQ(probe_points(q, x0, 200, 7)[17], probes[17]);
}
