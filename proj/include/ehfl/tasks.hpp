#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ehfl/energy.hpp"
#include "ehfl/rng.hpp"

namespace ehfl {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Disjoint sample index sets, one per client.
using Partition = std::vector<std::vector<std::size_t>>;

/// Random equal split of {0..N-1} into M parts. N must be divisible by M.
Partition random_partition(std::size_t samples, std::size_t clients, std::uint64_t seed);
/// Contiguous equal split, used for hand-built instances.
Partition contiguous_partition(std::size_t samples, std::size_t clients);

/// Finite-sum objective f(x) = (1/N) sum_z l(x; z) with known smoothness and optimum.
class Task {
public:
    virtual ~Task() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::size_t num_samples() const = 0;

    virtual double loss(const Vector& x) const = 0;
    virtual Vector gradient(const Vector& x) const = 0;
    virtual std::pair<double, Vector> loss_and_gradient(const Vector& x) const { return {loss(x), gradient(x)}; }
    /// out += grad l(x; z_i)
    virtual void add_sample_gradient(const Vector& x, std::size_t i, Vector& out) const = 0;

    Vector sample_gradient(const Vector& x, std::size_t i) const;
    /// Mean of the per-sample gradients over `indices`.
    Vector batch_gradient(const Vector& x, std::span<const std::size_t> indices) const;
    /// Exact gradient of client i's local objective f_i.
    Vector local_gradient(const Vector& x, ClientId client) const;

    std::size_t num_clients() const noexcept { return partition_.size(); }
    const Partition& partition() const noexcept { return partition_; }
    std::span<const std::size_t> client_indices(ClientId client) const { return partition_.at(client); }

    double smoothness() const noexcept { return smoothness_; }
    double optimal_value() const noexcept { return f_star_; }
    const Vector& minimizer() const noexcept { return x_star_; }

protected:
    void set_partition(Partition p);
    double smoothness_ = 0.0;
    double f_star_ = 0.0;
    Vector x_star_;

private:
    Partition partition_;
};

/// f(x) = (1/(2N)) ||A x - b||^2.
class QuadraticTask final : public Task {
public:
    /// L is taken as the largest eigenvalue of (1/N) A^T A.
    QuadraticTask(RowMatrix a, Vector b, Partition partition);
    /// L supplied by the caller, e.g. known from construction of A.
    QuadraticTask(RowMatrix a, Vector b, Partition partition, double smoothness);

    std::string kind() const override { return "quadratic"; }
    std::size_t dimension() const override { return static_cast<std::size_t>(a_.cols()); }
    std::size_t num_samples() const override { return static_cast<std::size_t>(a_.rows()); }
    double loss(const Vector& x) const override;
    Vector gradient(const Vector& x) const override;
    std::pair<double, Vector> loss_and_gradient(const Vector& x) const override;
    void add_sample_gradient(const Vector& x, std::size_t i, Vector& out) const override;

    const RowMatrix& design() const noexcept { return a_; }
    const Vector& targets() const noexcept { return b_; }

private:
    void solve_optimum();
    RowMatrix a_;
    Vector b_;
};

/// l(x; a, y) = log(1 + exp(-y a^T x)) + (mu/2) ||x||^2 with y in {-1, +1}.
class LogisticTask final : public Task {
public:
    /// Solves for f* and x* by damped Newton.
    LogisticTask(RowMatrix features, Vector labels, double mu, Partition partition);
    /// Restores a task whose optimum was solved earlier.
    LogisticTask(RowMatrix features, Vector labels, double mu, Partition partition, Vector x_star);

    std::string kind() const override { return "logistic"; }
    std::size_t dimension() const override { return static_cast<std::size_t>(x_.cols()); }
    std::size_t num_samples() const override { return static_cast<std::size_t>(x_.rows()); }
    double loss(const Vector& x) const override;
    Vector gradient(const Vector& x) const override;
    std::pair<double, Vector> loss_and_gradient(const Vector& x) const override;
    void add_sample_gradient(const Vector& x, std::size_t i, Vector& out) const override;

    const RowMatrix& features() const noexcept { return x_; }
    const Vector& labels() const noexcept { return y_; }
    double regularization() const noexcept { return mu_; }

private:
    void init_constants();
    void solve_optimum();
    RowMatrix x_;
    Vector y_;
    double mu_;
};

struct QuadraticSpec {
    std::size_t dim = 10;
    std::size_t samples = 1000;
    std::size_t clients = 10;
    double condition_number = 10.0;
    double smoothness = 1.0;  // largest eigenvalue of (1/N) A^T A
    double noise_std = 1.0;   // residual noise in b = A x_true + noise
    std::uint64_t seed = 1;
};

/// A is built as sqrt(N) U diag(sqrt(spectrum)) V^T with a geometric spectrum from
/// `smoothness` down to `smoothness / condition_number`, so L is exact.
QuadraticTask generate_quadratic(const QuadraticSpec& spec);

struct LogisticSpec {
    std::size_t dim = 20;
    std::size_t samples = 2000;
    std::size_t clients = 10;
    double mu = 0.01;
    double feature_scale = 1.0;  // features ~ N(0, feature_scale^2 / dim)
    double signal = 2.0;         // std of the true margin a^T w_true
    std::uint64_t seed = 1;
};

LogisticTask generate_logistic(const LogisticSpec& spec);

/// Mini-batch gradient at client `client`, batch drawn uniformly without replacement.
Vector stochastic_gradient(const Task& task, const Vector& x, ClientId client, std::size_t batch_size,
                           Engine& rng);

struct NoiseProfile {
    double sigma_sq = 0.0;      // safety factor times the largest probed variance
    double max_variance = 0.0;  // largest empirical per-sample variance seen
    double radius = 0.0;        // largest probe distance from x*
    std::size_t probes = 0;
};

/// Points drawn uniformly from the ball of radius 2 ||x0 - x*|| around x*.
std::vector<Vector> probe_points(const Task& task, const Vector& x0, std::size_t count, std::uint64_t seed);

/// sigma^2 = 1.1 * max over probes of E_z ||grad l(x; z) - grad f(x)||^2.
/// With samples_per_point >= N the expectation is exact over the dataset; otherwise
/// it is a Monte Carlo estimate from uniformly drawn samples.
NoiseProfile estimate_sigma_sq(const Task& task, std::span<const Vector> probes, std::size_t samples_per_point,
                               std::uint64_t seed);

inline constexpr double kSigmaSafetyFactor = 1.1;

}  // namespace ehfl
