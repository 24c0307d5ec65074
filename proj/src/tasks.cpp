#include "ehfl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ehfl/errors.hpp"

namespace ehfl {
namespace {

double largest_eigenvalue(const RowMatrix& a) {
    const double n = static_cast<double>(a.rows());
    Eigen::MatrixXd gram = (a.transpose() * a) / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Engine& eng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(eng);
    return m;
}

Eigen::MatrixXd orthonormal_columns(Eigen::Index rows, Eigen::Index cols, Engine& eng) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(rows, cols, eng));
    return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

// 1 / (1 + exp(m))
double sigmoid_neg(double m) {
    if (m >= 0) {
        const double e = std::exp(-m);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(m));
}

}  // namespace

Partition random_partition(std::size_t samples, std::size_t clients, std::uint64_t seed) {
    if (clients == 0 || samples == 0 || samples % clients != 0)
        throw InvalidShape("sample count must be a positive multiple of the client count");
    std::vector<std::size_t> perm(samples);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Engine eng = make_engine(seed, StreamDomain::TaskGeneration, 0xBA5E);
    std::shuffle(perm.begin(), perm.end(), eng);
    const std::size_t per = samples / clients;
    Partition p(clients);
    for (std::size_t c = 0; c < clients; ++c) {
        p[c].assign(perm.begin() + static_cast<std::ptrdiff_t>(c * per),
                    perm.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
        std::sort(p[c].begin(), p[c].end());
    }
    return p;
}

Partition contiguous_partition(std::size_t samples, std::size_t clients) {
    if (clients == 0 || samples == 0 || samples % clients != 0)
        throw InvalidShape("sample count must be a positive multiple of the client count");
    const std::size_t per = samples / clients;
    Partition p(clients);
    for (std::size_t c = 0; c < clients; ++c) {
        p[c].resize(per);
        std::iota(p[c].begin(), p[c].end(), c * per);
    }
    return p;
}

// ---------------------------------------------------------------------------

void Task::set_partition(Partition p) {
    std::vector<char> seen(num_samples(), 0);
    std::size_t total = 0;
    for (const auto& part : p) {
        if (part.empty()) throw InvalidShape("client partition is empty");
        for (std::size_t i : part) {
            if (i >= seen.size() || seen[i]) throw InvalidShape("partition is not a disjoint cover");
            seen[i] = 1;
        }
        total += part.size();
    }
    if (total != num_samples()) throw InvalidShape("partition does not cover every sample");
    partition_ = std::move(p);
}

Vector Task::sample_gradient(const Vector& x, std::size_t i) const {
    Vector g = Vector::Zero(x.size());
    add_sample_gradient(x, i, g);
    return g;
}

Vector Task::batch_gradient(const Vector& x, std::span<const std::size_t> indices) const {
    if (indices.empty()) throw InvalidShape("empty batch");
    Vector g = Vector::Zero(x.size());
    for (std::size_t i : indices) add_sample_gradient(x, i, g);
    return g / static_cast<double>(indices.size());
}

Vector Task::local_gradient(const Vector& x, ClientId client) const {
    return batch_gradient(x, client_indices(client));
}

// ---------------------------------------------------------------------------

QuadraticTask::QuadraticTask(RowMatrix a, Vector b, Partition partition) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() == 0 || a_.cols() == 0 || b_.size() != a_.rows()) throw InvalidShape("A must be N x d with b of length N");
    set_partition(std::move(partition));
    smoothness_ = largest_eigenvalue(a_);
    if (!(smoothness_ > 0)) throw InvalidShape("A^T A is zero; smoothness must be positive");
    solve_optimum();
}

QuadraticTask::QuadraticTask(RowMatrix a, Vector b, Partition partition, double smoothness)
    : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() == 0 || a_.cols() == 0 || b_.size() != a_.rows()) throw InvalidShape("A must be N x d with b of length N");
    if (!(smoothness > 0)) throw InvalidShape("smoothness must be positive");
    set_partition(std::move(partition));
    smoothness_ = smoothness;
    solve_optimum();
}

void QuadraticTask::solve_optimum() {
    x_star_ = a_.colPivHouseholderQr().solve(b_);
    f_star_ = loss(x_star_);
}

double QuadraticTask::loss(const Vector& x) const {
    return 0.5 * (a_ * x - b_).squaredNorm() / static_cast<double>(a_.rows());
}

Vector QuadraticTask::gradient(const Vector& x) const {
    return a_.transpose() * (a_ * x - b_) / static_cast<double>(a_.rows());
}

std::pair<double, Vector> QuadraticTask::loss_and_gradient(const Vector& x) const {
    const Vector r = a_ * x - b_;
    const double n = static_cast<double>(a_.rows());
    return {0.5 * r.squaredNorm() / n, a_.transpose() * r / n};
}

void QuadraticTask::add_sample_gradient(const Vector& x, std::size_t i, Vector& out) const {
    const auto row = a_.row(static_cast<Eigen::Index>(i));
    const double r = row.dot(x) - b_(static_cast<Eigen::Index>(i));
    out.noalias() += r * row.transpose();
}

QuadraticTask generate_quadratic(const QuadraticSpec& spec) {
    if (spec.dim == 0 || spec.samples < spec.dim) throw InvalidShape("need samples >= dim >= 1");
    if (!(spec.condition_number >= 1.0)) throw InvalidShape("condition number must be >= 1");
    if (!(spec.smoothness > 0.0)) throw InvalidShape("smoothness must be positive");
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const auto n = static_cast<Eigen::Index>(spec.samples);
    Engine eng = make_engine(spec.seed, StreamDomain::TaskGeneration, 1);

    Vector spectrum(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const double frac = d == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(d - 1);
        spectrum(k) = spec.smoothness * std::pow(spec.condition_number, -frac);
    }
    spectrum(0) = spec.smoothness;

    const Eigen::MatrixXd u = orthonormal_columns(n, d, eng);
    const Eigen::MatrixXd v = orthonormal_columns(d, d, eng);
    RowMatrix a = std::sqrt(static_cast<double>(n)) * u * spectrum.cwiseSqrt().asDiagonal() * v.transpose();

    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x_true(d);
    for (Eigen::Index k = 0; k < d; ++k) x_true(k) = normal(eng);
    Vector b = a * x_true;
    for (Eigen::Index i = 0; i < n; ++i) b(i) += spec.noise_std * normal(eng);

    return QuadraticTask(std::move(a), std::move(b), random_partition(spec.samples, spec.clients, spec.seed),
                         spec.smoothness);
}

// ---------------------------------------------------------------------------

LogisticTask::LogisticTask(RowMatrix features, Vector labels, double mu, Partition partition)
    : x_(std::move(features)), y_(std::move(labels)), mu_(mu) {
    init_constants();
    set_partition(std::move(partition));
    solve_optimum();
}

LogisticTask::LogisticTask(RowMatrix features, Vector labels, double mu, Partition partition, Vector x_star)
    : x_(std::move(features)), y_(std::move(labels)), mu_(mu) {
    init_constants();
    set_partition(std::move(partition));
    if (x_star.size() != x_.cols()) throw InvalidShape("minimizer has wrong dimension");
    x_star_ = std::move(x_star);
    f_star_ = loss(x_star_);
}

void LogisticTask::init_constants() {
    if (x_.rows() == 0 || x_.cols() == 0 || y_.size() != x_.rows()) throw InvalidShape("features must be N x d with N labels");
    if (!(mu_ >= 0.0)) throw InvalidShape("regularization must be non-negative");
    for (Eigen::Index i = 0; i < y_.size(); ++i)
        if (y_(i) != 1.0 && y_(i) != -1.0) throw InvalidShape("labels must be -1 or +1");
    smoothness_ = 0.25 * largest_eigenvalue(x_) + mu_;
}

void LogisticTask::solve_optimum() {
    // Damped Newton; the Hessian is only d x d.
    const auto d = x_.cols();
    const double n = static_cast<double>(x_.rows());
    Vector x = Vector::Zero(d);
    double fx = loss(x);
    Vector g = gradient(x);
    for (int it = 0; it < 100; ++it) {
        const Vector margins = (x_ * x).cwiseProduct(y_);
        Vector w(margins.size());
        for (Eigen::Index i = 0; i < margins.size(); ++i) {
            const double p = sigmoid_neg(margins(i));
            w(i) = p * (1.0 - p);
        }
        const RowMatrix wx = w.asDiagonal() * x_;
        Eigen::MatrixXd h = x_.transpose() * wx;
        h /= n;
        h.diagonal().array() += mu_;
        const Vector dir = h.ldlt().solve(g);
        const double decrement = g.dot(dir);
        if (!(decrement > 1e-24)) break;
        double t = 1.0;
        Vector trial = x - dir;
        double ft = loss(trial);
        while (ft > fx - 0.25 * t * decrement && t > 1e-12) {
            t *= 0.5;
            trial = x - t * dir;
            ft = loss(trial);
        }
        if (!(ft < fx)) break;
        x = std::move(trial);
        fx = ft;
        g = gradient(x);
    }
    x_star_ = std::move(x);
    f_star_ = fx;
}

double LogisticTask::loss(const Vector& x) const {
    const Vector margins = (x_ * x).cwiseProduct(y_);
    double s = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) s += softplus_neg(margins(i));
    return s / static_cast<double>(x_.rows()) + 0.5 * mu_ * x.squaredNorm();
}

Vector LogisticTask::gradient(const Vector& x) const {
    const Vector margins = (x_ * x).cwiseProduct(y_);
    Vector w(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) w(i) = -y_(i) * sigmoid_neg(margins(i));
    return x_.transpose() * w / static_cast<double>(x_.rows()) + mu_ * x;
}

std::pair<double, Vector> LogisticTask::loss_and_gradient(const Vector& x) const {
    const Vector margins = (x_ * x).cwiseProduct(y_);
    Vector w(margins.size());
    double s = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        s += softplus_neg(margins(i));
        w(i) = -y_(i) * sigmoid_neg(margins(i));
    }
    const double n = static_cast<double>(x_.rows());
    return {s / n + 0.5 * mu_ * x.squaredNorm(), x_.transpose() * w / n + mu_ * x};
}

void LogisticTask::add_sample_gradient(const Vector& x, std::size_t i, Vector& out) const {
    const auto idx = static_cast<Eigen::Index>(i);
    const auto row = x_.row(idx);
    const double yi = y_(idx);
    const double coef = -yi * sigmoid_neg(yi * row.dot(x));
    out.noalias() += coef * row.transpose() + mu_ * x;
}

LogisticTask generate_logistic(const LogisticSpec& spec) {
    if (spec.dim == 0 || spec.samples == 0) throw InvalidShape("need positive dim and samples");
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const auto n = static_cast<Eigen::Index>(spec.samples);
    Engine eng = make_engine(spec.seed, StreamDomain::TaskGeneration, 2);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double scale = spec.feature_scale / std::sqrt(static_cast<double>(d));
    RowMatrix feats(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < d; ++k) feats(i, k) = scale * normal(eng);

    Vector w_true(d);
    for (Eigen::Index k = 0; k < d; ++k) w_true(k) = normal(eng);
    w_true *= spec.signal * std::sqrt(static_cast<double>(d)) / (w_true.norm() * spec.feature_scale);

    Vector labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p_pos = 1.0 / (1.0 + std::exp(-feats.row(i).dot(w_true)));
        labels(i) = uniform01(eng) < p_pos ? 1.0 : -1.0;
    }
    return LogisticTask(std::move(feats), std::move(labels), spec.mu,
                        random_partition(spec.samples, spec.clients, spec.seed));
}

// ---------------------------------------------------------------------------

Vector stochastic_gradient(const Task& task, const Vector& x, ClientId client, std::size_t batch_size, Engine& rng) {
    const auto pool = task.client_indices(client);
    if (batch_size == 0 || batch_size > pool.size())
        throw InvalidShape("batch size must be between 1 and the client partition size");
    if (batch_size == pool.size()) return task.batch_gradient(x, pool);
    std::vector<std::size_t> batch;
    batch.reserve(batch_size);
    std::sample(pool.begin(), pool.end(), std::back_inserter(batch), batch_size, rng);
    return task.batch_gradient(x, batch);
}

std::vector<Vector> probe_points(const Task& task, const Vector& x0, std::size_t count, std::uint64_t seed) {
    const Vector& center = task.minimizer();
    const double radius = 2.0 * (x0 - center).norm();
    const auto d = static_cast<Eigen::Index>(task.dimension());
    Engine eng = make_engine(seed, StreamDomain::Probing, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t p = 0; p < count; ++p) {
        Vector dir(d);
        for (Eigen::Index k = 0; k < d; ++k) dir(k) = normal(eng);
        const double r = radius * std::pow(uniform01(eng), 1.0 / static_cast<double>(d));
        const double nrm = dir.norm();
        out.push_back(nrm > 0 ? Vector(center + (r / nrm) * dir) : center);
    }
    return out;
}

NoiseProfile estimate_sigma_sq(const Task& task, std::span<const Vector> probes, std::size_t samples_per_point,
                               std::uint64_t seed) {
    if (probes.size() < 10) throw InvalidArgument("at least 10 probe points are required");
    if (samples_per_point == 0) throw InvalidArgument("samples per point must be positive");
    const std::size_t n = task.num_samples();
    const bool exact = samples_per_point >= n;
    Engine eng = make_engine(seed, StreamDomain::Probing, 1);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);

    NoiseProfile out;
    out.probes = probes.size();
    out.radius = 0.0;
    for (const Vector& x : probes) {
        out.radius = std::max(out.radius, (x - task.minimizer()).norm());
        const Vector full = task.gradient(x);
        const std::size_t count = exact ? n : samples_per_point;
        double acc = 0.0;
        for (std::size_t s = 0; s < count; ++s) {
            const std::size_t i = exact ? s : pick(eng);
            acc += (task.sample_gradient(x, i) - full).squaredNorm();
        }
        out.max_variance = std::max(out.max_variance, acc / static_cast<double>(count));
    }
    out.sigma_sq = kSigmaSafetyFactor * out.max_variance;
    return out;
}

}  // namespace ehfl
