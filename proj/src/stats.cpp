#include "ehfl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>

#include "ehfl/errors.hpp"

namespace ehfl {

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

SignTest sign_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeMismatch("sign test needs paired samples");
    SignTest out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i])
            ++out.wins;
        else if (a[i] > b[i])
            ++out.losses;
        else
            ++out.ties;
    }
    const std::size_t n = out.wins + out.losses;
    if (n == 0) return out;
    const boost::math::binomial_distribution<double> dist(static_cast<double>(n), 0.5);
    const double k = static_cast<double>(std::min(out.wins, out.losses));
    out.p_value = std::min(1.0, 2.0 * boost::math::cdf(dist, k));
    return out;
}

std::map<std::size_t, std::size_t> histogram(std::span<const std::size_t> values) {
    std::map<std::size_t, std::size_t> h;
    for (std::size_t v : values) ++h[v];
    return h;
}

}  // namespace ehfl
