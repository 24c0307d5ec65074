#pragma once

#include <cstddef>
#include <map>
#include <span>

namespace ehfl {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1); zero for fewer than two values.
double stddev(std::span<const double> xs);

struct SignTest {
    std::size_t wins = 0;    // pairs with a < b
    std::size_t losses = 0;  // pairs with a > b
    std::size_t ties = 0;
    double p_value = 1.0;    // two-sided exact binomial, ties dropped
};

/// Paired sign test of H0: P(a < b) = 1/2.
SignTest sign_test(std::span<const double> a, std::span<const double> b);

std::map<std::size_t, std::size_t> histogram(std::span<const std::size_t> values);

}  // namespace ehfl
