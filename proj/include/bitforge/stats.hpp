#pragma once

#include <cstdint>

namespace bitforge::stats {

/// Two-sided standard normal quantile for the given confidence level,
/// e.g. 0.99 -> 2.5758...
double z_for_confidence(double confidence);

/// Inverse standard normal CDF (Acklam's rational approximation,
/// |relative error| < 1.2e-9 — far below any tolerance used here).
double inverse_normal_cdf(double p);

struct Interval {
    double est;
    double lo;
    double hi;
};

/// Wilson score interval for `hits` successes out of `n` Bernoulli trials.
Interval wilson_interval(std::int64_t hits, std::int64_t n, double confidence);

} // namespace bitforge::stats
