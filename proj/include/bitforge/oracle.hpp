#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "bitforge/coding.hpp"
#include "bitforge/rng.hpp"

namespace bitforge::oracle {

/// History emitted a bit the current posterior gives probability zero.
class ImpossibleHistoryError : public std::runtime_error {
public:
    explicit ImpossibleHistoryError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Exact conditional law of the hidden chain state given an observed bit
/// prefix: finitely many atoms plus at most one lumped tail covering
/// {start, start+1, ...} with relative weights 2^-s. The tail start always
/// sits above every zero-valued exception of the coding, so every tail
/// state emits 1 and the tail is closed under the filter step.
struct Posterior {
    struct Tail {
        std::int64_t start;
        double mass;
    };

    std::vector<std::pair<std::int64_t, double>> atoms; // sorted by state
    std::optional<Tail> tail;

    double total_mass() const;
    double mass_at(std::int64_t s) const;
};

/// Stationary law of the hidden chain, with states below the coding's
/// zero-exception ceiling split out as atoms.
Posterior prior_posterior(const coding::CodingFunction& f);

/// One Bayes step: push through the transition law, condition on the
/// emitted bit, renormalize. Throws ImpossibleHistoryError when the bit
/// has zero probability.
Posterior filter_step(const Posterior& post, const coding::CodingFunction& f, coding::Bit bit);

/// P(next emitted bit = 1) under the posterior.
double cond_prob_next(const Posterior& post, const coding::CodingFunction& f);

/// P(X_{n+1} = 1 | X_0..X_n = bits) for the stationary coded process.
double cond_prob_history(const coding::CodingFunction& f, const coding::Bits& bits);

struct ProbInterval {
    double lo;
    double hi;

    bool contains(double p) const { return lo <= p && p <= hi; }
    double width() const { return hi - lo; }
};

/// Independent oracle: enumerate every hidden path of length |bits|+1
/// under the stationary initial law, cap the initial state so the
/// discarded stationary mass is <= mass_tol, and bound the conditional
/// probability by charging the discarded mass to either side.
ProbInterval brute_force_cond_prob(const coding::CodingFunction& f, const coding::Bits& bits, double mass_tol);

/// One-sided past (..., x_{-1}, x_0) known to finite depth; suffix is
/// stored oldest first, so suffix.back() is x_0.
struct History {
    coding::Bits suffix;

    std::int64_t known_depth() const { return static_cast<std::int64_t>(suffix.size()); }
};

/// Partial sum of the weighted past metric sum_i 2^-(i+1) |x_-i - y_-i|
/// over i < depth, plus the truncation bound 2^-depth.
std::pair<double, double> d_star(const History& x, const History& y, std::int64_t depth);

/// Max |conditional probability difference| between bits' last-reset
/// suffix on its own and the same suffix behind n random positive-
/// probability prefixes. The reset pattern pins the hidden state, so the
/// contract is 0 within 1e-12.
double continuity_probe(const coding::CodingFunction& f, const coding::Bits& bits, std::int64_t n_prefixes,
                        RandomStream& rng);

} // namespace bitforge::oracle
