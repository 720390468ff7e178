#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bitforge/dyadic.hpp"
#include "bitforge/rng.hpp"

namespace bitforge::chain {

/// State of the driving chain: a non-negative integer. From 0 the chain
/// moves to 1, from 1 to 2, and from any s >= 2 it resets to 0 or climbs
/// to s+1 with probability 1/2 each.
using ChainState = std::int64_t;

struct ChainPath {
    std::vector<ChainState> states;

    std::size_t size() const { return states.size(); }
    bool operator==(const ChainPath&) const = default;
};

struct WeightedPath {
    ChainPath path;
    Dyadic probability; // product of transition probabilities, each 1 or 1/2
};

/// Whether (a, b) is a legal one-step transition.
bool legal_transition(ChainState a, ChainState b);

/// Whether every consecutive pair of states is a legal transition.
bool is_legal_path(const ChainPath& p);

/// Stationary probability: 1/4 for states 0 and 1, 2^-s for s >= 2.
double stationary_prob(ChainState s);

/// Draw from the stationary law by inverse CDF on the geometric tail; no
/// truncation, every state has its exact dyadic probability.
ChainState stationary_sample(RandomStream& rng);

/// One transition from s.
ChainState step(ChainState s, RandomStream& rng);

/// Path of `length` states starting at `initial`.
ChainPath simulate_path(ChainState initial, std::int64_t length, RandomStream& rng);

/// First index i with path.states[i] == 2k, or nullopt.
std::optional<std::int64_t> hitting_time(const ChainPath& path, std::int64_t k);

struct EnumerationResult {
    std::vector<WeightedPath> paths; // decreasing probability
    Dyadic accumulated;
    double residual_mass = 0.0; // 1 - accumulated, exact dyadic folded to double
};

/// Thrown when the path budget runs out before the requested mass target;
/// carries how far the enumeration got.
class EnumerationBudgetError : public std::runtime_error {
public:
    EnumerationBudgetError(std::string msg, double accumulated, std::int64_t paths)
        : std::runtime_error(std::move(msg)), accumulated_mass(accumulated), paths_generated(paths) {}
    double accumulated_mass;
    std::int64_t paths_generated;
};

/// Enumerate paths from state 0 to the first visit of state 2k in
/// decreasing-probability order until the accumulated mass reaches
/// 1 - mass_tol. Probabilities are exact dyadics; a climb to height h >= 2
/// followed by a reset contributes 2^-(h-1) and the final climb 2^-(2k-2).
/// Throws EnumerationBudgetError if the budget is exhausted first.
EnumerationResult enumerate_paths_to_hit(std::int64_t k, double mass_tol, std::int64_t budget = 1'000'000);

/// Streaming form: visitor(path, prob) is called per path in decreasing
/// probability order and returns false to stop early. Returns accumulated
/// mass and the path count. Does not throw on budget; callers inspect the
/// accumulated mass themselves.
struct StreamStats {
    Dyadic accumulated;
    std::int64_t paths = 0;
    bool target_met = false;
};
StreamStats for_each_hit_path(std::int64_t k, double mass_tol, std::int64_t budget,
                              const std::function<bool(const ChainPath&, const Dyadic&)>& visitor);

} // namespace bitforge::chain
