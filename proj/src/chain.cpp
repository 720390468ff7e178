#include "bitforge/chain.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bitforge::chain {

bool legal_transition(ChainState a, ChainState b) {
    if (a == 0) return b == 1;
    if (a == 1) return b == 2;
    return b == 0 || b == a + 1;
}

bool is_legal_path(const ChainPath& p) {
    if (p.states.empty()) return false;
    for (const ChainState s : p.states)
        if (s < 0) return false;
    for (std::size_t i = 0; i + 1 < p.states.size(); ++i)
        if (!legal_transition(p.states[i], p.states[i + 1])) return false;
    return true;
}

double stationary_prob(ChainState s) {
    if (s < 0) throw std::invalid_argument("stationary_prob: negative state");
    if (s <= 1) return 0.25;
    return std::ldexp(1.0, static_cast<int>(-s));
}

ChainState stationary_sample(RandomStream& rng) {
    const std::uint64_t r = rng.next_u64();
    const std::uint64_t top2 = r >> 62;
    if (top2 == 0) return 0;
    if (top2 == 1) return 1;
    // Top bit set (mass 1/2): the run of leading ones is geometric, giving
    // state 1 + run with exact probability 2^-(state) overall.
    return 1 + std::countl_one(r);
}

ChainState step(ChainState s, RandomStream& rng) {
    if (s < 0) throw std::invalid_argument("step: negative state");
    if (s == 0) return 1;
    if (s == 1) return 2;
    return rng.coin() ? s + 1 : 0;
}

ChainPath simulate_path(ChainState initial, std::int64_t length, RandomStream& rng) {
    if (length < 1) throw std::invalid_argument("simulate_path: length must be >= 1");
    if (initial < 0) throw std::invalid_argument("simulate_path: negative initial state");
    if (initial > std::numeric_limits<ChainState>::max() - length)
        throw std::overflow_error("simulate_path: state representation would overflow");
    ChainPath p;
    p.states.reserve(static_cast<std::size_t>(length));
    ChainState s = initial;
    p.states.push_back(s);
    for (std::int64_t i = 1; i < length; ++i) {
        s = step(s, rng);
        p.states.push_back(s);
    }
    return p;
}

std::optional<std::int64_t> hitting_time(const ChainPath& path, std::int64_t k) {
    if (k < 1) throw std::invalid_argument("hitting_time: k must be >= 1");
    const ChainState target = 2 * k;
    for (std::size_t i = 0; i < path.states.size(); ++i)
        if (path.states[i] == target) return static_cast<std::int64_t>(i);
    return std::nullopt;
}

namespace {

// Paths from 0 to the first visit of 2k decompose into excursion heights
// h_1..h_m in [2, 2k-1] followed by the final climb. Cost of a height is
// h-1 halvings, so all paths at total cost c share probability
// 2^-(c + 2k - 2); generating cost levels in order yields the paths in
// decreasing-probability order with no priority queue.
struct LevelEnumerator {
    std::int64_t k;
    int max_part;               // 2k - 2, highest excursion cost
    std::vector<int> parts;     // current height costs h_i - 1
    ChainPath scratch;
    const std::function<bool(const ChainPath&, const Dyadic&)>* visit;
    Dyadic level_prob;
    bool stopped = false;
    std::int64_t emitted = 0;
    std::int64_t budget;

    bool emit_current() {
        scratch.states.clear();
        for (const int p : parts)
            for (ChainState s = 0; s <= p + 1; ++s) scratch.states.push_back(s);
        for (ChainState s = 0; s <= 2 * k; ++s) scratch.states.push_back(s);
        ++emitted;
        if (!(*visit)(scratch, level_prob)) {
            stopped = true;
            return false;
        }
        return emitted < budget;
    }

    bool rec(int remaining) {
        if (remaining == 0) return emit_current();
        for (int p = 1; p <= std::min(remaining, max_part); ++p) {
            parts.push_back(p);
            const bool keep_going = rec(remaining - p);
            parts.pop_back();
            if (!keep_going) return false;
        }
        return true;
    }
};

} // namespace

StreamStats for_each_hit_path(std::int64_t k, double mass_tol, std::int64_t budget,
                              const std::function<bool(const ChainPath&, const Dyadic&)>& visitor) {
    if (k < 1) throw std::invalid_argument("for_each_hit_path: k must be >= 1");
    if (!(mass_tol > 0.0 && mass_tol < 1.0)) throw std::invalid_argument("for_each_hit_path: mass_tol must be in (0,1)");
    if (budget < 1) throw std::invalid_argument("for_each_hit_path: budget must be >= 1");

    StreamStats stats;
    LevelEnumerator e;
    e.k = k;
    e.max_part = static_cast<int>(2 * k - 2);
    e.visit = &visitor;
    e.budget = budget;

    const int final_cost = static_cast<int>(2 * k - 2);
    for (int cost = 0;; ++cost) {
        e.level_prob = Dyadic::pow2(cost + final_cost);
        const std::int64_t before = e.emitted;
        const bool keep_going = e.rec(cost);
        const std::int64_t at_level = e.emitted - before;
        if (at_level > 0) {
            Dyadic level_mass{static_cast<std::uint64_t>(at_level), cost + final_cost};
            level_mass.normalize();
            stats.accumulated += level_mass;
        }
        stats.paths = e.emitted;
        const double residual = (Dyadic::one() - stats.accumulated).to_double();
        if (residual <= mass_tol) {
            stats.target_met = true;
            return stats;
        }
        if (e.stopped || !keep_going) return stats;
    }
}

EnumerationResult enumerate_paths_to_hit(std::int64_t k, double mass_tol, std::int64_t budget) {
    EnumerationResult out;
    StreamStats stats = for_each_hit_path(k, mass_tol, budget, [&](const ChainPath& p, const Dyadic& prob) {
        out.paths.push_back(WeightedPath{p, prob});
        return true;
    });
    out.accumulated = stats.accumulated;
    out.residual_mass = (Dyadic::one() - stats.accumulated).to_double();
    if (!stats.target_met)
        throw EnumerationBudgetError("enumerate_paths_to_hit: budget of " + std::to_string(budget) +
                                         " paths exhausted at accumulated mass " + std::to_string(out.accumulated.to_double()) +
                                         " (k too large for exact mode at this tolerance)",
                                     out.accumulated.to_double(), stats.paths);
    return out;
}

} // namespace bitforge::chain
