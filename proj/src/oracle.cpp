#include "bitforge/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "bitforge/chain.hpp"

namespace bitforge::oracle {

namespace {

// Tail components always start at or above this floor, which keeps every
// state in the tail (and every climb target from it) emitting 1.
std::int64_t tail_floor(const coding::CodingFunction& f) { return std::max<std::int64_t>(2, f.largest_zero_exception() + 1); }

Posterior normalized(std::map<std::int64_t, double>&& atoms, std::optional<Posterior::Tail> tail, std::int64_t floor) {
    double total = tail ? tail->mass : 0.0;
    for (const auto& [s, m] : atoms) total += m;
    if (!(total > 0.0)) throw ImpossibleHistoryError("filter_step: observed bit has probability zero under this coding");
    Posterior out;
    out.atoms.reserve(atoms.size());
    for (const auto& [s, m] : atoms)
        if (m > 0.0) out.atoms.emplace_back(s, m / total);
    if (tail) out.tail = Posterior::Tail{tail->start, tail->mass / total};
    // An atom just below the tail with exactly the tail's mass is the
    // geometric head of a one-lower tail; folding it in keeps the
    // representation canonical (the all-ones posterior stays a pure tail).
    while (out.tail && !out.atoms.empty() && out.tail->start - 1 >= floor &&
           out.atoms.back().first == out.tail->start - 1 && out.atoms.back().second == out.tail->mass) {
        out.tail = Posterior::Tail{out.tail->start - 1, 2.0 * out.tail->mass};
        out.atoms.pop_back();
    }
    return out;
}

} // namespace

double Posterior::total_mass() const {
    double t = tail ? tail->mass : 0.0;
    for (const auto& [s, m] : atoms) t += m;
    return t;
}

double Posterior::mass_at(std::int64_t s) const {
    for (const auto& [state, m] : atoms)
        if (state == s) return m;
    if (tail && s >= tail->start) return tail->mass * std::ldexp(1.0, static_cast<int>(tail->start - s - 1));
    return 0.0;
}

Posterior prior_posterior(const coding::CodingFunction& f) {
    const std::int64_t floor = tail_floor(f);
    Posterior out;
    out.atoms.emplace_back(0, 0.25);
    out.atoms.emplace_back(1, 0.25);
    for (std::int64_t s = 2; s < floor; ++s) out.atoms.emplace_back(s, std::ldexp(1.0, static_cast<int>(-s)));
    out.tail = Posterior::Tail{floor, std::ldexp(1.0, static_cast<int>(1 - floor))};
    return out;
}

Posterior filter_step(const Posterior& post, const coding::CodingFunction& f, coding::Bit bit) {
    if (bit != 0 && bit != 1) throw std::invalid_argument("filter_step: bit must be 0 or 1");

    std::map<std::int64_t, double> atoms;
    std::optional<Posterior::Tail> tail;

    // Predict: push atoms and tail through the transition law.
    double reset_mass = 0.0;
    for (const auto& [s, m] : post.atoms) {
        if (s == 0) {
            atoms[1] += m;
        } else if (s == 1) {
            atoms[2] += m;
        } else {
            reset_mass += 0.5 * m;
            atoms[s + 1] += 0.5 * m;
        }
    }
    if (post.tail) {
        reset_mass += 0.5 * post.tail->mass;
        tail = Posterior::Tail{post.tail->start + 1, 0.5 * post.tail->mass};
    }
    if (reset_mass > 0.0) atoms[0] += reset_mass;

    // Condition on the emitted bit. Emissions are deterministic per state,
    // so this is pure support filtering; the whole tail emits 1.
    for (auto it = atoms.begin(); it != atoms.end();)
        it = f.apply(it->first) == bit ? std::next(it) : atoms.erase(it);
    if (tail && bit == 0) tail.reset();

    return normalized(std::move(atoms), tail, tail_floor(f));
}

double cond_prob_next(const Posterior& post, const coding::CodingFunction& f) {
    double p = 0.0;
    for (const auto& [s, m] : post.atoms) {
        if (s == 0) continue;                           // successor 1 emits 0
        if (s == 1) p += m;                             // successor 2 emits 1
        else p += 0.5 * m * f.apply(s + 1);             // reset emits 0, climb emits f(s+1)
    }
    if (post.tail) p += 0.5 * post.tail->mass;          // every climb target above the floor emits 1
    return p;
}

double cond_prob_history(const coding::CodingFunction& f, const coding::Bits& bits) {
    Posterior post = prior_posterior(f);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        try {
            post = filter_step(post, f, bits[i]);
        } catch (const ImpossibleHistoryError&) {
            throw ImpossibleHistoryError("cond_prob_history: bits have probability zero at position " + std::to_string(i));
        }
    }
    return cond_prob_next(post, f);
}

ProbInterval brute_force_cond_prob(const coding::CodingFunction& f, const coding::Bits& bits, double mass_tol) {
    if (!(mass_tol > 0.0 && mass_tol < 1.0)) throw std::invalid_argument("brute_force_cond_prob: mass_tol must be in (0,1)");

    // Initial-state cap: discarded stationary mass above s_cap is 2^-s_cap.
    int s_cap = 2;
    while (std::ldexp(1.0, -s_cap) > mass_tol && s_cap < 1000) ++s_cap;
    if (s_cap + static_cast<int>(bits.size()) + 2 > 62)
        throw std::invalid_argument("brute_force_cond_prob: history too long for exact dyadic accounting at this tolerance");
    const Dyadic discarded = Dyadic::pow2(s_cap);

    Dyadic den = Dyadic::zero();  // exact mass of length-n paths emitting bits
    Dyadic num = Dyadic::zero();  // ... whose one-step extension emits 1

    // Depth-first over hidden paths, weight tracked as an exact power of
    // 1/2 (stationary start of state s costs s halvings, or 2 for states
    // 0 and 1; each branchy transition costs one more).
    struct Walker {
        const coding::CodingFunction& f;
        const coding::Bits& bits;
        Dyadic& den;
        Dyadic& num;

        void finish(chain::ChainState s, int halvings) {
            den += Dyadic::pow2(halvings);
            // One more step decides the next emission.
            if (s == 0) return; // successor 1 emits 0
            if (s == 1) {
                num += Dyadic::pow2(halvings); // successor 2 emits 1
                return;
            }
            if (f.apply(s + 1) == 1) num += Dyadic::pow2(halvings + 1);
            // reset branch emits 0 either way
        }

        void walk(chain::ChainState s, std::size_t i, int halvings) {
            if (f.apply(s) != bits[i]) return;
            if (i + 1 == bits.size()) {
                finish(s, halvings);
                return;
            }
            if (s == 0) {
                walk(1, i + 1, halvings);
            } else if (s == 1) {
                walk(2, i + 1, halvings);
            } else {
                walk(0, i + 1, halvings + 1);
                walk(s + 1, i + 1, halvings + 1);
            }
        }
    } walker{f, bits, den, num};

    for (chain::ChainState s0 = 0; s0 <= s_cap; ++s0) {
        const int start_halvings = s0 <= 1 ? 2 : static_cast<int>(s0);
        if (bits.empty())
            walker.finish(s0, start_halvings);
        else
            walker.walk(s0, 0, start_halvings);
    }

    if (den.mantissa == 0)
        throw ImpossibleHistoryError("brute_force_cond_prob: no hidden path of any enumerated start emits these bits");

    // The discarded starts could have emitted anything: charge them fully
    // to either side of the ratio.
    const double n = num.to_double(), d = den.to_double(), eps = discarded.to_double();
    return ProbInterval{n / (d + eps), (n + eps) / (d + eps)};
}

std::pair<double, double> d_star(const History& x, const History& y, std::int64_t depth) {
    if (depth < 0) throw std::invalid_argument("d_star: depth must be >= 0");
    if (x.known_depth() < depth || y.known_depth() < depth)
        throw std::invalid_argument("d_star: both histories must be known to the requested depth");
    double sum = 0.0;
    for (std::int64_t i = 0; i < depth; ++i) {
        const coding::Bit xb = x.suffix[x.suffix.size() - 1 - i];
        const coding::Bit yb = y.suffix[y.suffix.size() - 1 - i];
        sum += std::ldexp(1.0, static_cast<int>(-i - 1)) * std::abs(xb - yb);
    }
    return {sum, std::ldexp(1.0, static_cast<int>(-depth))};
}

double continuity_probe(const coding::CodingFunction& f, const coding::Bits& bits, std::int64_t n_prefixes,
                        RandomStream& rng) {
    const auto reset = coding::last_reset_index(bits);
    if (!reset) throw std::invalid_argument("continuity_probe: bits must contain the pattern 0,0,1");
    const coding::Bits suffix(bits.begin() + (*reset - 2), bits.end());

    const double reference = cond_prob_history(f, suffix);
    double max_dev = 0.0;
    for (std::int64_t i = 0; i < n_prefixes; ++i) {
        RandomStream sub = rng.fork(0x70726670ULL, static_cast<std::uint64_t>(i));
        // A prefix sampled from the stationary chain and cut just before a
        // visit to state 0 can always be followed by the reset suffix.
        const std::int64_t min_len = 1 + static_cast<std::int64_t>(sub.below(32));
        chain::ChainState s = chain::stationary_sample(sub);
        coding::Bits prefix;
        for (std::int64_t t = 0;; ++t) {
            if (t >= min_len && s == 0) break;
            prefix.push_back(f.apply(s));
            s = chain::step(s, sub);
            if (t > min_len + 10000) throw std::logic_error("continuity_probe: chain failed to revisit state 0");
        }
        coding::Bits full = prefix;
        full.insert(full.end(), suffix.begin(), suffix.end());
        max_dev = std::max(max_dev, std::abs(cond_prob_history(f, full) - reference));
    }
    return max_dev;
}

} // namespace bitforge::oracle
