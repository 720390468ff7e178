#include "bitforge/forge.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "bitforge/chain.hpp"
#include "bitforge/dyadic.hpp"

namespace bitforge::forge {

namespace {

constexpr double kAcceptThreshold = 0.125; // P(A) must clear 1/8
constexpr double kSplitThreshold = 0.25;   // estimate split at 1/4

// Phase tags for stream forking; levels and trial indices provide the
// second coordinate.
constexpr std::uint64_t kPhaseFind = 0x66696e64;  // "find"
constexpr std::uint64_t kPhaseSplit = 0x73706c74; // "splt"

struct TrialCounts {
    std::int64_t in_a = 0;
    std::int64_t b_plus = 0;
    std::int64_t b_minus = 0;
    double min_gap_plus = std::numeric_limits<double>::infinity();
    double min_gap_minus = std::numeric_limits<double>::infinity();
};

// Session replay over a block: whether the final index is a stopping time
// and the estimate there.
std::optional<std::pair<std::int64_t, double>> stop_at_block_end(const coding::Bits& block,
                                                                 const predictors::Estimator& e,
                                                                 const predictors::StoppingRule& r) {
    auto erun = e.start();
    auto rrun = r.start();
    std::int64_t n = -1;
    bool final_is_stop = false;
    for (std::size_t t = 0; t < block.size(); ++t) {
        erun->observe(block[t]);
        if (rrun->observe_and_decide(block[t])) {
            ++n;
            final_is_stop = t + 1 == block.size();
        }
    }
    if (!final_is_stop) return std::nullopt;
    return std::make_pair(n, erun->predict());
}

// Counting layer shared by the Monte-Carlo phases. The gap bookkeeping
// uses the malicious-bit distances both ways so one pass serves both
// possible I sides.
void classify_trial(const TrialOutcome& t, TrialCounts& counts) {
    if (!t.in_a) return;
    ++counts.in_a;
    const double h = *t.h_at_stop;
    if (h >= kSplitThreshold) {
        ++counts.b_plus;
        counts.min_gap_plus = std::min(counts.min_gap_plus, std::abs(h - truth_at_stop(0)));
    } else {
        ++counts.b_minus;
        counts.min_gap_minus = std::min(counts.min_gap_minus, std::abs(h - truth_at_stop(1)));
    }
}

// Exact enumeration phase: stream the hitting paths, replay the session
// on each block, and keep dyadic masses per class. The residual mass is
// unclassified and widens the resulting intervals.
struct ExactMasses {
    Dyadic stop_plus;
    Dyadic stop_minus;
    Dyadic accumulated;
    double min_gap_plus = std::numeric_limits<double>::infinity();
    double min_gap_minus = std::numeric_limits<double>::infinity();
    std::int64_t paths = 0;
    bool complete_enough = false;
};

ExactMasses exact_masses(const coding::CodingFunction& f, std::int64_t k, const predictors::Estimator& e,
                         const predictors::StoppingRule& r, std::int64_t budget,
                         const std::function<bool(const ExactMasses&)>& done) {
    ExactMasses m;
    chain::StreamStats stats = chain::for_each_hit_path(k, 1e-18, budget, [&](const chain::ChainPath& p, const Dyadic& prob) {
        const coding::Bits block = coding::encode(f, p);
        if (const auto stop = stop_at_block_end(block, e, r)) {
            const double h = stop->second;
            if (h >= kSplitThreshold) {
                m.stop_plus += prob;
                m.min_gap_plus = std::min(m.min_gap_plus, std::abs(h - truth_at_stop(0)));
            } else {
                m.stop_minus += prob;
                m.min_gap_minus = std::min(m.min_gap_minus, std::abs(h - truth_at_stop(1)));
            }
        }
        m.accumulated += prob;
        ++m.paths;
        if (done && done(m)) {
            m.complete_enough = true;
            return false;
        }
        return true;
    });
    m.accumulated = stats.accumulated;
    m.paths = stats.paths;
    if (stats.target_met) m.complete_enough = true;
    return m;
}

// Bounds for an unconditional event probability from exact conditional
// masses: P = P(M_0 = 0) * mass = mass / 4. The unclassified residual is
// charged to the upper bound; the point estimate scales the class by the
// covered mass, the exact analogue of a Monte-Carlo frequency.
ProbEstimate exact_bounds(const Dyadic& mass, const Dyadic& accumulated) {
    const double covered = accumulated.to_double();
    const double residual = (Dyadic::one() - accumulated).to_double();
    const double lo = mass.to_double() / 4.0;
    const double hi = (mass.to_double() + residual) / 4.0;
    return ProbEstimate{mass.to_double() / (4.0 * covered), lo, hi};
}

} // namespace

void ForgeConfig::validate(bool check_identifier_strings) const {
    if (levels < 1) throw std::invalid_argument("config field 'levels': must be >= 1");
    if (samples < 100) throw std::invalid_argument("config field 'samples': must be >= 100");
    if (!(confidence > 0.5 && confidence < 1.0)) throw std::invalid_argument("config field 'confidence': must be in (0.5, 1)");
    if (n_cap < 2) throw std::invalid_argument("config field 'n_cap': must be >= 2");
    if (exact_state_threshold < 0) throw std::invalid_argument("config field 'exact_state_threshold': must be >= 0");
    if (enum_budget < 1) throw std::invalid_argument("config field 'enum_budget': must be >= 1");
    if (max_chain_steps < 16) throw std::invalid_argument("config field 'max_chain_steps': must be >= 16");
    if (check_identifier_strings) {
        predictors::make_estimator(predictor_id); // throws with the offending field named
        predictors::make_rule(rule_id);
    }
}

int worker_count() {
    if (const char* env = std::getenv("FORGE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for_trials(std::int64_t samples, bool parallel, const std::function<void(std::int64_t)>& per_trial) {
    const int workers = parallel ? worker_count() : 1;
    if (workers <= 1 || samples < 2048) {
        for (std::int64_t i = 0; i < samples; ++i) per_trial(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    constexpr std::int64_t kChunk = 1024;
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            try {
                for (;;) {
                    const std::int64_t begin = next.fetch_add(kChunk);
                    if (begin >= samples) return;
                    const std::int64_t end = std::min(samples, begin + kChunk);
                    for (std::int64_t i = begin; i < end; ++i) per_trial(i);
                }
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

TrialOutcome sample_trial(const coding::CodingFunction& f, std::int64_t k, const predictors::Estimator& e,
                          const predictors::StoppingRule& r, RandomStream& rng, std::int64_t max_chain_steps,
                          coding::Bits* capture_block) {
    if (k < 1) throw std::invalid_argument("sample_trial: k must be >= 1");
    if (capture_block) capture_block->clear();
    TrialOutcome out;
    chain::ChainState s = chain::stationary_sample(rng);
    if (s != 0) return out; // the event requires a start at 0
    out.started_at_zero = true;

    const chain::ChainState target = 2 * k;
    auto erun = e.start();
    auto rrun = r.start();
    std::int64_t n = -1;
    std::int64_t t = 0;
    for (;; ++t) {
        if (t > max_chain_steps)
            throw ChainLengthCapError("sample_trial: chain-length safety cap " + std::to_string(max_chain_steps) +
                                      " exceeded before hitting state " + std::to_string(target) +
                                      " (k too large for this sample budget)");
        const coding::Bit b = f.apply(s);
        if (capture_block) capture_block->push_back(b);
        erun->observe(b);
        const bool stop_here = rrun->observe_and_decide(b);
        if (stop_here) ++n;
        if (s == target) {
            out.hit_time = t;
            if (stop_here) {
                out.in_a = true;
                out.h_at_stop = erun->predict();
                out.n_at_stop = n;
            }
            return out;
        }
        s = chain::step(s, rng);
    }
}

ProbEstimate estimate_event_prob(const std::function<TrialOutcome(RandomStream&)>& sampler,
                                 const std::function<bool(const TrialOutcome&)>& predicate, std::int64_t samples,
                                 double confidence, const RandomStream& base, bool parallel) {
    if (samples < 100) throw std::invalid_argument("estimate_event_prob: samples must be >= 100");
    std::atomic<std::int64_t> hits{0};
    parallel_for_trials(samples, parallel, [&](std::int64_t i) {
        RandomStream rng = base.fork(0x65737431, static_cast<std::uint64_t>(i));
        if (predicate(sampler(rng))) hits.fetch_add(1, std::memory_order_relaxed);
    });
    return stats::wilson_interval(hits.load(), samples, confidence);
}

std::pair<int, std::string> choose_malicious_bit(double p_b_plus, double p_b_minus) {
    if (p_b_minus >= p_b_plus) return {1, "B-"}; // ties pick bit 1
    return {0, "B+"};
}

double truth_at_stop(int bit) {
    if (bit != 0 && bit != 1) throw std::invalid_argument("truth_at_stop: bit must be 0 or 1");
    return 0.5 * bit;
}

namespace {

struct McCounts {
    TrialCounts counts;
    std::int64_t samples = 0;
};

McCounts monte_carlo_counts(const coding::CodingFunction& f, std::int64_t k, const predictors::Estimator& e,
                            const predictors::StoppingRule& r, const ForgeConfig& cfg, const RandomStream& stream,
                            std::uint64_t phase) {
    const bool parallel = e.parallel_safe() && r.parallel_safe();
    // Per-trial slots, reduced sequentially afterwards: counts cannot
    // depend on the worker schedule.
    std::vector<double> h_slot(static_cast<std::size_t>(cfg.samples), std::numeric_limits<double>::quiet_NaN());
    parallel_for_trials(cfg.samples, parallel, [&](std::int64_t i) {
        RandomStream rng = stream.fork(phase, static_cast<std::uint64_t>(i));
        const TrialOutcome t = sample_trial(f, k, e, r, rng, cfg.max_chain_steps);
        if (t.in_a) h_slot[static_cast<std::size_t>(i)] = *t.h_at_stop;
    });
    McCounts mc;
    mc.samples = cfg.samples;
    for (const double h : h_slot) {
        if (std::isnan(h)) continue;
        TrialOutcome t;
        t.started_at_zero = true;
        t.in_a = true;
        t.h_at_stop = h;
        classify_trial(t, mc.counts);
    }
    return mc;
}

} // namespace

LevelSearchResult find_level_index(const coding::CodingFunction& f_prev, const predictors::Estimator& e,
                                   const predictors::StoppingRule& r, std::int64_t n_min, const ForgeConfig& cfg,
                                   const RandomStream& stream) {
    if (n_min < 1) throw std::invalid_argument("find_level_index: n_min must be >= 1");
    for (std::int64_t n = n_min + 1; n <= cfg.n_cap; ++n) {
        // Exact mode first: the masses certify the decision when enough of
        // the hitting-path tree fits in the budget.
        if (2 * n <= cfg.exact_state_threshold) {
            const ExactMasses m = exact_masses(f_prev, n, e, r, cfg.enum_budget, [&](const ExactMasses& cur) {
                const Dyadic stop = cur.stop_plus + cur.stop_minus;
                return !(stop.to_double() <= 0.5); // lower bound already above 1/8
            });
            const ProbEstimate p_a = exact_bounds(m.stop_plus + m.stop_minus, m.accumulated);
            if (p_a.lo > kAcceptThreshold) return LevelSearchResult{n, p_a, m.paths, "exact"};
            if (p_a.hi <= kAcceptThreshold) continue; // certified rejection
            // Bounds are inconclusive at this budget: fall through to
            // Monte Carlo for this N.
        }
        const McCounts mc = monte_carlo_counts(f_prev, n, e, r, cfg, stream.fork(kPhaseFind, static_cast<std::uint64_t>(n)), kPhaseFind);
        const ProbEstimate p_a = stats::wilson_interval(mc.counts.in_a, mc.samples, cfg.confidence);
        if (p_a.lo > kAcceptThreshold) return LevelSearchResult{n, p_a, mc.samples, "monte-carlo"};
    }
    throw HypothesisViolationError(
        "find_level_index: no N in (" + std::to_string(n_min) + ", " + std::to_string(cfg.n_cap) +
        "] has P(A(N)) lower bound above 1/8 for predictor '" + e.id() + "' and rule '" + r.id() +
        "'. Either the rule violates the eventual one-step-stopping hypothesis or n_cap/samples are too small; "
        "the two cannot be told apart from finitely many runs.");
}

SplitResult split_b(const coding::CodingFunction& f, std::int64_t n, const predictors::Estimator& e,
                    const predictors::StoppingRule& r, const ForgeConfig& cfg, const RandomStream& stream) {
    if (2 * n <= cfg.exact_state_threshold) {
        const ExactMasses m = exact_masses(f, n, e, r, cfg.enum_budget, nullptr);
        if (m.complete_enough || (Dyadic::one() - m.accumulated).to_double() < 0.5) {
            return SplitResult{exact_bounds(m.stop_plus, m.accumulated), exact_bounds(m.stop_minus, m.accumulated),
                               m.min_gap_plus, m.min_gap_minus, m.paths, "exact"};
        }
        // Too little coverage to certify anything useful; use Monte Carlo.
    }
    const McCounts mc = monte_carlo_counts(f, n, e, r, cfg, stream.fork(kPhaseSplit, static_cast<std::uint64_t>(n)), kPhaseSplit);
    return SplitResult{stats::wilson_interval(mc.counts.b_plus, mc.samples, cfg.confidence),
                       stats::wilson_interval(mc.counts.b_minus, mc.samples, cfg.confidence),
                       mc.counts.min_gap_plus, mc.counts.min_gap_minus, mc.samples, "monte-carlo"};
}

LevelRecord build_level(coding::CodingFunction& f, int j, std::int64_t n_min, const predictors::Estimator& e,
                        const predictors::StoppingRule& r, const ForgeConfig& cfg, const RandomStream& stream) {
    const LevelSearchResult found = find_level_index(f, e, r, n_min, cfg, stream);
    const SplitResult split = split_b(f, found.n, e, r, cfg, stream);

    LevelRecord rec;
    rec.j = j;
    rec.n = found.n;
    rec.p_a = found.p_a;
    rec.p_b_plus = split.p_b_plus;
    rec.p_b_minus = split.p_b_minus;
    rec.samples_used = found.samples_used + split.samples_used;
    rec.method = found.method == split.method ? found.method : found.method + "+" + split.method;

    const auto [bit, side] = choose_malicious_bit(split.p_b_plus.est, split.p_b_minus.est);
    rec.malicious_bit = bit;
    rec.i_side = side;
    rec.p_i = bit == 1 ? split.p_b_minus : split.p_b_plus;
    rec.truth_at_stop = truth_at_stop(bit);
    rec.min_gap = bit == 1 ? split.min_gap_minus : split.min_gap_plus;
    if (!std::isfinite(rec.min_gap)) rec.min_gap = 0.0; // no observation landed in I

    // Partition arithmetic: if P(A) is certified above 1/8, the chosen
    // side cannot sit below 1/16. Both sides reading below that while the
    // A bound holds means the estimates contradict each other.
    if (rec.p_a.lo > kAcceptThreshold && rec.p_i.hi < 0.0625)
        throw ConsistencyFaultError("build_level: P(A) lower bound " + std::to_string(rec.p_a.lo) +
                                    " exceeds 1/8 but the chosen side's upper bound " + std::to_string(rec.p_i.hi) +
                                    " is below 1/16; the estimates are inconsistent");

    // Only a zero bit differs from the default coding; a one bit is
    // recorded in the level but leaves the function unchanged.
    if (bit == 0) f.set_exception(2 * found.n + 1, 0);
    return rec;
}

ForgeResult run_forge(const ForgeConfig& cfg) {
    return run_forge(cfg, predictors::make_estimator(cfg.predictor_id), predictors::make_rule(cfg.rule_id));
}

ForgeResult run_forge(const ForgeConfig& cfg, const std::shared_ptr<predictors::Estimator>& e,
                      const std::shared_ptr<predictors::StoppingRule>& r) {
    if (!e || !r) throw std::invalid_argument("run_forge: estimator and rule must not be null");
    ForgeConfig effective = cfg;
    effective.predictor_id = e->id();
    effective.rule_id = r->id();
    effective.validate(false);
    const RandomStream root(effective.seed);

    ForgeResult result;
    result.config = effective;
    result.coding = coding::CodingFunction::base();

    std::int64_t n_min = 1; // the construction starts its index sequence above 1
    for (int j = 1; j <= effective.levels; ++j) {
        const RandomStream level_stream = root.fork(0x6c766c00ULL + static_cast<std::uint64_t>(j));
        LevelRecord rec = build_level(result.coding, j, n_min, *e, *r, effective, level_stream);
        n_min = rec.n;
        result.levels.push_back(std::move(rec));
    }
    return result;
}

} // namespace bitforge::forge
