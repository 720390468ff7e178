#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bitforge/coding.hpp"
#include "bitforge/predictors.hpp"
#include "bitforge/rng.hpp"
#include "bitforge/stats.hpp"

namespace bitforge::forge {

/// The searched estimator/rule pair produced no admissible level within
/// the configured budget. Either the pair violates the eventual
/// one-step-stopping hypothesis or the budget is too small; the two are
/// indistinguishable from finitely many runs, so the message says both.
class HypothesisViolationError : public std::runtime_error {
public:
    explicit HypothesisViolationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A per-estimate consistency fault that can only come from a broken
/// estimator contract or an estimation bug (e.g. the two halves of a
/// partition both vanishing while their union is large).
class ConsistencyFaultError : public std::runtime_error {
public:
    explicit ConsistencyFaultError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A single trial ran past the chain-length safety cap; hitting state 2k
/// costs about 2^(2k-2) excursions, so this marks k as too large for the
/// sample budget rather than looping for hours.
class ChainLengthCapError : public std::runtime_error {
public:
    explicit ChainLengthCapError(const std::string& msg) : std::runtime_error(msg) {}
};

using ProbEstimate = stats::Interval;

/// One sampled excursion of the level experiment.
struct TrialOutcome {
    bool started_at_zero = false;
    std::optional<std::int64_t> hit_time; // realized first visit of 2k (when started at 0)
    bool in_a = false;                    // the hit time was one of the stopping times
    std::optional<double> h_at_stop;      // estimator value there
    std::optional<std::int64_t> n_at_stop;
};

struct ForgeConfig {
    std::uint64_t seed = 1;
    int levels = 1;
    std::int64_t samples = 100'000;
    double confidence = 0.99;
    std::string predictor_id = "kt:2";
    std::string rule_id = "always";
    std::int64_t n_cap = 12;
    // Exact enumeration replaces Monte Carlo while 2N <= exact_state_threshold
    // and certifies the level decisions; 0 disables it.
    std::int64_t exact_state_threshold = 8;
    std::int64_t enum_budget = 1'000'000;
    std::int64_t max_chain_steps = std::int64_t{1} << 30;

    /// check_identifier_strings is off when the estimator and rule are
    /// supplied as instances and the ids are only labels.
    void validate(bool check_identifier_strings = true) const;
};

struct LevelRecord {
    int j = 0;              // level index, 1-based
    std::int64_t n = 0;     // the chosen index N for this level
    ProbEstimate p_a{};     // P(started at 0 and the hit time is a stopping time)
    ProbEstimate p_b_plus{};
    ProbEstimate p_b_minus{};
    int malicious_bit = 0;
    std::string i_side;     // "B+" or "B-"
    ProbEstimate p_i{};
    double truth_at_stop = 0.0;
    double min_gap = 0.0;   // smallest |h - truth| over trials landing in I
    std::int64_t samples_used = 0;
    std::string method;     // "exact" or "monte-carlo"
};

struct ForgeResult {
    ForgeConfig config;
    std::vector<LevelRecord> levels;
    coding::CodingFunction coding; // truncation of the limit coding after the last level
};

/// Draw the start from the stationary law; when it is 0, run the chain to
/// its first visit of 2k, encode the block, and replay the stopping rule
/// and estimator over it to decide whether the hit time is a stop.
/// capture_block, when non-null, receives the encoded block of a
/// started-at-zero trial (verification reruns the filter on it).
TrialOutcome sample_trial(const coding::CodingFunction& f, std::int64_t k, const predictors::Estimator& e,
                          const predictors::StoppingRule& r, RandomStream& rng,
                          std::int64_t max_chain_steps = std::int64_t{1} << 30, coding::Bits* capture_block = nullptr);

/// Monte-Carlo estimate of P(predicate) with a Wilson score interval.
/// Trials get substreams forked by index, so the result is independent of
/// the worker count. samples must be >= 100.
ProbEstimate estimate_event_prob(const std::function<TrialOutcome(RandomStream&)>& sampler,
                                 const std::function<bool(const TrialOutcome&)>& predicate, std::int64_t samples,
                                 double confidence, const RandomStream& base, bool parallel = true);

struct LevelSearchResult {
    std::int64_t n;
    ProbEstimate p_a;
    std::int64_t samples_used;
    std::string method;
};

/// Search N = n_min+1, n_min+2, ... for the first N whose estimated
/// P(A(N)) has lower confidence bound above 1/8, where A(N) is evaluated
/// on the process coded by f_prev. Throws HypothesisViolationError when
/// the cap is exhausted.
LevelSearchResult find_level_index(const coding::CodingFunction& f_prev, const predictors::Estimator& e,
                                   const predictors::StoppingRule& r, std::int64_t n_min, const ForgeConfig& cfg,
                                   const RandomStream& stream);

struct SplitResult {
    ProbEstimate p_b_plus;
    ProbEstimate p_b_minus;
    double min_gap_plus;  // min h-to-0 gap over B+ trials (h >= 1/4 there)
    double min_gap_minus; // min h-to-1/2 gap over B- trials
    std::int64_t samples_used;
    std::string method;
};

/// Split the in-A trials at level index N by the estimate at the stop:
/// h >= 1/4 lands in B+, h < 1/4 in B-. Estimates are unconditional.
SplitResult split_b(const coding::CodingFunction& f, std::int64_t n, const predictors::Estimator& e,
                    const predictors::StoppingRule& r, const ForgeConfig& cfg, const RandomStream& stream);

/// bit = 1 and I = B- when P(B-) >= P(B+), else bit = 0 and I = B+.
std::pair<int, std::string> choose_malicious_bit(double p_b_plus, double p_b_minus);

/// Exact conditional probability of a 1 right after the block, given the
/// chosen bit at the climb target: 0.5 * bit.
double truth_at_stop(int bit);

/// One inductive step: pick N, split, choose the bit, record everything,
/// and extend the coding (a bit of 0 becomes an exception; a bit of 1
/// already equals the default).
LevelRecord build_level(coding::CodingFunction& f, int j, std::int64_t n_min, const predictors::Estimator& e,
                        const predictors::StoppingRule& r, const ForgeConfig& cfg, const RandomStream& stream);

/// Run the whole construction for cfg.levels levels, building the
/// estimator and rule from the config identifier strings.
ForgeResult run_forge(const ForgeConfig& cfg);

/// Same, against caller-supplied instances (e.g. foreign callbacks); the
/// config echo picks up their ids.
ForgeResult run_forge(const ForgeConfig& cfg, const std::shared_ptr<predictors::Estimator>& e,
                      const std::shared_ptr<predictors::StoppingRule>& r);

/// Worker count for parallel estimation: FORGE_THREADS if set, else the
/// hardware concurrency.
int worker_count();

/// Run per_trial(i) for i in [0, samples), spread over worker_count()
/// threads when parallel is set. Exceptions propagate; the call sites
/// keep results deterministic by writing into per-index slots.
void parallel_for_trials(std::int64_t samples, bool parallel, const std::function<void(std::int64_t)>& per_trial);

} // namespace bitforge::forge
