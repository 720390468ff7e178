#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bitforge/coding.hpp"

namespace bitforge::predictors {

/// Incremental run of an estimator over one bit prefix. predict() is the
/// estimate of P(next bit = 1 | bits observed so far).
class EstimatorRun {
public:
    virtual ~EstimatorRun() = default;
    virtual void observe(coding::Bit b) = 0;
    virtual double predict() const = 0;
};

/// An estimator of the next-bit conditional probability, deterministic
/// given the prefix. start() yields a fresh run; runs carry all mutable
/// state, so one Estimator serves many concurrent sessions.
class Estimator {
public:
    virtual ~Estimator() = default;
    virtual std::string id() const = 0;
    virtual std::unique_ptr<EstimatorRun> start() const = 0;
    /// False for wrappers (e.g. foreign callbacks) that must not be
    /// driven from multiple worker threads.
    virtual bool parallel_safe() const { return true; }
};

/// Incremental run of a stopping rule. observe_and_decide(b) consumes the
/// bit at time t and reports whether t is a stopping time; the decision
/// sees only bits 0..t, which makes the induced times stopping times by
/// construction.
class RuleRun {
public:
    virtual ~RuleRun() = default;
    virtual bool observe_and_decide(coding::Bit b) = 0;
};

class StoppingRule {
public:
    virtual ~StoppingRule() = default;
    virtual std::string id() const = 0;
    virtual std::unique_ptr<RuleRun> start() const = 0;
    virtual bool parallel_safe() const { return true; }
};

/// Context predictor with add-half smoothing: given order k, predicts
/// (#[context followed by 1] + 1/2) / (#context + 1) for the last-k-bits
/// context, and 1/2 while the prefix is shorter than k.
std::shared_ptr<Estimator> empirical_markov_predictor(int order);

/// Krichevsky-Trofimov rule per context: (c1 + 1/2) / (c0 + c1 + 1).
std::shared_ptr<Estimator> kt_predictor(int order);

/// Constant prediction, handy as a reference adversary target.
std::shared_ptr<Estimator> constant_predictor(double p);

/// Estimator backed by an arbitrary prefix -> probability function; the
/// function must be deterministic. Used by the foreign-language bindings.
std::shared_ptr<Estimator> callback_estimator(std::string id, std::function<double(const coding::Bits&)> fn,
                                              bool parallel_safe = false);

/// Stops at every time: lambda_n = n.
std::shared_ptr<StoppingRule> always_stop_rule();

/// Stops at every time t >= t0 and never before.
std::shared_ptr<StoppingRule> delayed_rule(std::int64_t t0);

/// Rule backed by a prefix -> bool function (see callback_estimator).
std::shared_ptr<StoppingRule> callback_rule(std::string id, std::function<bool(const coding::Bits&)> fn,
                                            bool parallel_safe = false);

/// Parse CLI identifier strings: "kt:<order>", "empirical:<order>",
/// "const:<p>" / "always", "delayed:<t0>". Throws std::invalid_argument
/// naming the offending field.
std::shared_ptr<Estimator> make_estimator(const std::string& id);
std::shared_ptr<StoppingRule> make_rule(const std::string& id);

struct StopRecord {
    std::int64_t n;      // stop index
    std::int64_t lambda; // stopping time
    double h;            // estimate at the stop
};

struct SessionTrace {
    std::vector<StopRecord> stops;
    std::int64_t prefix_length = 0;
};

/// Scan the prefix once; at every stopping time record the estimator's
/// prediction on the bits up to and including it.
SessionTrace run_session(const coding::Bits& bits, const Estimator& e, const StoppingRule& r);

} // namespace bitforge::predictors
