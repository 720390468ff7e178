#include "bitforge/predictors.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace bitforge::predictors {

namespace {

// Shared core of the context predictors; both baselines reduce to the
// same add-half counts, they differ only in name and provenance.
class ContextCountsRun : public EstimatorRun {
public:
    explicit ContextCountsRun(int order) : order_(order) {}

    void observe(coding::Bit b) override {
        if (seen_ >= order_) {
            auto& c = counts_[context_];
            ++c[b == 1 ? 1 : 0];
        }
        context_ = ((context_ << 1) | static_cast<std::uint64_t>(b == 1 ? 1 : 0)) & mask();
        ++seen_;
    }

    double predict() const override {
        if (seen_ < order_) return 0.5; // no full context yet
        const auto it = counts_.find(context_);
        if (it == counts_.end()) return 0.5;
        const auto& c = it->second;
        return (static_cast<double>(c[1]) + 0.5) / (static_cast<double>(c[0] + c[1]) + 1.0);
    }

private:
    std::uint64_t mask() const { return order_ == 0 ? 0 : (order_ >= 64 ? ~0ULL : ((1ULL << order_) - 1)); }

    int order_;
    std::int64_t seen_ = 0;
    std::uint64_t context_ = 0;
    std::unordered_map<std::uint64_t, std::array<std::int64_t, 2>> counts_;
};

class ContextEstimator : public Estimator {
public:
    ContextEstimator(std::string prefix, int order) : prefix_(std::move(prefix)), order_(order) {
        if (order < 0) throw std::invalid_argument("predictor order must be >= 0");
        if (order > 48) throw std::invalid_argument("predictor order above 48 is not supported");
    }
    std::string id() const override { return prefix_ + ":" + std::to_string(order_); }
    std::unique_ptr<EstimatorRun> start() const override { return std::make_unique<ContextCountsRun>(order_); }

private:
    std::string prefix_;
    int order_;
};

class ConstantRun : public EstimatorRun {
public:
    explicit ConstantRun(double p) : p_(p) {}
    void observe(coding::Bit) override {}
    double predict() const override { return p_; }

private:
    double p_;
};

class ConstantEstimator : public Estimator {
public:
    explicit ConstantEstimator(double p) : p_(p) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("constant predictor value must be in [0,1]");
    }
    std::string id() const override {
        char buf[32];
        std::snprintf(buf, sizeof buf, "const:%.12g", p_);
        return buf;
    }
    std::unique_ptr<EstimatorRun> start() const override { return std::make_unique<ConstantRun>(p_); }

private:
    double p_;
};

class CallbackRun : public EstimatorRun {
public:
    explicit CallbackRun(const std::function<double(const coding::Bits&)>* fn) : fn_(fn) {}
    void observe(coding::Bit b) override { prefix_.push_back(b); }
    double predict() const override {
        const double p = (*fn_)(prefix_);
        if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("callback estimator returned a value outside [0,1]");
        return p;
    }

private:
    const std::function<double(const coding::Bits&)>* fn_;
    coding::Bits prefix_;
};

class CallbackEstimator : public Estimator {
public:
    CallbackEstimator(std::string id, std::function<double(const coding::Bits&)> fn, bool parallel_safe)
        : id_(std::move(id)), fn_(std::move(fn)), parallel_safe_(parallel_safe) {}
    std::string id() const override { return id_; }
    std::unique_ptr<EstimatorRun> start() const override { return std::make_unique<CallbackRun>(&fn_); }
    bool parallel_safe() const override { return parallel_safe_; }

private:
    std::string id_;
    std::function<double(const coding::Bits&)> fn_;
    bool parallel_safe_;
};

class AlwaysRun : public RuleRun {
public:
    bool observe_and_decide(coding::Bit) override { return true; }
};

class AlwaysRule : public StoppingRule {
public:
    std::string id() const override { return "always"; }
    std::unique_ptr<RuleRun> start() const override { return std::make_unique<AlwaysRun>(); }
};

class DelayedRun : public RuleRun {
public:
    explicit DelayedRun(std::int64_t t0) : t0_(t0) {}
    bool observe_and_decide(coding::Bit) override { return ++t_ > t0_; } // t_ - 1 is the current time

private:
    std::int64_t t0_;
    std::int64_t t_ = 0;
};

class DelayedRule : public StoppingRule {
public:
    explicit DelayedRule(std::int64_t t0) : t0_(t0) {
        if (t0 < 0) throw std::invalid_argument("delayed rule needs t0 >= 0");
    }
    std::string id() const override { return "delayed:" + std::to_string(t0_); }
    std::unique_ptr<RuleRun> start() const override { return std::make_unique<DelayedRun>(t0_); }

private:
    std::int64_t t0_;
};

class CallbackRuleRun : public RuleRun {
public:
    explicit CallbackRuleRun(const std::function<bool(const coding::Bits&)>* fn) : fn_(fn) {}
    bool observe_and_decide(coding::Bit b) override {
        prefix_.push_back(b);
        return (*fn_)(prefix_);
    }

private:
    const std::function<bool(const coding::Bits&)>* fn_;
    coding::Bits prefix_;
};

class CallbackRule : public StoppingRule {
public:
    CallbackRule(std::string id, std::function<bool(const coding::Bits&)> fn, bool parallel_safe)
        : id_(std::move(id)), fn_(std::move(fn)), parallel_safe_(parallel_safe) {}
    std::string id() const override { return id_; }
    std::unique_ptr<RuleRun> start() const override { return std::make_unique<CallbackRuleRun>(&fn_); }
    bool parallel_safe() const override { return parallel_safe_; }

private:
    std::string id_;
    std::function<bool(const coding::Bits&)> fn_;
    bool parallel_safe_;
};

std::int64_t parse_int_field(const std::string& text, const std::string& field) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw std::invalid_argument(field + ": '" + text + "' is not an integer");
    return v;
}

} // namespace

std::shared_ptr<Estimator> empirical_markov_predictor(int order) { return std::make_shared<ContextEstimator>("empirical", order); }
std::shared_ptr<Estimator> kt_predictor(int order) { return std::make_shared<ContextEstimator>("kt", order); }
std::shared_ptr<Estimator> constant_predictor(double p) { return std::make_shared<ConstantEstimator>(p); }
std::shared_ptr<Estimator> callback_estimator(std::string id, std::function<double(const coding::Bits&)> fn, bool parallel_safe) {
    return std::make_shared<CallbackEstimator>(std::move(id), std::move(fn), parallel_safe);
}
std::shared_ptr<StoppingRule> always_stop_rule() { return std::make_shared<AlwaysRule>(); }
std::shared_ptr<StoppingRule> delayed_rule(std::int64_t t0) { return std::make_shared<DelayedRule>(t0); }
std::shared_ptr<StoppingRule> callback_rule(std::string id, std::function<bool(const coding::Bits&)> fn, bool parallel_safe) {
    return std::make_shared<CallbackRule>(std::move(id), std::move(fn), parallel_safe);
}

std::shared_ptr<Estimator> make_estimator(const std::string& id) {
    const auto colon = id.find(':');
    const std::string head = id.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : id.substr(colon + 1);
    if (head == "kt" || head == "empirical") {
        const std::int64_t order = parse_int_field(arg, "predictor '" + id + "' order");
        if (order < 0 || order > 48) throw std::invalid_argument("predictor '" + id + "': order must be in [0, 48]");
        return head == "kt" ? kt_predictor(static_cast<int>(order)) : empirical_markov_predictor(static_cast<int>(order));
    }
    if (head == "const") {
        try {
            std::size_t used = 0;
            const double p = std::stod(arg, &used);
            if (used != arg.size()) throw std::invalid_argument("trailing characters");
            return constant_predictor(p);
        } catch (const std::exception&) {
            throw std::invalid_argument("predictor '" + id + "': value must be a probability in [0,1]");
        }
    }
    throw std::invalid_argument("predictor '" + id + "': unknown kind (expected kt:<order>, empirical:<order> or const:<p>)");
}

std::shared_ptr<StoppingRule> make_rule(const std::string& id) {
    if (id == "always") return always_stop_rule();
    const auto colon = id.find(':');
    if (id.substr(0, colon) == "delayed") {
        const std::int64_t t0 = parse_int_field(colon == std::string::npos ? "" : id.substr(colon + 1), "stop-rule '" + id + "' t0");
        return delayed_rule(t0);
    }
    throw std::invalid_argument("stop-rule '" + id + "': unknown kind (expected always or delayed:<t0>)");
}

SessionTrace run_session(const coding::Bits& bits, const Estimator& e, const StoppingRule& r) {
    SessionTrace trace;
    trace.prefix_length = static_cast<std::int64_t>(bits.size());
    auto erun = e.start();
    auto rrun = r.start();
    std::int64_t n = 0;
    for (std::int64_t t = 0; t < trace.prefix_length; ++t) {
        const coding::Bit b = bits[static_cast<std::size_t>(t)];
        erun->observe(b);
        if (rrun->observe_and_decide(b)) {
            trace.stops.push_back(StopRecord{n, t, erun->predict()});
            ++n;
        }
    }
    return trace;
}

} // namespace bitforge::predictors
