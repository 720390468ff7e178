#include "bitforge/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bitforge/chain.hpp"

namespace bitforge::harness {

namespace {

constexpr std::uint64_t kPhaseVerify = 0x76657279; // "very"

struct VerifyTrialLite {
    bool in_a = false;
    bool in_i = false;
    double gap = 0.0;
    double truth_err = 0.0;
};

} // namespace

LevelVerify verify_level(const forge::ForgeResult& result, int level_index, std::int64_t samples,
                         const RandomStream& stream, const std::shared_ptr<predictors::Estimator>& estimator_in,
                         const std::shared_ptr<predictors::StoppingRule>& rule_in) {
    if (level_index < 0 || level_index >= static_cast<int>(result.levels.size()))
        throw std::invalid_argument("verify_level: level index out of range");
    if (samples < 100) throw std::invalid_argument("verify_level: samples must be >= 100");

    const forge::LevelRecord& rec = result.levels[static_cast<std::size_t>(level_index)];
    const auto estimator = estimator_in ? estimator_in : predictors::make_estimator(result.config.predictor_id);
    const auto rule = rule_in ? rule_in : predictors::make_rule(result.config.rule_id);
    const bool want_minus = rec.malicious_bit == 1; // I = B- exactly when the bit is 1
    const double truth = rec.truth_at_stop;

    std::vector<VerifyTrialLite> slots(static_cast<std::size_t>(samples));
    const bool parallel = estimator->parallel_safe() && rule->parallel_safe();

    const auto one_trial = [&](std::int64_t i) {
        RandomStream rng = stream.fork(kPhaseVerify, static_cast<std::uint64_t>(i));
        coding::Bits block;
        const forge::TrialOutcome t =
            forge::sample_trial(result.coding, rec.n, *estimator, *rule, rng, result.config.max_chain_steps, &block);
        if (!t.in_a) return;
        VerifyTrialLite& out = slots[static_cast<std::size_t>(i)];
        out.in_a = true;
        const double h = *t.h_at_stop;
        out.in_i = want_minus ? h < 0.25 : h >= 0.25;
        if (out.in_i) out.gap = std::abs(h - truth);
        // The block pins the hidden state, so the exact conditional
        // probability right after it must be 0.5 * bit.
        out.truth_err = std::abs(oracle::cond_prob_history(result.coding, block) - truth);
    };

    forge::parallel_for_trials(samples, parallel, one_trial);

    LevelVerify out;
    out.j = rec.j;
    out.n = rec.n;
    out.samples = samples;
    double min_gap = std::numeric_limits<double>::infinity();
    std::int64_t i_count = 0;
    for (const VerifyTrialLite& t : slots) {
        if (!t.in_a) continue;
        out.max_truth_err = std::max(out.max_truth_err, t.truth_err);
        if (t.in_i) {
            ++i_count;
            min_gap = std::min(min_gap, t.gap);
        }
    }
    out.i_count = i_count;
    out.min_gap = std::isfinite(min_gap) ? min_gap : 0.0;
    out.p_i_fresh = stats::wilson_interval(i_count, samples, result.config.confidence);

    if (i_count == 0 && rec.p_i.lo > 0.0625)
        throw forge::ConsistencyFaultError("verify_level: level " + std::to_string(rec.j) +
                                           " saw zero I occurrences in a fresh sample although the forge recorded "
                                           "P(I) lower bound " +
                                           format_probability(rec.p_i.lo) + " > 1/16");
    return out;
}

OracleProbeResult oracle_equivalence_probe(const std::vector<coding::CodingFunction>& codings, int max_len,
                                           double tol) {
    if (max_len < 1 || max_len > 24) throw std::invalid_argument("oracle_equivalence_probe: max_len must be in [1, 24]");
    OracleProbeResult out;
    for (const coding::CodingFunction& f : codings) {
        coding::Bits bits;
        // Depth-first over positive-probability histories only; at each
        // boundary both routes must agree that the extension is impossible.
        const std::function<void()> walk = [&] {
            if (static_cast<int>(bits.size()) >= max_len) return;
            for (coding::Bit b : {0, 1}) {
                bits.push_back(b);
                bool filter_possible = true;
                double p = 0.0;
                try {
                    p = oracle::cond_prob_history(f, bits);
                } catch (const oracle::ImpossibleHistoryError&) {
                    filter_possible = false;
                }
                bool brute_possible = true;
                oracle::ProbInterval iv{0.0, 1.0};
                try {
                    iv = oracle::brute_force_cond_prob(f, bits, tol);
                } catch (const oracle::ImpossibleHistoryError&) {
                    brute_possible = false;
                }
                if (filter_possible != brute_possible) {
                    ++out.violations;
                    out.max_violation = std::max(out.max_violation, 1.0);
                } else if (filter_possible) {
                    ++out.histories_checked;
                    out.max_interval_width = std::max(out.max_interval_width, iv.width());
                    const double outside = std::max({0.0, iv.lo - p, p - iv.hi});
                    if (outside > 0.0) ++out.violations;
                    out.max_violation = std::max(out.max_violation, outside);
                    walk();
                }
                bits.pop_back();
            }
        };
        walk();
    }
    return out;
}

ContinuityProbeResult continuity_suite(const coding::CodingFunction& f, std::int64_t suffixes,
                                       std::int64_t prefixes, const RandomStream& stream) {
    ContinuityProbeResult out;
    for (std::int64_t i = 0; i < suffixes; ++i) {
        RandomStream rng = stream.fork(0x73666678, static_cast<std::uint64_t>(i));
        // A suffix opens at a visit to state 0, so it begins with the
        // reset pattern and has positive probability.
        chain::ChainState s = chain::stationary_sample(rng);
        for (std::int64_t guard = 0; s != 0; ++guard) {
            if (guard > 100000) throw std::logic_error("continuity_suite: chain failed to reach state 0");
            s = chain::step(s, rng);
        }
        coding::Bits suffix;
        const std::int64_t len = 4 + static_cast<std::int64_t>(rng.below(24));
        for (std::int64_t t = 0; t < len; ++t) {
            suffix.push_back(f.apply(s));
            s = chain::step(s, rng);
        }
        RandomStream probe_rng = stream.fork(0x70726f62, static_cast<std::uint64_t>(i));
        out.max_deviation = std::max(out.max_deviation, oracle::continuity_probe(f, suffix, prefixes, probe_rng));
        ++out.cases;
    }
    return out;
}

VerifyReport run_verify(const forge::ForgeResult& result, std::int64_t samples, std::uint64_t seed,
                        const std::string& source, const std::shared_ptr<predictors::Estimator>& estimator,
                        const std::shared_ptr<predictors::StoppingRule>& rule) {
    VerifyReport report;
    report.seed = seed;
    report.samples = samples;
    report.source = source;
    const RandomStream root(seed);
    for (int j = 0; j < static_cast<int>(result.levels.size()); ++j)
        report.levels.push_back(
            verify_level(result, j, samples, root.fork(0x6c766c00ULL + static_cast<std::uint64_t>(j)), estimator, rule));

    const std::vector<coding::CodingFunction> codings{coding::CodingFunction::base(), result.coding};
    const OracleProbeResult oracle = oracle_equivalence_probe(codings, 8, 1e-9);
    report.global.oracle_histories = oracle.histories_checked;
    report.global.oracle_max_violation = oracle.max_violation;

    ContinuityProbeResult continuity;
    for (const coding::CodingFunction& f : codings) {
        const ContinuityProbeResult r = continuity_suite(f, 5, 20, root.fork(0x636f6e74));
        continuity.cases += r.cases;
        continuity.max_deviation = std::max(continuity.max_deviation, r.max_deviation);
    }
    report.global.continuity_cases = continuity.cases;
    report.global.continuity_max_dev = continuity.max_deviation;
    return report;
}

std::string format_probability(double p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", p);
    return buf;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json estimate_to_json(const forge::ProbEstimate& e) {
    return ordered_json{{"est", format_probability(e.est)}, {"lo", format_probability(e.lo)}, {"hi", format_probability(e.hi)}};
}

ordered_json coding_to_json(const coding::CodingFunction& f) {
    ordered_json j;
    j["default_odd"] = 1;
    j["exceptions"] = ordered_json::array();
    for (const auto& [state, bit] : f.exceptions()) j["exceptions"].push_back({{"state", state}, {"bit", bit}});
    return j;
}

const nlohmann::json& require_field(const nlohmann::json& j, const std::string& name, const std::string& where) {
    if (!j.contains(name)) throw std::invalid_argument("forge result JSON: missing field '" + where + name + "'");
    return j.at(name);
}

double parse_probability(const nlohmann::json& j, const std::string& where) {
    if (!j.is_string()) throw std::invalid_argument("forge result JSON: field '" + where + "' must be a decimal string");
    try {
        std::size_t used = 0;
        const double v = std::stod(j.get<std::string>(), &used);
        if (used != j.get<std::string>().size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("forge result JSON: field '" + where + "' is not a valid decimal string");
    }
}

forge::ProbEstimate parse_estimate(const nlohmann::json& j, const std::string& where) {
    forge::ProbEstimate e;
    e.est = parse_probability(require_field(j, "est", where + "."), where + ".est");
    e.lo = parse_probability(require_field(j, "lo", where + "."), where + ".lo");
    e.hi = parse_probability(require_field(j, "hi", where + "."), where + ".hi");
    if (e.lo > e.hi) throw std::invalid_argument("forge result JSON: field '" + where + "': lo exceeds hi");
    return e;
}

template <typename T>
T parse_integer(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number_integer()) throw std::invalid_argument("forge result JSON: field '" + where + "' must be an integer");
    return j.get<T>();
}

} // namespace

std::string forge_result_to_json(const forge::ForgeResult& result) {
    ordered_json j;
    const forge::ForgeConfig& c = result.config;
    j["config"] = ordered_json{{"seed", c.seed},
                               {"levels", c.levels},
                               {"samples", c.samples},
                               {"confidence", format_probability(c.confidence)},
                               {"predictor", c.predictor_id},
                               {"rule", c.rule_id},
                               {"n_cap", c.n_cap},
                               {"exact_state_threshold", c.exact_state_threshold},
                               {"enum_budget", c.enum_budget},
                               {"max_chain_steps", c.max_chain_steps}};
    j["levels"] = ordered_json::array();
    for (const forge::LevelRecord& rec : result.levels) {
        j["levels"].push_back(ordered_json{{"j", rec.j},
                                           {"N", rec.n},
                                           {"p_A", estimate_to_json(rec.p_a)},
                                           {"p_B_plus", estimate_to_json(rec.p_b_plus)},
                                           {"p_B_minus", estimate_to_json(rec.p_b_minus)},
                                           {"malicious_bit", rec.malicious_bit},
                                           {"I_side", rec.i_side},
                                           {"p_I", estimate_to_json(rec.p_i)},
                                           {"truth_at_stop", format_probability(rec.truth_at_stop)},
                                           {"min_gap", format_probability(rec.min_gap)},
                                           {"samples_used", rec.samples_used},
                                           {"method", rec.method}});
    }
    j["coding"] = coding_to_json(result.coding);
    return j.dump(2) + "\n";
}

forge::ForgeResult forge_result_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("forge result JSON: parse error: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("forge result JSON: top level must be an object");

    forge::ForgeResult result;
    const nlohmann::json& cfg = require_field(j, "config", "");
    forge::ForgeConfig& c = result.config;
    c.seed = parse_integer<std::uint64_t>(require_field(cfg, "seed", "config."), "config.seed");
    c.levels = parse_integer<int>(require_field(cfg, "levels", "config."), "config.levels");
    c.samples = parse_integer<std::int64_t>(require_field(cfg, "samples", "config."), "config.samples");
    c.confidence = parse_probability(require_field(cfg, "confidence", "config."), "config.confidence");
    const nlohmann::json& pred = require_field(cfg, "predictor", "config.");
    if (!pred.is_string()) throw std::invalid_argument("forge result JSON: field 'config.predictor' must be a string");
    c.predictor_id = pred.get<std::string>();
    const nlohmann::json& rule = require_field(cfg, "rule", "config.");
    if (!rule.is_string()) throw std::invalid_argument("forge result JSON: field 'config.rule' must be a string");
    c.rule_id = rule.get<std::string>();
    c.n_cap = parse_integer<std::int64_t>(require_field(cfg, "n_cap", "config."), "config.n_cap");
    c.exact_state_threshold =
        parse_integer<std::int64_t>(require_field(cfg, "exact_state_threshold", "config."), "config.exact_state_threshold");
    c.enum_budget = parse_integer<std::int64_t>(require_field(cfg, "enum_budget", "config."), "config.enum_budget");
    c.max_chain_steps = parse_integer<std::int64_t>(require_field(cfg, "max_chain_steps", "config."), "config.max_chain_steps");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("forge result JSON: config: ") + e.what());
    }

    const nlohmann::json& levels = require_field(j, "levels", "");
    if (!levels.is_array()) throw std::invalid_argument("forge result JSON: field 'levels' must be an array");
    std::int64_t prev_n = 1;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const std::string where = "levels[" + std::to_string(i) + "].";
        const nlohmann::json& lj = levels[i];
        forge::LevelRecord rec;
        rec.j = parse_integer<int>(require_field(lj, "j", where), where + "j");
        rec.n = parse_integer<std::int64_t>(require_field(lj, "N", where), where + "N");
        if (rec.n <= prev_n)
            throw std::invalid_argument("forge result JSON: field '" + where + "N': level indices must be strictly increasing");
        prev_n = rec.n;
        rec.p_a = parse_estimate(require_field(lj, "p_A", where), where + "p_A");
        rec.p_b_plus = parse_estimate(require_field(lj, "p_B_plus", where), where + "p_B_plus");
        rec.p_b_minus = parse_estimate(require_field(lj, "p_B_minus", where), where + "p_B_minus");
        rec.malicious_bit = parse_integer<int>(require_field(lj, "malicious_bit", where), where + "malicious_bit");
        if (rec.malicious_bit != 0 && rec.malicious_bit != 1)
            throw std::invalid_argument("forge result JSON: field '" + where + "malicious_bit' must be 0 or 1");
        const nlohmann::json& side = require_field(lj, "I_side", where);
        if (!side.is_string() || (side.get<std::string>() != "B+" && side.get<std::string>() != "B-"))
            throw std::invalid_argument("forge result JSON: field '" + where + "I_side' must be \"B+\" or \"B-\"");
        rec.i_side = side.get<std::string>();
        if ((rec.malicious_bit == 1) != (rec.i_side == "B-"))
            throw std::invalid_argument("forge result JSON: field '" + where + "I_side' contradicts malicious_bit");
        rec.p_i = parse_estimate(require_field(lj, "p_I", where), where + "p_I");
        rec.truth_at_stop = parse_probability(require_field(lj, "truth_at_stop", where), where + "truth_at_stop");
        if (rec.truth_at_stop != 0.5 * rec.malicious_bit)
            throw std::invalid_argument("forge result JSON: field '" + where + "truth_at_stop' must equal 0.5 * malicious_bit");
        rec.min_gap = parse_probability(require_field(lj, "min_gap", where), where + "min_gap");
        rec.samples_used = parse_integer<std::int64_t>(require_field(lj, "samples_used", where), where + "samples_used");
        const nlohmann::json& method = require_field(lj, "method", where);
        if (!method.is_string()) throw std::invalid_argument("forge result JSON: field '" + where + "method' must be a string");
        rec.method = method.get<std::string>();
        result.levels.push_back(std::move(rec));
    }

    const nlohmann::json& cj = require_field(j, "coding", "");
    try {
        result.coding = coding::CodingFunction::from_json(cj.dump());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("forge result JSON: coding: ") + e.what());
    }
    return result;
}

std::string forge_result_to_csv(const forge::ForgeResult& result) {
    std::ostringstream out;
    out << "j,N,p_A,p_A_lo,p_A_hi,p_B_plus,p_B_minus,malicious_bit,I_side,p_I,p_I_lo,p_I_hi,truth,min_gap,samples\n";
    for (const forge::LevelRecord& rec : result.levels) {
        out << rec.j << ',' << rec.n << ',' << format_probability(rec.p_a.est) << ',' << format_probability(rec.p_a.lo)
            << ',' << format_probability(rec.p_a.hi) << ',' << format_probability(rec.p_b_plus.est) << ','
            << format_probability(rec.p_b_minus.est) << ',' << rec.malicious_bit << ',' << rec.i_side << ','
            << format_probability(rec.p_i.est) << ',' << format_probability(rec.p_i.lo) << ','
            << format_probability(rec.p_i.hi) << ',' << format_probability(rec.truth_at_stop) << ','
            << format_probability(rec.min_gap) << ',' << rec.samples_used << '\n';
    }
    return out.str();
}

std::string verify_report_to_json(const VerifyReport& report) {
    ordered_json j;
    j["config"] = ordered_json{{"seed", report.seed}, {"samples", report.samples}, {"source", report.source}};
    j["levels"] = ordered_json::array();
    for (const LevelVerify& lv : report.levels) {
        j["levels"].push_back(ordered_json{{"j", lv.j},
                                           {"N", lv.n},
                                           {"p_I_fresh", estimate_to_json(lv.p_i_fresh)},
                                           {"i_count", lv.i_count},
                                           {"min_gap", format_probability(lv.min_gap)},
                                           {"max_truth_err", format_probability(lv.max_truth_err)},
                                           {"samples", lv.samples}});
    }
    j["global"] = ordered_json{{"continuity_max_dev", format_probability(report.global.continuity_max_dev)},
                               {"continuity_cases", report.global.continuity_cases},
                               {"oracle_max_violation", format_probability(report.global.oracle_max_violation)},
                               {"oracle_histories", report.global.oracle_histories}};
    return j.dump(2) + "\n";
}

} // namespace bitforge::harness
