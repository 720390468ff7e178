// Acceptance suite: one test case per criterion, each printing a PASS or
// FAIL line with its measured numbers. ctest registers every criterion as
// its own entry so a red one is visible in isolation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "bitforge/chain.hpp"
#include "bitforge/coding.hpp"
#include "bitforge/forge.hpp"
#include "bitforge/harness.hpp"
#include "bitforge/oracle.hpp"

using namespace bitforge;
using coding::Bits;
using coding::CodingFunction;

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(const char* criterion, bool ok, const std::string& detail) {
    std::printf("[%s] %s — %s\n", criterion, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

// Every positive-probability history up to max_len under f, visited with
// its conditional probability.
void walk_positive_histories(const CodingFunction& f, int max_len,
                             const std::function<void(const Bits&, double)>& visit) {
    Bits bits;
    const std::function<void()> rec = [&] {
        if (static_cast<int>(bits.size()) >= max_len) return;
        for (const coding::Bit b : {0, 1}) {
            bits.push_back(b);
            bool possible = true;
            double p = 0.0;
            try {
                p = oracle::cond_prob_history(f, bits);
            } catch (const oracle::ImpossibleHistoryError&) {
                possible = false;
            }
            if (possible) {
                visit(bits, p);
                rec();
            }
            bits.pop_back();
        }
    };
    rec();
}

const std::vector<std::pair<const char*, const char*>> kAcceptancePairs = {
    {"kt:2", "always"}, {"empirical:1", "always"}, {"const:0.5", "always"}, {"const:0", "always"}};

forge::ForgeConfig pair_config(const char* predictor, std::int64_t samples) {
    forge::ForgeConfig cfg;
    cfg.seed = 20250807;
    cfg.levels = 2;
    cfg.samples = samples;
    cfg.predictor_id = predictor;
    cfg.rule_id = "always";
    return cfg;
}

} // namespace

TEST_CASE("criterion 01: stationary law at one million samples") {
    Stopwatch watch;
    RandomStream rng(1001);
    const std::int64_t n = 1'000'000;
    std::map<chain::ChainState, std::int64_t> counts;
    for (std::int64_t i = 0; i < n; ++i) ++counts[chain::stationary_sample(rng)];

    double worst_sigma = 0.0;
    bool ok = true;
    for (chain::ChainState s = 0; s <= 10; ++s) {
        const double p = chain::stationary_prob(s);
        const double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
        const double sigma = std::abs(static_cast<double>(counts[s]) / n - p) / se;
        worst_sigma = std::max(worst_sigma, sigma);
        if (sigma >= 3.0) ok = false;
    }
    const double t = watch.seconds();
    ok = ok && t < 5.0;
    report("criterion 01", ok,
           "states 0..10 within 3 standard errors (worst " + harness::format_probability(worst_sigma) + " se), runtime " +
               harness::format_probability(t) + " s (< 5 s)");
    CHECK(ok);
}

TEST_CASE("criterion 02: exact enumeration coverage and Monte-Carlo agreement") {
    Stopwatch watch;
    bool all_ok = true;
    RandomStream rng(2002);

    for (const std::int64_t k : {1, 2, 3}) {
        // The criterion's call: mass_tol 1e-9. The budget below already
        // gives it far more room than the distribution can use for k >= 2:
        // reaching residual 1e-9 needs ~3.5e20 paths at k=2 and ~9e159 at
        // k=3 (composition growth phi^C resp. tetranacci^C against mass
        // decay 2^-C), so the mass clause is unattainable there and the
        // call reports budget exhaustion. It is run as specified and the
        // honest outcome is recorded.
        double enumerated_mass = 0.0;
        bool mass_target_met = false;
        try {
            const chain::EnumerationResult r = chain::enumerate_paths_to_hit(k, 1e-9, 200'000);
            enumerated_mass = r.accumulated.to_double();
            mass_target_met = enumerated_mass >= 1.0 - 1e-9;
        } catch (const chain::EnumerationBudgetError& e) {
            enumerated_mass = e.accumulated_mass;
        }

        // Independent clauses on an achievable coverage level: exact
        // dyadic bookkeeping and Monte-Carlo path frequencies.
        const double workable_tol = k == 1 ? 1e-9 : (k == 2 ? 5e-3 : 0.47);
        const chain::EnumerationResult r = chain::enumerate_paths_to_hit(k, workable_tol, 400'000);
        const bool conservation = r.accumulated.to_double() + r.residual_mass == 1.0;

        std::map<std::vector<chain::ChainState>, std::int64_t> counts;
        const std::int64_t trials = 1'000'000;
        RandomStream sub = rng.fork(7, static_cast<std::uint64_t>(k));
        for (std::int64_t i = 0; i < trials; ++i) {
            std::vector<chain::ChainState> path{0};
            chain::ChainState s = 0;
            while (s != 2 * k) {
                s = chain::step(s, sub);
                path.push_back(s);
            }
            ++counts[path];
        }
        double worst_sigma = 0.0;
        std::int64_t compared = 0;
        for (const chain::WeightedPath& wp : r.paths) {
            const double p = wp.probability.to_double();
            if (p < 1e-3) continue;
            ++compared;
            const double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
            worst_sigma = std::max(worst_sigma, std::abs(static_cast<double>(counts[wp.path.states]) / trials - p) / se);
        }
        const bool mc_ok = worst_sigma < 3.0;

        const bool k_ok = mass_target_met && conservation && mc_ok;
        all_ok = all_ok && k_ok;
        report("criterion 02", k_ok,
               "k=" + std::to_string(k) + ": mass at tol 1e-9 = " + harness::format_probability(enumerated_mass) +
                   (mass_target_met ? " (target met)" : " (target 1-1e-9 unattainable: path mass decays as 2^-cost while path counts grow slower)") +
                   ", conservation " + (conservation ? "exact" : "BROKEN") + ", MC worst sigma " +
                   harness::format_probability(worst_sigma) + " over " + std::to_string(compared) + " paths");
        CHECK(mass_target_met);
        CHECK(conservation);
        CHECK(mc_ok);
    }
    const double t = watch.seconds();
    const bool time_ok = t < 30.0;
    report("criterion 02", all_ok && time_ok, "runtime " + harness::format_probability(t) + " s (< 30 s)");
    CHECK(time_ok);
}

TEST_CASE("criterion 03: filter matches the brute-force oracle on every short history") {
    Stopwatch watch;
    const std::vector<CodingFunction> codings{CodingFunction::base(), CodingFunction::with_exceptions({{5, 0}}),
                                              CodingFunction::with_exceptions({{7, 0}}),
                                              CodingFunction::with_exceptions({{9, 0}})};
    const harness::OracleProbeResult probe = harness::oracle_equivalence_probe(codings, 12, 1e-9);
    const double t = watch.seconds();
    const bool ok = probe.violations == 0 && t < 120.0;
    report("criterion 03", ok,
           std::to_string(probe.histories_checked) + " positive histories of length <= 12 over 4 codings, " +
               std::to_string(probe.violations) + " interval violations (max distance " +
               harness::format_probability(probe.max_violation) + ", max width " +
               harness::format_probability(probe.max_interval_width) + "), runtime " + harness::format_probability(t) +
               " s (< 2 min)");
    CHECK(ok);
}

TEST_CASE("criterion 04: closed-form case values") {
    bool ok = true;
    std::int64_t ending00 = 0, ending10 = 0;
    for (const CodingFunction& f : {CodingFunction::base(), CodingFunction::with_exceptions({{5, 0}}),
                                    CodingFunction::with_exceptions({{7, 0}}), CodingFunction::with_exceptions({{9, 0}})}) {
        walk_positive_histories(f, 12, [&](const Bits& bits, double p) {
            const std::size_t n = bits.size();
            if (n >= 2 && bits[n - 2] == 0 && bits[n - 1] == 0) {
                ++ending00;
                if (std::abs(p - 1.0) > 1e-12) ok = false;
            }
            if (n >= 2 && bits[n - 2] == 1 && bits[n - 1] == 0) {
                ++ending10;
                if (std::abs(p - 0.0) > 1e-12) ok = false;
            }
        });
    }
    std::int64_t all_ones = 0;
    const CodingFunction f0 = CodingFunction::base();
    for (int len = 1; len <= 12; ++len) {
        const Bits ones(static_cast<std::size_t>(len), 1);
        ++all_ones;
        if (std::abs(oracle::cond_prob_history(f0, ones) - 0.5) > 1e-12) ok = false;
    }
    report("criterion 04", ok,
           std::to_string(ending00) + " histories ending 0,0 -> 1; " + std::to_string(ending10) +
               " ending 1,0 -> 0; " + std::to_string(all_ones) + " all-ones -> 0.5; all to 1e-12");
    CHECK(ok);
}

TEST_CASE("criterion 05: conditional law is Markov of the declared order") {
    const CodingFunction f = CodingFunction::with_exceptions({{2 * 2 + 1, 0}}); // N = 2
    const std::int64_t k = f.order_bound();
    const int len = static_cast<int>(k) + 4;
    std::int64_t checked = 0, violations = 0;
    for (std::uint32_t word = 0; word < (1u << len); ++word) {
        Bits bits;
        for (int i = 0; i < len; ++i) bits.push_back((word >> i) & 1u);
        double full = 0.0;
        try {
            full = oracle::cond_prob_history(f, bits);
        } catch (const oracle::ImpossibleHistoryError&) {
            continue;
        }
        ++checked;
        const Bits suffix(bits.end() - k, bits.end());
        if (std::abs(full - oracle::cond_prob_history(f, suffix)) > 1e-12) ++violations;
    }
    const bool ok = violations == 0 && checked > 0;
    report("criterion 05", ok,
           "order bound " + std::to_string(k) + ": " + std::to_string(checked) + " positive histories of length " +
               std::to_string(len) + ", " + std::to_string(violations) + " violations");
    CHECK(ok);
}

TEST_CASE("criterion 06: forged levels clear the probability thresholds") {
    bool all_ok = true;
    for (const auto& [predictor, rule] : kAcceptancePairs) {
        Stopwatch watch;
        const forge::ForgeResult result = forge::run_forge(pair_config(predictor, 100'000));
        bool pair_ok = result.levels.size() == 2;
        std::ostringstream detail;
        detail << predictor << "+" << rule << ":";
        for (const forge::LevelRecord& rec : result.levels) {
            pair_ok = pair_ok && rec.p_a.lo > 0.125;
            detail << " level " << rec.j << " N=" << rec.n << " p_A_lo=" << harness::format_probability(rec.p_a.lo);
        }
        const harness::VerifyReport verify = harness::run_verify(result, 200'000, 777, "acceptance");
        for (const harness::LevelVerify& lv : verify.levels) {
            pair_ok = pair_ok && lv.p_i_fresh.lo > 0.0625 - 0.01;
            detail << " fresh_p_I_lo(j=" << lv.j << ")=" << harness::format_probability(lv.p_i_fresh.lo);
        }
        const double t = watch.seconds();
        pair_ok = pair_ok && t < 300.0;
        detail << " runtime " << harness::format_probability(t) << " s (< 5 min)";
        report("criterion 06", pair_ok, detail.str());
        all_ok = all_ok && pair_ok;
    }
    CHECK(all_ok);
}

TEST_CASE("criterion 07: gap certainty on every verified I trial") {
    bool all_ok = true;
    for (const auto& [predictor, rule] : kAcceptancePairs) {
        const forge::ForgeResult result = forge::run_forge(pair_config(predictor, 20'000));
        const harness::VerifyReport verify = harness::run_verify(result, 40'000, 888, "acceptance");
        std::ostringstream detail;
        detail << predictor << "+" << rule << ":";
        bool pair_ok = true;
        for (const harness::LevelVerify& lv : verify.levels) {
            pair_ok = pair_ok && lv.i_count > 0 && lv.min_gap >= 0.25;
            detail << " level " << lv.j << " I-trials=" << lv.i_count << " min_gap=" << harness::format_probability(lv.min_gap);
        }
        report("criterion 07", pair_ok, detail.str());
        all_ok = all_ok && pair_ok;
    }
    CHECK(all_ok);
}

TEST_CASE("criterion 08: filter truth equals half the malicious bit at every stop") {
    bool all_ok = true;
    for (const auto& [predictor, rule] : kAcceptancePairs) {
        const forge::ForgeResult result = forge::run_forge(pair_config(predictor, 20'000));
        const harness::VerifyReport verify = harness::run_verify(result, 40'000, 999, "acceptance");
        std::ostringstream detail;
        detail << predictor << "+" << rule << ":";
        bool pair_ok = true;
        for (const harness::LevelVerify& lv : verify.levels) {
            pair_ok = pair_ok && lv.max_truth_err <= 1e-12;
            detail << " level " << lv.j << " max|filter-0.5*bit|=" << harness::format_probability(lv.max_truth_err);
        }
        report("criterion 08", pair_ok, detail.str());
        all_ok = all_ok && pair_ok;
    }
    CHECK(all_ok);
}

TEST_CASE("criterion 09: conditional probability ignores everything before the reset") {
    // 20 random post-reset suffixes split over the base coding and a
    // forged two-level coding, 100 random prefixes each.
    const forge::ForgeResult forged = forge::run_forge(pair_config("const:0.5", 20'000));
    double max_dev = 0.0;
    std::int64_t cases = 0;
    for (const CodingFunction& f : {CodingFunction::base(), forged.coding}) {
        const harness::ContinuityProbeResult r = harness::continuity_suite(f, 10, 100, RandomStream(909));
        max_dev = std::max(max_dev, r.max_deviation);
        cases += r.cases;
    }
    const bool ok = cases == 20 && max_dev <= 1e-12;
    report("criterion 09", ok,
           std::to_string(cases) + " suffixes x 100 prefixes, max deviation " + harness::format_probability(max_dev));
    CHECK(ok);
}

TEST_CASE("criterion 10: identical seeds give byte-identical reports") {
    const char* cli = std::getenv("BITFORGE_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "BITFORGE_CLI must point at the command-line binary");

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "bitforge_accept10";
    fs::create_directories(dir);

    const auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        REQUIRE_MESSAGE(in.good(), ("missing output file " + p.string()).c_str());
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    const auto run = [&](const std::string& args) {
        const std::string cmd = std::string(cli) + " " + args + " 2>/dev/null";
        return std::system(cmd.c_str());
    };

    bool ok = true;
    for (int rep = 1; rep <= 2; ++rep) {
        const std::string forge_out = (dir / ("forge" + std::to_string(rep) + ".json")).string();
        const std::string verify_out = (dir / ("verify" + std::to_string(rep) + ".json")).string();
        ok = ok && run("forge --seed 7 --levels 2 --samples 2000 --predictor kt:2 --stop-rule always --out " + forge_out) == 0;
        ok = ok && run("verify --in " + forge_out + " --samples 2000 --seed 8 --out " + verify_out) == 0;
    }
    const std::string f1 = slurp(dir / "forge1.json"), f2 = slurp(dir / "forge2.json");
    const std::string v1 = slurp(dir / "verify1.json"), v2 = slurp(dir / "verify2.json");
    ok = ok && f1 == f2 && v1 == v2 && !f1.empty() && !v1.empty();
    report("criterion 10", ok,
           "forge outputs " + std::to_string(f1.size()) + " bytes, verify outputs " + std::to_string(v1.size()) +
               " bytes, reruns byte-identical: " + (ok ? "yes" : "no"));
    CHECK(ok);
}
