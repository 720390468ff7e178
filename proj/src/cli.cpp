#include "bitforge/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bitforge/chain.hpp"
#include "bitforge/harness.hpp"

namespace bitforge::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiagnostic = 1;
constexpr int kExitInvalidInput = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write file '" + path + "'");
    out << content;
}

struct ForgeArgs {
    forge::ForgeConfig cfg;
    std::string out_path;
    std::string format = "json";
};

int cmd_forge(const ForgeArgs& args) {
    const forge::ForgeResult result = forge::run_forge(args.cfg);
    const std::string payload =
        args.format == "csv" ? harness::forge_result_to_csv(result) : harness::forge_result_to_json(result);
    if (args.out_path.empty())
        std::cout << payload;
    else
        write_file(args.out_path, payload);
    for (const forge::LevelRecord& rec : result.levels)
        std::cerr << "level " << rec.j << ": N=" << rec.n << " bit=" << rec.malicious_bit << " I=" << rec.i_side
                  << " p_I=" << harness::format_probability(rec.p_i.est) << " (" << rec.method << ")\n";
    return kExitOk;
}

struct VerifyArgs {
    std::string in_path;
    std::string out_path;
    std::int64_t samples = 200'000;
    std::uint64_t seed = 1;
};

int cmd_verify(const VerifyArgs& args) {
    const forge::ForgeResult result = harness::forge_result_from_json(read_file(args.in_path));
    const harness::VerifyReport report = harness::run_verify(result, args.samples, args.seed, args.in_path);
    const std::string payload = harness::verify_report_to_json(report);
    if (args.out_path.empty())
        std::cout << payload;
    else
        write_file(args.out_path, payload);

    bool clean = report.global.oracle_max_violation == 0.0 && report.global.continuity_max_dev <= 1e-12;
    for (const harness::LevelVerify& lv : report.levels) {
        if (lv.i_count > 0 && lv.min_gap < 0.25) clean = false;
        if (lv.max_truth_err > 1e-12) clean = false;
        std::cerr << "level " << lv.j << ": fresh p_I=" << harness::format_probability(lv.p_i_fresh.est)
                  << " lo=" << harness::format_probability(lv.p_i_fresh.lo) << " min_gap=" << harness::format_probability(lv.min_gap)
                  << " truth_err=" << harness::format_probability(lv.max_truth_err) << "\n";
    }
    if (!clean) {
        std::cerr << "verify: diagnostic failure (see report)\n";
        return kExitDiagnostic;
    }
    return kExitOk;
}

struct ProbeArgs {
    std::uint64_t seed = 1;
    int max_len = 12;
    std::int64_t suffixes = 20;
    std::int64_t prefixes = 100;
    std::string coding_path;
    std::string out_path;
};

int cmd_probe(const ProbeArgs& args) {
    std::vector<coding::CodingFunction> codings{coding::CodingFunction::base()};
    if (args.coding_path.empty()) {
        for (const std::int64_t state : {5, 7, 9}) codings.push_back(coding::CodingFunction::with_exceptions({{state, 0}}));
    } else {
        codings.push_back(coding::CodingFunction::from_json(read_file(args.coding_path)));
    }

    const harness::OracleProbeResult oracle = harness::oracle_equivalence_probe(codings, args.max_len, 1e-9);

    const RandomStream root(args.seed);
    harness::ContinuityProbeResult continuity;
    for (std::size_t i = 0; i < codings.size(); ++i) {
        const harness::ContinuityProbeResult r =
            harness::continuity_suite(codings[i], args.suffixes, args.prefixes, root.fork(0x70726265, i));
        continuity.cases += r.cases;
        continuity.max_deviation = std::max(continuity.max_deviation, r.max_deviation);
    }

    nlohmann::ordered_json j;
    j["oracle"] = {{"histories_checked", oracle.histories_checked},
                   {"violations", oracle.violations},
                   {"max_violation", harness::format_probability(oracle.max_violation)},
                   {"max_interval_width", harness::format_probability(oracle.max_interval_width)}};
    j["continuity"] = {{"cases", continuity.cases},
                       {"max_deviation", harness::format_probability(continuity.max_deviation)}};
    const std::string payload = j.dump(2) + "\n";
    if (args.out_path.empty())
        std::cout << payload;
    else
        write_file(args.out_path, payload);

    if (oracle.violations != 0 || continuity.max_deviation > 1e-12) {
        std::cerr << "probe: diagnostic failure\n";
        return kExitDiagnostic;
    }
    return kExitOk;
}

struct SimulateArgs {
    std::uint64_t seed = 1;
    std::int64_t length = 1000;
    std::string start = "stationary";
    std::string coding_path;
    std::string out_path;
};

int cmd_simulate(const SimulateArgs& args) {
    coding::CodingFunction f =
        args.coding_path.empty() ? coding::CodingFunction::base() : coding::CodingFunction::from_json(read_file(args.coding_path));

    RandomStream rng(args.seed);
    chain::ChainState s0 = 0;
    if (args.start == "stationary") {
        s0 = chain::stationary_sample(rng);
    } else {
        try {
            std::size_t used = 0;
            s0 = std::stoll(args.start, &used);
            if (used != args.start.size() || s0 < 0) throw std::invalid_argument("bad");
        } catch (const std::exception&) {
            throw std::invalid_argument("flag '--start': must be 'stationary' or a non-negative integer");
        }
    }
    const chain::ChainPath path = chain::simulate_path(s0, args.length, rng);

    std::ostringstream csv;
    csv << "i,state,bit\n";
    for (std::size_t i = 0; i < path.states.size(); ++i)
        csv << i << ',' << path.states[i] << ',' << f.apply(path.states[i]) << '\n';
    if (args.out_path.empty())
        std::cout << csv.str();
    else
        write_file(args.out_path, csv.str());
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"adversarial testbed for intermittent next-bit estimators on stationary ergodic binary processes"};
    app.require_subcommand(1);

    ForgeArgs fa;
    CLI::App* forge_cmd = app.add_subcommand("forge", "build adversarial levels against a predictor/rule pair");
    forge_cmd->add_option("--seed", fa.cfg.seed, "random seed");
    forge_cmd->add_option("--levels", fa.cfg.levels, "number of levels to build")->check(CLI::PositiveNumber);
    forge_cmd->add_option("--samples", fa.cfg.samples, "Monte-Carlo samples per estimate")->check(CLI::Range(std::int64_t{100}, std::int64_t{1} << 40));
    forge_cmd->add_option("--confidence", fa.cfg.confidence, "confidence level for intervals");
    forge_cmd->add_option("--predictor", fa.cfg.predictor_id, "kt:<order> | empirical:<order> | const:<p>");
    forge_cmd->add_option("--stop-rule", fa.cfg.rule_id, "always | delayed:<t0>");
    forge_cmd->add_option("--n-cap", fa.cfg.n_cap, "largest level index to try");
    forge_cmd->add_option("--exact-threshold", fa.cfg.exact_state_threshold, "use exact enumeration while 2N <= this");
    forge_cmd->add_option("--enum-budget", fa.cfg.enum_budget, "path budget for exact enumeration");
    forge_cmd->add_option("--max-chain-steps", fa.cfg.max_chain_steps, "per-trial chain length safety cap");
    forge_cmd->add_option("--out", fa.out_path, "output path (stdout when omitted)");
    forge_cmd->add_option("--format", fa.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));

    VerifyArgs va;
    CLI::App* verify_cmd = app.add_subcommand("verify", "re-estimate a forge result on fresh randomness");
    verify_cmd->add_option("--in", va.in_path, "forge result JSON")->required();
    verify_cmd->add_option("--samples", va.samples, "fresh samples per level")->check(CLI::Range(std::int64_t{100}, std::int64_t{1} << 40));
    verify_cmd->add_option("--seed", va.seed, "verification seed (independent of the forge's)");
    verify_cmd->add_option("--out", va.out_path, "output path (stdout when omitted)");

    ProbeArgs pa;
    CLI::App* probe_cmd = app.add_subcommand("probe", "oracle-equivalence and continuity suites");
    probe_cmd->add_option("--seed", pa.seed, "random seed");
    probe_cmd->add_option("--max-len", pa.max_len, "history length bound for the oracle suite")->check(CLI::Range(1, 24));
    probe_cmd->add_option("--suffixes", pa.suffixes, "random post-reset suffixes")->check(CLI::PositiveNumber);
    probe_cmd->add_option("--prefixes", pa.prefixes, "random prefixes per suffix")->check(CLI::PositiveNumber);
    probe_cmd->add_option("--coding", pa.coding_path, "probe this coding JSON instead of the built-in exception set");
    probe_cmd->add_option("--out", pa.out_path, "output path (stdout when omitted)");

    SimulateArgs sa;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "sample the chain and its coded bits to CSV");
    sim_cmd->add_option("--seed", sa.seed, "random seed");
    sim_cmd->add_option("--length", sa.length, "number of steps")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--start", sa.start, "'stationary' or an explicit start state");
    sim_cmd->add_option("--coding", sa.coding_path, "coding JSON (default coding when omitted)");
    sim_cmd->add_option("--out", sa.out_path, "output path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInvalidInput;
    }

    try {
        if (forge_cmd->parsed()) return cmd_forge(fa);
        if (verify_cmd->parsed()) return cmd_verify(va);
        if (probe_cmd->parsed()) return cmd_probe(pa);
        return cmd_simulate(sa);
    } catch (const forge::HypothesisViolationError& e) {
        std::cerr << "diagnostic: " << e.what() << "\n";
        return kExitDiagnostic;
    } catch (const forge::ConsistencyFaultError& e) {
        std::cerr << "diagnostic: " << e.what() << "\n";
        return kExitDiagnostic;
    } catch (const forge::ChainLengthCapError& e) {
        std::cerr << "diagnostic: " << e.what() << "\n";
        return kExitDiagnostic;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    }
}

} // namespace bitforge::cli
