#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bitforge/forge.hpp"
#include "bitforge/oracle.hpp"

namespace bitforge::harness {

/// Fresh re-estimate of one forged level on independent randomness. The
/// forge's own estimate is selection-biased (N was chosen because it
/// cleared the threshold), so verification never reuses its streams.
struct LevelVerify {
    int j = 0;
    std::int64_t n = 0;
    forge::ProbEstimate p_i_fresh{};
    std::int64_t i_count = 0;
    double min_gap = 0.0;       // over trials landing in I; >= 1/4 by construction
    double max_truth_err = 0.0; // filter value at the block end vs 0.5*bit
    std::int64_t samples = 0;
};

struct GlobalProbes {
    double continuity_max_dev = 0.0;
    std::int64_t continuity_cases = 0;
    double oracle_max_violation = 0.0;
    std::int64_t oracle_histories = 0;
};

struct VerifyReport {
    std::uint64_t seed = 0;
    std::int64_t samples = 0;
    std::string source;
    std::vector<LevelVerify> levels;
    GlobalProbes global;
};

/// estimator/rule may be supplied for pairs that the config identifier
/// strings cannot rebuild (foreign callbacks); null means "build from the
/// config".
LevelVerify verify_level(const forge::ForgeResult& result, int level_index, std::int64_t samples,
                         const RandomStream& stream,
                         const std::shared_ptr<predictors::Estimator>& estimator = nullptr,
                         const std::shared_ptr<predictors::StoppingRule>& rule = nullptr);

/// verify_level over every level plus small oracle-equivalence and
/// continuity probes against the forged coding.
VerifyReport run_verify(const forge::ForgeResult& result, std::int64_t samples, std::uint64_t seed,
                        const std::string& source,
                        const std::shared_ptr<predictors::Estimator>& estimator = nullptr,
                        const std::shared_ptr<predictors::StoppingRule>& rule = nullptr);

struct OracleProbeResult {
    std::int64_t histories_checked = 0;
    std::int64_t violations = 0;
    double max_violation = 0.0;      // distance of the filter value outside the oracle interval
    double max_interval_width = 0.0;
};

/// Walk every positive-probability history up to max_len bits under each
/// coding and require the filter value to land inside the brute-force
/// interval at tolerance tol; also require both routes to agree on which
/// extensions are impossible.
OracleProbeResult oracle_equivalence_probe(const std::vector<coding::CodingFunction>& codings, int max_len,
                                           double tol);

struct ContinuityProbeResult {
    std::int64_t cases = 0;
    double max_deviation = 0.0;
};

/// Random post-reset suffixes, each probed with random prefixes.
ContinuityProbeResult continuity_suite(const coding::CodingFunction& f, std::int64_t suffixes,
                                       std::int64_t prefixes, const RandomStream& stream);

/// Probability rendering used by every report: decimal, 12 significant
/// digits.
std::string format_probability(double p);

std::string forge_result_to_json(const forge::ForgeResult& result);
forge::ForgeResult forge_result_from_json(const std::string& text);
std::string forge_result_to_csv(const forge::ForgeResult& result);
std::string verify_report_to_json(const VerifyReport& report);

} // namespace bitforge::harness
