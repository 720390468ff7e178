#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bitforge/chain.hpp"
#include "bitforge/coding.hpp"
#include "bitforge/forge.hpp"
#include "bitforge/harness.hpp"
#include "bitforge/oracle.hpp"
#include "bitforge/predictors.hpp"
#include "bitforge/rng.hpp"

namespace py = pybind11;
using namespace bitforge;

namespace {

chain::ChainPath to_path(const std::vector<std::int64_t>& states) {
    chain::ChainPath p{states};
    if (!chain::is_legal_path(p)) throw std::invalid_argument("states do not form a legal chain path");
    return p;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "adversarial testbed for intermittent next-bit estimators on stationary ergodic binary processes";

    py::register_exception<forge::HypothesisViolationError>(m, "HypothesisViolationError");
    py::register_exception<oracle::ImpossibleHistoryError>(m, "ImpossibleHistoryError");
    py::register_exception<chain::EnumerationBudgetError>(m, "EnumerationBudgetError");

    py::class_<RandomStream>(m, "RandomStream")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("fork", &RandomStream::fork, py::arg("a"), py::arg("b") = 0)
        .def("uniform01", &RandomStream::uniform01);

    // chain
    m.def("stationary_prob", &chain::stationary_prob, py::arg("state"));
    m.def("stationary_sample", &chain::stationary_sample, py::arg("rng"));
    m.def("step", &chain::step, py::arg("state"), py::arg("rng"));
    m.def(
        "simulate_path",
        [](std::int64_t initial, std::int64_t length, RandomStream& rng) {
            return chain::simulate_path(initial, length, rng).states;
        },
        py::arg("initial"), py::arg("length"), py::arg("rng"));
    m.def(
        "hitting_time",
        [](const std::vector<std::int64_t>& states, std::int64_t k) { return chain::hitting_time(to_path(states), k); },
        py::arg("states"), py::arg("k"));
    m.def(
        "enumerate_paths_to_hit",
        [](std::int64_t k, double mass_tol, std::int64_t budget) {
            const chain::EnumerationResult r = chain::enumerate_paths_to_hit(k, mass_tol, budget);
            std::vector<std::pair<std::vector<std::int64_t>, double>> out;
            out.reserve(r.paths.size());
            for (const chain::WeightedPath& wp : r.paths) out.emplace_back(wp.path.states, wp.probability.to_double());
            return std::make_pair(out, r.residual_mass);
        },
        py::arg("k"), py::arg("mass_tol"), py::arg("budget") = 1'000'000);

    // coding
    py::class_<coding::CodingFunction>(m, "CodingFunction")
        .def_static("base", &coding::CodingFunction::base)
        .def_static(
            "with_exceptions",
            [](const std::map<std::int64_t, int>& ex) { return coding::CodingFunction::with_exceptions(ex); },
            py::arg("exceptions"))
        .def("apply", &coding::CodingFunction::apply, py::arg("state"))
        .def("order_bound", &coding::CodingFunction::order_bound)
        .def("largest_zero_exception", &coding::CodingFunction::largest_zero_exception)
        .def("exceptions", [](const coding::CodingFunction& f) { return f.exceptions(); })
        .def("to_json", &coding::CodingFunction::to_json)
        .def_static("from_json", &coding::CodingFunction::from_json, py::arg("text"))
        .def("__eq__", [](const coding::CodingFunction& a, const coding::CodingFunction& b) { return a == b; });

    m.def(
        "encode",
        [](const coding::CodingFunction& f, const std::vector<std::int64_t>& states) { return coding::encode(f, to_path(states)); },
        py::arg("f"), py::arg("states"));
    m.def(
        "invert",
        [](const coding::CodingFunction& f, const coding::Bits& bits) {
            const coding::InvertResult r = coding::invert(f, bits);
            std::vector<std::vector<std::int64_t>> out;
            for (const chain::ChainPath& p : r.candidates) out.push_back(p.states);
            return out;
        },
        py::arg("f"), py::arg("bits"));
    m.def("last_reset_index", &coding::last_reset_index, py::arg("bits"));

    // oracle
    m.def("cond_prob_history", &oracle::cond_prob_history, py::arg("f"), py::arg("bits"));
    m.def(
        "brute_force_cond_prob",
        [](const coding::CodingFunction& f, const coding::Bits& bits, double tol) {
            const oracle::ProbInterval iv = oracle::brute_force_cond_prob(f, bits, tol);
            return std::make_pair(iv.lo, iv.hi);
        },
        py::arg("f"), py::arg("bits"), py::arg("mass_tol") = 1e-9);
    m.def(
        "d_star",
        [](const coding::Bits& x, const coding::Bits& y, std::int64_t depth) {
            return oracle::d_star(oracle::History{x}, oracle::History{y}, depth);
        },
        py::arg("x"), py::arg("y"), py::arg("depth"));
    m.def(
        "continuity_probe",
        [](const coding::CodingFunction& f, const coding::Bits& bits, std::int64_t n_prefixes, std::uint64_t seed) {
            RandomStream rng(seed);
            return oracle::continuity_probe(f, bits, n_prefixes, rng);
        },
        py::arg("f"), py::arg("bits"), py::arg("n_prefixes") = 100, py::arg("seed") = 1);

    // predictors
    py::class_<predictors::Estimator, std::shared_ptr<predictors::Estimator>>(m, "Estimator")
        .def("id", &predictors::Estimator::id)
        .def("predict", [](const predictors::Estimator& e, const coding::Bits& prefix) {
            auto run = e.start();
            for (const coding::Bit b : prefix) run->observe(b);
            return run->predict();
        });
    py::class_<predictors::StoppingRule, std::shared_ptr<predictors::StoppingRule>>(m, "StoppingRule")
        .def("id", &predictors::StoppingRule::id)
        .def("stops", [](const predictors::StoppingRule& r, const coding::Bits& prefix) {
            auto run = r.start();
            std::vector<std::int64_t> stops;
            for (std::size_t t = 0; t < prefix.size(); ++t)
                if (run->observe_and_decide(prefix[t])) stops.push_back(static_cast<std::int64_t>(t));
            return stops;
        });

    m.def("make_estimator", &predictors::make_estimator, py::arg("id"));
    m.def("make_rule", &predictors::make_rule, py::arg("id"));
    m.def(
        "callback_estimator",
        [](const std::string& id, const std::function<double(const coding::Bits&)>& fn) {
            return predictors::callback_estimator(id, fn, /*parallel_safe=*/false);
        },
        py::arg("id"), py::arg("fn"), "wrap prefix -> probability; runs single-threaded");
    m.def(
        "callback_rule",
        [](const std::string& id, const std::function<bool(const coding::Bits&)>& fn) {
            return predictors::callback_rule(id, fn, /*parallel_safe=*/false);
        },
        py::arg("id"), py::arg("fn"), "wrap prefix -> stop decision; runs single-threaded");
    m.def(
        "run_session",
        [](const coding::Bits& bits, const std::shared_ptr<predictors::Estimator>& e,
           const std::shared_ptr<predictors::StoppingRule>& r) {
            const predictors::SessionTrace trace = predictors::run_session(bits, *e, *r);
            std::vector<std::tuple<std::int64_t, std::int64_t, double>> out;
            for (const predictors::StopRecord& s : trace.stops) out.emplace_back(s.n, s.lambda, s.h);
            return out;
        },
        py::arg("bits"), py::arg("estimator"), py::arg("rule"));

    // forge + harness
    py::class_<forge::ForgeConfig>(m, "ForgeConfig")
        .def(py::init<>())
        .def_readwrite("seed", &forge::ForgeConfig::seed)
        .def_readwrite("levels", &forge::ForgeConfig::levels)
        .def_readwrite("samples", &forge::ForgeConfig::samples)
        .def_readwrite("confidence", &forge::ForgeConfig::confidence)
        .def_readwrite("predictor_id", &forge::ForgeConfig::predictor_id)
        .def_readwrite("rule_id", &forge::ForgeConfig::rule_id)
        .def_readwrite("n_cap", &forge::ForgeConfig::n_cap)
        .def_readwrite("exact_state_threshold", &forge::ForgeConfig::exact_state_threshold)
        .def_readwrite("enum_budget", &forge::ForgeConfig::enum_budget)
        .def_readwrite("max_chain_steps", &forge::ForgeConfig::max_chain_steps);

    py::class_<forge::ProbEstimate>(m, "ProbEstimate")
        .def_readonly("est", &forge::ProbEstimate::est)
        .def_readonly("lo", &forge::ProbEstimate::lo)
        .def_readonly("hi", &forge::ProbEstimate::hi);

    py::class_<forge::LevelRecord>(m, "LevelRecord")
        .def_readonly("j", &forge::LevelRecord::j)
        .def_readonly("n", &forge::LevelRecord::n)
        .def_readonly("p_a", &forge::LevelRecord::p_a)
        .def_readonly("p_b_plus", &forge::LevelRecord::p_b_plus)
        .def_readonly("p_b_minus", &forge::LevelRecord::p_b_minus)
        .def_readonly("malicious_bit", &forge::LevelRecord::malicious_bit)
        .def_readonly("i_side", &forge::LevelRecord::i_side)
        .def_readonly("p_i", &forge::LevelRecord::p_i)
        .def_readonly("truth_at_stop", &forge::LevelRecord::truth_at_stop)
        .def_readonly("min_gap", &forge::LevelRecord::min_gap)
        .def_readonly("samples_used", &forge::LevelRecord::samples_used)
        .def_readonly("method", &forge::LevelRecord::method);

    py::class_<forge::ForgeResult>(m, "ForgeResult")
        .def_readonly("levels", &forge::ForgeResult::levels)
        .def_readonly("coding", &forge::ForgeResult::coding)
        .def("to_json", [](const forge::ForgeResult& r) { return harness::forge_result_to_json(r); })
        .def("to_csv", [](const forge::ForgeResult& r) { return harness::forge_result_to_csv(r); })
        .def_static("from_json", &harness::forge_result_from_json, py::arg("text"));

    m.def("run_forge", py::overload_cast<const forge::ForgeConfig&>(&forge::run_forge), py::arg("config"));
    m.def("run_forge",
          py::overload_cast<const forge::ForgeConfig&, const std::shared_ptr<predictors::Estimator>&,
                            const std::shared_ptr<predictors::StoppingRule>&>(&forge::run_forge),
          py::arg("config"), py::arg("estimator"), py::arg("rule"));

    py::class_<harness::LevelVerify>(m, "LevelVerify")
        .def_readonly("j", &harness::LevelVerify::j)
        .def_readonly("n", &harness::LevelVerify::n)
        .def_readonly("p_i_fresh", &harness::LevelVerify::p_i_fresh)
        .def_readonly("i_count", &harness::LevelVerify::i_count)
        .def_readonly("min_gap", &harness::LevelVerify::min_gap)
        .def_readonly("max_truth_err", &harness::LevelVerify::max_truth_err)
        .def_readonly("samples", &harness::LevelVerify::samples);

    py::class_<harness::VerifyReport>(m, "VerifyReport")
        .def_readonly("levels", &harness::VerifyReport::levels)
        .def("to_json", &harness::verify_report_to_json);

    m.def(
        "run_verify",
        [](const forge::ForgeResult& result, std::int64_t samples, std::uint64_t seed,
           const std::shared_ptr<predictors::Estimator>& e, const std::shared_ptr<predictors::StoppingRule>& r) {
            return harness::run_verify(result, samples, seed, "<memory>", e, r);
        },
        py::arg("result"), py::arg("samples") = 200'000, py::arg("seed") = 1, py::arg("estimator") = nullptr,
        py::arg("rule") = nullptr);
}
