#include "bitforge/coding.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bitforge::coding {

namespace {

void check_exception_key(std::int64_t state, Bit bit) {
    if (state < 3 || state % 2 == 0)
        throw std::invalid_argument("CodingFunction: exception state " + std::to_string(state) + " must be odd and >= 3");
    if (bit != 0 && bit != 1) throw std::invalid_argument("CodingFunction: exception bit must be 0 or 1");
}

} // namespace

CodingFunction CodingFunction::base() { return CodingFunction{}; }

CodingFunction CodingFunction::with_exceptions(const std::map<std::int64_t, Bit>& exceptions) {
    CodingFunction f;
    for (const auto& [state, bit] : exceptions) f.set_exception(state, bit);
    return f;
}

void CodingFunction::set_exception(std::int64_t state, Bit bit) {
    check_exception_key(state, bit);
    exceptions_[state] = bit;
}

Bit CodingFunction::apply(chain::ChainState s) const {
    if (s < 0) throw std::invalid_argument("CodingFunction::apply: negative state");
    if (s <= 1) return 0;
    if (s % 2 == 0) return 1;
    const auto it = exceptions_.find(s);
    return it == exceptions_.end() ? 1 : it->second;
}

std::int64_t CodingFunction::largest_zero_exception() const {
    std::int64_t best = -1;
    for (const auto& [state, bit] : exceptions_)
        if (bit == 0) best = std::max(best, state);
    return best;
}

std::int64_t CodingFunction::order_bound() const {
    // z+1 is NOT enough: the window (0,1,1,1,0,0) under an exception at 5
    // is read either as 1,2,3,4 then reset or as 5,6,7,8 then reset, and
    // the two readings end in different states with history-dependent
    // weights. One more bit always reaches a pinning reset pattern
    // (verified exhaustively in the tests).
    const std::int64_t z = largest_zero_exception();
    return z < 0 ? 3 : z + 2;
}

std::string CodingFunction::to_json() const {
    nlohmann::ordered_json j;
    j["default_odd"] = 1;
    j["exceptions"] = nlohmann::ordered_json::array();
    for (const auto& [state, bit] : exceptions_) // std::map keeps states strictly increasing
        j["exceptions"].push_back({{"state", state}, {"bit", bit}});
    return j.dump();
}

CodingFunction CodingFunction::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("coding JSON: parse error: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("coding JSON: top level must be an object");
    if (!j.contains("default_odd") || !j["default_odd"].is_number_integer() || j["default_odd"].get<int>() != 1)
        throw std::invalid_argument("coding JSON: field 'default_odd' must be the integer 1");
    if (!j.contains("exceptions") || !j["exceptions"].is_array())
        throw std::invalid_argument("coding JSON: field 'exceptions' must be an array");
    CodingFunction f;
    std::int64_t prev = -1;
    for (std::size_t i = 0; i < j["exceptions"].size(); ++i) {
        const auto& e = j["exceptions"][i];
        const std::string where = "coding JSON: exceptions[" + std::to_string(i) + "]";
        if (!e.is_object() || !e.contains("state") || !e.contains("bit")) throw std::invalid_argument(where + ": need fields 'state' and 'bit'");
        if (!e["state"].is_number_integer()) throw std::invalid_argument(where + ".state: must be an integer");
        if (!e["bit"].is_number_integer()) throw std::invalid_argument(where + ".bit: must be an integer");
        const std::int64_t state = e["state"].get<std::int64_t>();
        const int bit = e["bit"].get<int>();
        if (state <= prev) throw std::invalid_argument(where + ".state: states must be strictly increasing");
        prev = state;
        try {
            f.set_exception(state, bit);
        } catch (const std::invalid_argument& err) {
            throw std::invalid_argument(where + ": " + err.what());
        }
    }
    return f;
}

Bits encode(const CodingFunction& f, const chain::ChainPath& path) {
    Bits out;
    out.reserve(path.states.size());
    for (const chain::ChainState s : path.states) out.push_back(f.apply(s));
    return out;
}

const chain::ChainPath& InvertResult::path() const {
    if (!unique()) throw std::logic_error("InvertResult::path: decoding is ambiguous");
    return candidates.front();
}

InvertResult invert(const CodingFunction& f, const Bits& bits) {
    if (bits.size() < 3 || bits[0] != 0 || bits[1] != 0 || bits[2] != 1)
        throw std::invalid_argument("invert: bits must begin with the block prefix 0,0,1");

    // Beam over candidate paths. A step branches only at a state s >= 2
    // whose climb target s+1 is a zero-valued exception, and the two
    // branches separate within two bits, so the beam stays tiny.
    std::vector<chain::ChainPath> beam;
    beam.push_back(chain::ChainPath{{0}});
    for (std::size_t i = 1; i < bits.size(); ++i) {
        const Bit b = bits[i];
        std::vector<chain::ChainPath> next;
        for (const chain::ChainPath& cand : beam) {
            const chain::ChainState s = cand.states.back();
            const auto try_extend = [&](chain::ChainState to) {
                if (f.apply(to) != b) return;
                chain::ChainPath grown = cand;
                grown.states.push_back(to);
                next.push_back(std::move(grown));
            };
            if (s == 0) {
                try_extend(1);
            } else if (s == 1) {
                try_extend(2);
            } else {
                try_extend(0);
                try_extend(s + 1);
            }
        }
        if (next.empty()) throw std::invalid_argument("invert: no legal path decodes these bits");
        if (next.size() > 64) throw std::logic_error("invert: beam grew beyond any plausible ambiguity bound");
        beam = std::move(next);
    }
    return InvertResult{std::move(beam)};
}

std::optional<std::int64_t> last_reset_index(const Bits& bits) {
    for (std::size_t i = bits.size(); i >= 3; --i) {
        const std::size_t t = i - 1;
        if (bits[t] == 1 && bits[t - 1] == 0 && bits[t - 2] == 0) return static_cast<std::int64_t>(t);
    }
    return std::nullopt;
}

} // namespace bitforge::coding
