#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bitforge/chain.hpp"

namespace bitforge::coding {

using Bit = int;
using Bits = std::vector<Bit>; // alphabet {0,1}

/// State-to-bit map with a fixed part (0 and 1 emit 0, even states >= 2
/// emit 1) and a sparse exception table over the odd states >= 3, whose
/// default is 1. The exceptions are the only degrees of freedom.
class CodingFunction {
public:
    CodingFunction() = default;

    /// The all-default coding: every odd state >= 3 maps to 1.
    static CodingFunction base();

    /// Build with an exception table; keys must be odd and >= 3.
    static CodingFunction with_exceptions(const std::map<std::int64_t, Bit>& exceptions);

    Bit apply(chain::ChainState s) const;

    const std::map<std::int64_t, Bit>& exceptions() const { return exceptions_; }

    /// Largest state mapped to 0 by an exception, or -1 when none.
    std::int64_t largest_zero_exception() const;

    /// An order bound for the coded process: largest zero exception + 2,
    /// or 3 when no exception maps to 0. apply(s) = 1 for every s >= the
    /// bound, and conditioning on that many trailing bits determines the
    /// next-bit law (one fewer provably does not).
    std::int64_t order_bound() const;

    /// Add one exception (odd state >= 3). A bit equal to the default 1 is
    /// stored anyway so the table records the construction's choices.
    void set_exception(std::int64_t state, Bit bit);

    std::string to_json() const;
    static CodingFunction from_json(const std::string& text);

    bool operator==(const CodingFunction&) const = default;

private:
    std::map<std::int64_t, Bit> exceptions_;
};

Bits encode(const CodingFunction& f, const chain::ChainPath& path);

/// Result of decoding a bit block. The final states may stay ambiguous
/// when the block ends inside an unresolved lookahead window; then
/// `candidates` holds every legal reading (always at most two).
struct InvertResult {
    std::vector<chain::ChainPath> candidates;

    bool unique() const { return candidates.size() == 1; }
    const chain::ChainPath& path() const;
};

/// Invert a block that encodes some path starting at state 0 (so the bits
/// begin 0,0,1). Ambiguity at a zero-valued exception state resolves
/// within two subsequent bits; only a trailing window can stay open.
/// Throws std::invalid_argument for blocks violating the precondition or
/// encoding no legal path.
InvertResult invert(const CodingFunction& f, const Bits& bits);

/// Largest index t with bits[t-2..t] = (0,0,1), reported at the '1';
/// the pattern pins the hidden state: it occurs ending at t iff the chain
/// was in state 0 at t-2.
std::optional<std::int64_t> last_reset_index(const Bits& bits);

} // namespace bitforge::coding
