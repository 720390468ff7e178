#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace bitforge {

/// Exact dyadic rational mantissa * 2^-exponent with a 64-bit mantissa.
/// Every path probability in the hitting-time enumeration is a power of
/// 1/2, so sums of them stay representable; overflow throws instead of
/// silently losing mass.
struct Dyadic {
    std::uint64_t mantissa = 0;
    int exponent = 0; // value = mantissa * 2^-exponent, exponent >= 0

    static Dyadic zero() { return {0, 0}; }
    static Dyadic one() { return {1, 0}; }
    static Dyadic pow2(int e) {
        if (e < 0 || e > 1023) throw std::invalid_argument("Dyadic::pow2: exponent out of range");
        return {1, e};
    }

    void normalize() {
        if (mantissa == 0) {
            exponent = 0;
            return;
        }
        while ((mantissa & 1u) == 0 && exponent > 0) {
            mantissa >>= 1;
            --exponent;
        }
    }

    Dyadic& operator+=(const Dyadic& o) {
        if (o.mantissa == 0) return *this;
        if (mantissa == 0) {
            *this = o;
            return *this;
        }
        int e = std::max(exponent, o.exponent);
        int sa = e - exponent, sb = e - o.exponent;
        if (sa >= 64 || (std::countl_zero(mantissa) < sa)) throw std::overflow_error("Dyadic add overflow");
        if (sb >= 64 || (std::countl_zero(o.mantissa) < sb)) throw std::overflow_error("Dyadic add overflow");
        std::uint64_t a = mantissa << sa, b = o.mantissa << sb;
        if (a > UINT64_MAX - b) throw std::overflow_error("Dyadic add overflow");
        mantissa = a + b;
        exponent = e;
        normalize();
        return *this;
    }

    Dyadic operator+(const Dyadic& o) const {
        Dyadic r = *this;
        r += o;
        return r;
    }

    /// this - o; requires this >= o.
    Dyadic operator-(const Dyadic& o) const {
        int e = std::max(exponent, o.exponent);
        int sa = e - exponent, sb = e - o.exponent;
        if ((mantissa != 0 && (sa >= 64 || std::countl_zero(mantissa) < sa)) ||
            (o.mantissa != 0 && (sb >= 64 || std::countl_zero(o.mantissa) < sb)))
            throw std::overflow_error("Dyadic sub overflow");
        std::uint64_t a = mantissa << sa, b = o.mantissa << sb;
        if (a < b) throw std::underflow_error("Dyadic sub: negative result");
        Dyadic r{a - b, e};
        r.normalize();
        return r;
    }

    /// Multiply by 2^-k.
    Dyadic shifted(int k) const {
        Dyadic r = *this;
        if (r.mantissa != 0) r.exponent += k;
        return r;
    }

    bool operator==(const Dyadic& o) const {
        Dyadic a = *this, b = o;
        a.normalize();
        b.normalize();
        return a.mantissa == b.mantissa && a.exponent == b.exponent;
    }

    bool operator<(const Dyadic& o) const {
        int e = std::max(exponent, o.exponent);
        int sa = e - exponent, sb = e - o.exponent;
        if (sa < 64 && sb < 64) {
            unsigned __int128 x = static_cast<unsigned __int128>(mantissa) << sa;
            unsigned __int128 y = static_cast<unsigned __int128>(o.mantissa) << sb;
            return x < y;
        }
        // Magnitudes differ by >= 2^64: float comparison cannot tie.
        return to_double() < o.to_double();
    }

    double to_double() const { return std::ldexp(static_cast<double>(mantissa), -exponent); }
};

} // namespace bitforge
