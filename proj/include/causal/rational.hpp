#pragma once

#include <cstdint>
#include <numeric>
#include <string>

namespace causal {

// Exact nonnegative rational, small enough for responsibility scores
// (numerators/denominators stay within the tuple count + 1).
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }
    static Rational zero() { return Rational(0, 1); }
    static Rational one() { return Rational(1, 1); }

    void normalize() {
        if (den < 0) { num = -num; den = -den; }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
        if (num == 0) den = 1;
    }

    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Rational& o) const { return !(*this == o); }
    bool operator<(const Rational& o) const { return num * o.den < o.num * den; }
    bool operator>(const Rational& o) const { return o < *this; }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    // "0", "1", "1/3", ...
    std::string to_string() const {
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

}  // namespace causal
