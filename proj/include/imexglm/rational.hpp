#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "imexglm/common.hpp"

namespace imexglm {

/// Exact rational scalar for order-condition certification.
///
/// int64 numerator/denominator, always normalized (gcd 1, den > 0).
/// Intermediate products are taken in __int128 and checked, which is far more
/// range than tableau coefficients and small factorials ever need.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t n) : num_(n), den_(1) {}
    Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) { normalize(); }

    static Rational from_string(const std::string& text) {
        const auto slash = text.find('/');
        try {
            if (slash == std::string::npos) {
                return Rational(parse_int(text));
            }
            return Rational(parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1)));
        } catch (const std::exception&) {
            throw ParseError("invalid rational literal '" + text + "'");
        }
    }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    bool is_zero() const { return num_ == 0; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    std::string to_string() const {
        if (den_ == 1) return std::to_string(num_);
        return std::to_string(num_) + "/" + std::to_string(den_);
    }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return make(i128(a.num_) * b.den_ + i128(b.num_) * a.den_, i128(a.den_) * b.den_);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return make(i128(a.num_) * b.den_ - i128(b.num_) * a.den_, i128(a.den_) * b.den_);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return make(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw Error("rational division by zero");
        return make(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
    }
    Rational operator-() const { return Rational(-num_, den_); }
    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }
    Rational& operator*=(const Rational& o) { return *this = *this * o; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
    }

    Rational abs() const { return num_ < 0 ? -*this : *this; }

private:
    using i128 = __int128;

    static std::int64_t parse_int(const std::string& s) {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw Error("trailing characters");
        return v;
    }

    static Rational make(i128 n, i128 d) {
        if (d == 0) throw Error("rational division by zero");
        if (d < 0) { n = -n; d = -d; }
        const i128 g = gcd128(n < 0 ? -n : n, d);
        if (g > 1) { n /= g; d /= g; }
        constexpr i128 lo = INT64_MIN, hi = INT64_MAX;
        if (n < lo || n > hi || d > hi) throw Error("rational overflow");
        Rational r;
        r.num_ = static_cast<std::int64_t>(n);
        r.den_ = static_cast<std::int64_t>(d);
        return r;
    }

    static i128 gcd128(i128 a, i128 b) {
        while (b != 0) {
            const i128 t = a % b;
            a = b;
            b = t;
        }
        return a == 0 ? 1 : a;
    }

    void normalize() { *this = make(num_, den_); }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

inline Rational pow_small(const Rational& base, int k) {
    Rational r(1);
    for (int i = 0; i < k; ++i) r *= base;
    return r;
}

}  // namespace imexglm
