#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>

#include "psm/error.hpp"

namespace psm {

/// Exact rational number on int64. Used wherever the contracts demand
/// drift-free arithmetic: the viral prior rho, the key-user fraction phi,
/// and the prima-facie comparison p_{m|u} > rho.
class Rational {
  public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
        if (den_ == 0) throw ParamError("rational with zero denominator");
        normalize();
    }

    static Rational from_int(std::int64_t v) { return Rational(v, 1); }

    /// Parses "0.25", "1/4" or "1" into an exact rational.
    static Rational parse(std::string_view text) {
        if (text.empty()) throw ParamError("empty rational literal");
        const auto slash = text.find('/');
        if (slash != std::string_view::npos) {
            const std::int64_t p = parse_int(text.substr(0, slash));
            const std::int64_t q = parse_int(text.substr(slash + 1));
            return Rational(p, q);
        }
        const auto dot = text.find('.');
        if (dot == std::string_view::npos) return from_int(parse_int(text));
        const std::string_view whole = text.substr(0, dot);
        const std::string_view frac = text.substr(dot + 1);
        if (frac.size() > 18) throw ParamError("rational literal has too many digits: " + std::string(text));
        bool neg = !whole.empty() && whole.front() == '-';
        std::int64_t w = whole.empty() || whole == "-" ? 0 : parse_int(whole);
        if (neg) w = -w;
        std::int64_t den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        const std::int64_t f = frac.empty() ? 0 : parse_int(frac);
        std::int64_t num = w * den + f;
        if (neg) num = -num;
        return Rational(num, den);
    }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    std::string str() const { return std::to_string(num_) + "/" + std::to_string(den_); }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
    }
    friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

  private:
    static std::int64_t parse_int(std::string_view s) {
        if (s.empty()) throw ParamError("empty integer literal");
        std::size_t i = 0;
        bool neg = false;
        if (s[0] == '+' || s[0] == '-') {
            neg = s[0] == '-';
            i = 1;
            if (s.size() == 1) throw ParamError("bad integer literal: " + std::string(s));
        }
        std::int64_t v = 0;
        for (; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9') throw ParamError("bad integer literal: " + std::string(s));
            v = v * 10 + (s[i] - '0');
        }
        return neg ? -v : v;
    }

    void normalize() {
        if (den_ < 0) {
            num_ = -num_;
            den_ = -den_;
        }
        const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

/// a*b <= c exactly, for the key-user predicate n*phi <= successors.
inline bool rational_times_le(const Rational& phi, std::int64_t n, std::int64_t bound) {
    return static_cast<__int128>(phi.num()) * n <= static_cast<__int128>(bound) * phi.den();
}

}  // namespace psm
