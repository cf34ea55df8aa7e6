#include "vmodal/fraction.hpp"

#include <numeric>

namespace vmodal {

namespace {

__extension__ typedef unsigned __int128 u128;

u128 gcd128(u128 a, u128 b) {
    while (b != 0) {
        u128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

constexpr u128 kMax64 = ~std::uint64_t{0};

}  // namespace

std::string_view fraction_error_name(FractionError e) {
    switch (e) {
        case FractionError::NotPositive: return "NotPositive";
        case FractionError::SumExceedsOne: return "SumExceedsOne";
        case FractionError::Overflow: return "Overflow";
        case FractionError::Underflow: return "Underflow";
    }
    return "?";
}

Expected<Fraction, FractionError> Fraction::make(std::uint64_t num, std::uint64_t den) {
    if (num == 0 || den == 0) return unexpected(FractionError::NotPositive);
    if (num > den) return unexpected(FractionError::SumExceedsOne);
    const std::uint64_t g = std::gcd(num, den);
    return Fraction{num / g, den / g};
}

Fraction Fraction::entry_share(int level) {
    std::uint64_t den = 1;
    for (int i = 0; i < level; ++i) den *= 512;
    return Fraction{1, den};
}

std::string Fraction::to_string() const {
    if (is_one()) return "1";
    return std::to_string(num_) + "/" + std::to_string(den_);
}

std::strong_ordering operator<=>(const Fraction& a, const Fraction& b) {
    const u128 lhs = static_cast<u128>(a.num_) * b.den_;
    const u128 rhs = static_cast<u128>(b.num_) * a.den_;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

Expected<Fraction, FractionError> frac_combine(Fraction a, Fraction b) {
    const u128 den = static_cast<u128>(a.den()) * b.den();
    const u128 num = static_cast<u128>(a.num()) * b.den() + static_cast<u128>(b.num()) * a.den();
    if (num > den) return unexpected(FractionError::SumExceedsOne);
    const u128 g = gcd128(num, den);
    const u128 n = num / g;
    const u128 d = den / g;
    if (d > kMax64) return unexpected(FractionError::Overflow);
    return Fraction::make(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(d));
}

Expected<std::optional<Fraction>, FractionError> frac_subtract(Fraction a, Fraction b) {
    const u128 den = static_cast<u128>(a.den()) * b.den();
    const u128 lhs = static_cast<u128>(a.num()) * b.den();
    const u128 rhs = static_cast<u128>(b.num()) * a.den();
    if (rhs > lhs) return unexpected(FractionError::Underflow);
    if (rhs == lhs) return std::optional<Fraction>{};
    const u128 num = lhs - rhs;
    const u128 g = gcd128(num, den);
    if (den / g > kMax64) return unexpected(FractionError::Overflow);
    auto f = Fraction::make(static_cast<std::uint64_t>(num / g), static_cast<std::uint64_t>(den / g));
    if (!f) return unexpected(f.error());
    return std::optional<Fraction>{*f};
}

Expected<Fraction, FractionError> frac_halve(Fraction q) {
    if (q.num() % 2 == 0) return Fraction::make(q.num() / 2, q.den());
    if (q.den() > (~std::uint64_t{0}) / 2) return unexpected(FractionError::Overflow);
    return Fraction::make(q.num(), q.den() * 2);
}

}  // namespace vmodal
