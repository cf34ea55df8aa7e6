#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include "vmodal/expected.hpp"

namespace vmodal {

enum class FractionError { NotPositive, SumExceedsOne, Overflow, Underflow };

std::string_view fraction_error_name(FractionError e);

// Exact permission share q with 0 < q <= 1, always in lowest terms.
class Fraction {
public:
    // Full ownership.
    constexpr Fraction() = default;

    static Expected<Fraction, FractionError> make(std::uint64_t num, std::uint64_t den);
    static Fraction one() { return Fraction{}; }
    // 1 / 512^level, the per-word share of a level-`level` table entry.
    static Fraction entry_share(int level);

    std::uint64_t num() const noexcept { return num_; }
    std::uint64_t den() const noexcept { return den_; }
    bool is_one() const noexcept { return num_ == den_; }

    // "1" for full ownership, otherwise "n/d".
    std::string to_string() const;

    friend bool operator==(const Fraction&, const Fraction&) = default;
    friend std::strong_ordering operator<=>(const Fraction& a, const Fraction& b);

private:
    constexpr Fraction(std::uint64_t n, std::uint64_t d) : num_(n), den_(d) {}
    std::uint64_t num_ = 1;
    std::uint64_t den_ = 1;
};

// Exact sum; SumExceedsOne when a + b > 1.
Expected<Fraction, FractionError> frac_combine(Fraction a, Fraction b);

// a - b; nullopt when the difference is exactly zero, Underflow when b > a.
Expected<std::optional<Fraction>, FractionError> frac_subtract(Fraction a, Fraction b);

// q / 2.
Expected<Fraction, FractionError> frac_halve(Fraction q);

}  // namespace vmodal
