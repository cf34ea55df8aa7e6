#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vmodal {

// An unsigned machine word of a fixed bit width. Values always satisfy
// value < 2^Bits; narrowing must go through truncate() or checked().
template <unsigned Bits>
class Word {
    static_assert(Bits > 0 && Bits <= 64);

public:
    static constexpr unsigned width = Bits;
    static constexpr std::uint64_t mask =
        Bits == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << Bits) - 1);

    constexpr Word() = default;

    static constexpr Word truncate(std::uint64_t v) noexcept { return Word(v & mask, Tag{}); }

    static Word checked(std::uint64_t v) {
        if ((v & ~mask) != 0) {
            throw std::out_of_range("value does not fit in " + std::to_string(Bits) + "-bit word");
        }
        return Word(v, Tag{});
    }

    constexpr std::uint64_t value() const noexcept { return value_; }

    template <unsigned Wider>
    constexpr Word<Wider> widen() const noexcept {
        static_assert(Wider >= Bits);
        return Word<Wider>::truncate(value_);
    }

    friend constexpr bool operator==(Word, Word) = default;
    friend constexpr auto operator<=>(Word, Word) = default;

private:
    struct Tag {};
    constexpr Word(std::uint64_t v, Tag) : value_(v) {}
    std::uint64_t value_ = 0;
};

using W64 = Word<64>;
using W52 = Word<52>;
using W12 = Word<12>;
using W9 = Word<9>;

}  // namespace vmodal
