#include <doctest.h>

#include "vmodal/ledger.hpp"

using namespace vmodal;

namespace {
Fraction f(std::uint64_t n, std::uint64_t d) { return *Fraction::make(n, d); }
const Location kRax = Location::reg(RegId::rax);
}  // namespace

TEST_SUITE("ledger") {

TEST_CASE("join") {
    ResourceLedger a;
    REQUIRE(a.add(kRax, {f(1, 2), 7}));
    CHECK(*ledger_join(a, ResourceLedger{}) == a);

    auto both = ledger_join(a, a);
    REQUIRE(both);
    CHECK(both->find(kRax) == Claim{Fraction::one(), 7});

    ResourceLedger b;
    REQUIRE(b.add(kRax, {f(1, 2), 8}));
    CHECK(ledger_join(a, b).error().kind == LedgerErrorKind::ValueDisagreement);

    CHECK(ledger_join(*both, a).error().kind == LedgerErrorKind::SumExceedsOne);
    CHECK(ledger_join(ResourceLedger{1}, ResourceLedger{2}).error().kind == LedgerErrorKind::RootMismatch);
}

TEST_CASE("require, take and update") {
    ResourceLedger l;
    REQUIRE(l.add(kRax, {f(1, 2), 7}));
    CHECK(l.require(kRax, f(1, 4)));
    CHECK(l.require(kRax, Fraction::one()).error().kind == LedgerErrorKind::InsufficientFraction);
    CHECK(l.require(Location::reg(RegId::rbx), f(1, 4)).error().kind == LedgerErrorKind::MissingResource);
    CHECK(l.update(kRax, 9).error().kind == LedgerErrorKind::InsufficientFraction);
    REQUIRE(l.add(kRax, {f(1, 2), 7}));
    REQUIRE(l.update(kRax, 9));
    CHECK(l.find(kRax)->value == 9);
    REQUIRE(l.take(kRax, f(1, 4)));
    CHECK(l.find(kRax)->q == f(3, 4));
    REQUIRE(l.take(kRax, f(3, 4)));
    CHECK(l.empty());
}

TEST_CASE("includes and subtract") {
    ResourceLedger big;
    REQUIRE(big.add(kRax, {Fraction::one(), 7}));
    REQUIRE(big.add(Location::phys(0x1000), {Fraction::one(), 3}));
    ResourceLedger small;
    REQUIRE(small.add(kRax, {f(1, 2), 7}));
    CHECK(big.includes(small));
    CHECK_FALSE(small.includes(big));
    auto rest = big.subtract(small);
    REQUIRE(rest);
    CHECK(rest->find(kRax)->q == f(1, 2));
    CHECK(rest->find(Location::phys(0x1000)));

    ResourceLedger wrong;
    REQUIRE(wrong.add(kRax, {f(1, 2), 8}));
    CHECK(big.includes(wrong).error().kind == LedgerErrorKind::ValueDisagreement);
}

TEST_CASE("512 shares of an entry make a whole") {
    ResourceLedger l;
    const Location slot = Location::phys(0x13000);
    for (int i = 0; i < 512; ++i) REQUIRE(l.add(slot, {Fraction::entry_share(1), 0x30003}));
    CHECK(l.find(slot)->q.is_one());
    CHECK(l.add(slot, {Fraction::entry_share(1), 0x30003}).error().kind == LedgerErrorKind::SumExceedsOne);
}

TEST_CASE("locations") {
    CHECK(Location::reg(RegId::rax).is_fact());
    CHECK(Location::phys(8).is_fact());
    CHECK_FALSE(Location::walk(0x1000, 0x2000).is_fact());
    CHECK(Location::walk(0x1000, 0x2000).root() == 0x1000u);
    CHECK(Location::space(0x1000).describe() == "iaspace@0x1000");
}

}  // TEST_SUITE
