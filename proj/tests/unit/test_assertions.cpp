#include <doctest.h>

#include "gen.hpp"
#include "vmodal/cases.hpp"
#include "vmodal/ledger.hpp"
#include "vmodal/sat.hpp"

using namespace vmodal;

namespace {
constexpr std::uint64_t kR = 0x40000;
}

TEST_SUITE("assertions") {

TEST_CASE("is_fact") {
    CHECK(is_fact(reg_pt(RegId::rax, 5)));
    CHECK(is_fact(phys_pt(0x1000, 5)));
    CHECK(is_fact(pure(PredKind::Eq, {1, 1})));
    CHECK_FALSE(is_fact(virt_pt(0x200000, 0)));
    CHECK_FALSE(is_fact(ia_space()));
    CHECK(is_fact(other_space(kR, virt_pt(0x200000, 0))));
    CHECK_FALSE(is_fact(sep({reg_pt(RegId::rax, 5), virt_pt(0x200000, 0)})));
}

TEST_CASE("normalize") {
    const Assertion p = virt_pt(0x200000, 1);
    const Assertion q = ia_space();
    CHECK(normalize(other_space(kR, sep({p, q}))) == sep({other_space(kR, p), other_space(kR, q)}));
    CHECK(normalize(other_space(kR, emp())) == emp());
    CHECK(normalize(other_space(kR, conj({p, q}))) == conj({other_space(kR, p), other_space(kR, q)}));
    CHECK(normalize(other_space(kR, disj({p, q}))) == disj({other_space(kR, p), other_space(kR, q)}));
    CHECK(normalize(other_space(kR, reg_pt(RegId::rax, 5))) == reg_pt(RegId::rax, 5));
    CHECK(normalize(sep({emp(), sep({p, emp()}), q})) == sep({p, q}));
    // The innermost modality governs.
    CHECK(normalize(other_space(kR, other_space(0x50000, p))) == other_space(0x50000, p));
}

TEST_CASE("equality is up to separating-conjunct order") {
    const Assertion a = sep({reg_pt(RegId::rax, 1), reg_pt(RegId::rbx, 2)});
    const Assertion b = sep({reg_pt(RegId::rbx, 2), reg_pt(RegId::rax, 1)});
    CHECK(a == b);
    CHECK_FALSE(a == sep({reg_pt(RegId::rbx, 2), reg_pt(RegId::rax, 3)}));
}

TEST_CASE("machine_sat") {
    const gen::World w = gen::make_world();
    const MachineState& s = w.config.state;
    const Registry& reg = w.config.registry;
    const std::uint64_t ra = w.roots[0];
    const std::uint64_t rb = w.roots[1];

    CHECK(machine_sat(emp(), ra, s, reg));
    CHECK(machine_sat(reg_pt(RegId::rax, 5), ra, s, reg));
    CHECK_FALSE(machine_sat(reg_pt(RegId::rax, 4), ra, s, reg));
    CHECK(machine_sat(phys_pt(0x50008, 9), ra, s, reg));
    CHECK(machine_sat(virt_pt(0x200008, 9), ra, s, reg));
    CHECK(machine_sat(virt_pt(0x200008, 10), rb, s, reg));
    CHECK_FALSE(machine_sat(virt_pt(0x200008, 9), rb, s, reg));
    CHECK(machine_sat(other_space(ra, virt_pt(0x200008, 9)), rb, s, reg));
    CHECK(machine_sat(ia_space(), ra, s, reg));
    CHECK(machine_sat(ia_space(), w.roots[2], s, reg));
    CHECK(machine_sat(disj({reg_pt(RegId::rax, 4), reg_pt(RegId::rax, 5)}), ra, s, reg));
    CHECK_FALSE(machine_sat(conj({reg_pt(RegId::rax, 4), reg_pt(RegId::rax, 5)}), ra, s, reg));
    CHECK(machine_sat(pte_pt(0x200008, 0x50008, 9), ra, s, reg));
    CHECK_FALSE(machine_sat(pte_pt(0x200008, 0x50010, 9), ra, s, reg));
    CHECK(machine_sat(pure(PredKind::Unmapped, {ra, 0x300000}), ra, s, reg));
    CHECK_FALSE(machine_sat(pure(PredKind::Unmapped, {ra, 0x200000}), ra, s, reg));

    auto ev = walk_evidence(ra, s.mem, 0x200000);
    REQUIRE(ev);
    CHECK(machine_sat(*ev, ra, s, reg));
    CHECK_FALSE(machine_sat(*ev, rb, s, reg));
}

TEST_CASE("machine_sat names the cleared level") {
    gen::World w = gen::make_world();
    MachineState& s = w.config.state;
    const std::uint64_t ra = w.roots[0];
    const WalkResult full = walk(ra, s.mem, 0x200000);
    s.mem.write(full.levels[2].slot, full.levels[2].entry.raw.value() & ~pte_bits::present);
    auto r = machine_sat(virt_pt(0x200000, 1), ra, s, w.config.registry);
    REQUIRE_FALSE(r);
    REQUIRE(r.error().fault);
    CHECK(r.error().fault->kind == FaultKind::NotPresent);
    CHECK(r.error().fault->level == 2);
    CHECK_FALSE(machine_sat(ia_space(), ra, s, w.config.registry));
}

TEST_CASE("machine_sat after map_new_page") {
    const CaseStudy c = *case_study("map_new_page");
    const Report r = check_double(c.pre, c.root, c.script, c.stubs, c.setup(), c.expected_post);
    REQUIRE(r.ok());
    CHECK(machine_sat(virt_pt(layout::kMapVa, 0), c.root, r.ctx.machine, r.ctx.registry));
    CHECK(machine_sat(ia_space(), c.root, r.ctx.machine, r.ctx.registry));
}

TEST_CASE("lowering laws") {
    const gen::World w = gen::make_world();
    const Registry& reg = w.config.registry;
    const std::uint64_t r0 = w.roots[0];
    const std::uint64_t r1 = w.roots[1];

    CHECK(*lower(other_space(r1, reg_pt(RegId::rax, 5)), r0, reg) == *lower(reg_pt(RegId::rax, 5), r0, reg));

    const Assertion p = virt_pt(0x200000, 1);
    const Assertion q = virt_pt(0x200008, 9);
    auto whole = lower(other_space(r1, sep({p, q})), r0, reg);
    auto parts = ledger_join(*lower(other_space(r1, p), r0, reg), *lower(other_space(r1, q), r0, reg));
    REQUIRE(whole);
    REQUIRE(parts);
    CHECK(*whole == *parts);

    const Fraction half = *Fraction::make(1, 2);
    auto l = lower(virt_pt(0x200000, 1, half), r0, reg);
    REQUIRE(l);
    auto walk_claim = l->find(Location::walk(r0, 0x200000));
    REQUIRE(walk_claim);
    CHECK(walk_claim->q == half);
    CHECK(walk_claim->value == 0x50000);
    CHECK(l->find(Location::phys(0x50000))->q == half);
    CHECK(machine_sat(virt_pt(0x200000, 1, half), r0, w.config.state, reg));

    auto moved = lower(other_space(r1, p), r0, reg);
    CHECK(moved->find(Location::walk(r1, 0x200000))->value == 0x60000);
}

TEST_CASE("lowering rejects what it cannot hold") {
    const gen::World w = gen::make_world();
    const Registry& reg = w.config.registry;
    const std::uint64_t r0 = w.roots[0];
    CHECK(lower(disj({emp(), emp()}), r0, reg).error().kind == LedgerErrorKind::NotLowerable);
    CHECK(lower(reg_pt(RegId::cr3, r0), r0, reg).error().kind == LedgerErrorKind::BadRegister);
    CHECK(lower(pure(PredKind::Eq, {1, 2}), r0, reg).error().kind == LedgerErrorKind::PureFalse);
    CHECK(lower(virt_pt(0x999000, 0), r0, reg).error().kind == LedgerErrorKind::UnresolvedWitness);
    CHECK(lower(ia_space(), 0x777000, reg).error().kind == LedgerErrorKind::UnknownRoot);
    CHECK(lower(token(0x200000, 0x50008), r0, reg).error().kind == LedgerErrorKind::EvidenceInvalid);
    CHECK(lower(sep({virt_pt(0x200000, 1), virt_pt(0x200000, 1)}), r0, reg).error().kind ==
          LedgerErrorKind::SumExceedsOne);
}

TEST_CASE("render reproduces the lowered assertion") {
    const gen::World w = gen::make_world();
    const Registry& reg = w.config.registry;
    const std::uint64_t r0 = w.roots[0];
    const Assertion a = sep({virt_pt(0x200000, 1), reg_pt(RegId::rax, 5), ia_space(),
                             other_space(w.roots[1], sep({virt_pt(0x200008, 10), ia_space()}))});
    auto l = lower(a, r0, reg);
    REQUIRE(l);
    CHECK(render(*l) == a);
    CHECK(*lower(render(*l), r0, reg) == *l);
}

}  // TEST_SUITE
