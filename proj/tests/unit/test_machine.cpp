#include <doctest.h>

#include <array>
#include <set>

#include "oracle.hpp"
#include "vmodal/cases.hpp"
#include "vmodal/checker.hpp"
#include "vmodal/machine.hpp"

using namespace vmodal;

namespace {

// Tables for va 0x200000 -> pa 0x5000 built at frames 1..4.
SynthTables identity_tables() {
    const Mapping m{0x200000, 0x5000};
    return *synth_tables(std::span(&m, 1), 1);
}

oracle::FlatMemory flatten(const PhysMemory& mem) {
    oracle::FlatMemory f;
    for (const auto& [frame, words] : mem.frames()) {
        f.frames.insert(frame);
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (words[i]) f.words[frame * 4096 + i * 8] = words[i];
        }
    }
    return f;
}

}  // namespace

TEST_SUITE("machine") {

TEST_CASE("split_va") {
    CHECK(split_va(0) == VaIndices{});
    const VaIndices off = split_va(0xFFF);
    CHECK(off.l1.value() == 0);
    CHECK(off.offset.value() == 0xFFF);

    const std::uint64_t va = (1ull << 39) | (2ull << 30) | (3ull << 21) | (4ull << 12) | 5;
    const VaIndices idx = split_va(va);
    CHECK(idx.l4.value() == 1);
    CHECK(idx.l3.value() == 2);
    CHECK(idx.l2.value() == 3);
    CHECK(idx.l1.value() == 4);
    CHECK(idx.offset.value() == 5);
    CHECK(idx.index(4) == idx.l4);
    CHECK(idx.index(1) == idx.l1);

    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t v = rng();
        const VaIndices s = split_va(v);
        CHECK(s.l4.value() == oracle::slice(v, 39, 47));
        CHECK(s.l3.value() == oracle::slice(v, 30, 38));
        CHECK(s.l2.value() == oracle::slice(v, 21, 29));
        CHECK(s.l1.value() == oracle::slice(v, 12, 20));
        CHECK(s.offset.value() == oracle::slice(v, 0, 11));
    }
}

TEST_CASE("decode_pte") {
    CHECK_FALSE(decode_pte(0).present());

    const std::uint64_t fpaddr = 0x30000;
    const Pte e = decode_pte(fpaddr + 3);
    CHECK(e.present());
    CHECK(e.writable());
    CHECK(e.frame().value() == fpaddr >> 12);

    const Pte a = decode_pte(0x1000 | (1 << 5) | 1);
    CHECK(a.present());
    CHECK(a.accessed());
    CHECK_FALSE(a.writable());
    CHECK(a.frame().value() == 1);

    // Bits above the 40-bit frame field are not part of the frame.
    CHECK(decode_pte((0xFFFull << 52) | 0x7000 | 1).frame().value() == 7);
    CHECK(Pte::encode(9, true, false, true).raw.value() == (0x9000 | 1 | 32));
}

TEST_CASE("translate on synthesized tables") {
    const SynthTables t = identity_tables();
    auto pa = translate(t.root, t.mem, 0x200000);
    REQUIRE(pa);
    CHECK(*pa == PhysAddr::from_bytes(0x5000));
    CHECK(translate(t.root, t.mem, 0x200ff8)->bytes() == 0x5ff8);
    CHECK(oracle::from_vmodal(translate(t.root, t.mem, 0x200123)) ==
          oracle::naive_translate(t.root, flatten(t.mem), 0x200123));

    auto miss = translate(t.root, t.mem, 1ull << 39);
    REQUIRE_FALSE(miss);
    CHECK(miss.error().kind == FaultKind::NotPresent);
    CHECK(miss.error().level == 4);

    // The upper 16 bits are ignored.
    CHECK(translate(t.root, t.mem, 0xFFFF000000200000ull)->bytes() == 0x5000);

    auto gone = translate(0x99000, t.mem, 0x200000);
    REQUIRE_FALSE(gone);
    CHECK(gone.error().kind == FaultKind::FrameUnmapped);
    CHECK(gone.error().address == 0x99000);
}

TEST_CASE("translate sets accessed bits only on request") {
    SynthTables t = identity_tables();
    const PhysMemory before = t.mem;
    REQUIRE(translate(t.root, t.mem, 0x200000, false));
    CHECK(t.mem == before);
    REQUIRE(translate(t.root, t.mem, 0x200000, true));
    const WalkResult w = walk(t.root, t.mem, 0x200000);
    REQUIRE(w.levels.size() == 4);
    for (const WalkLevel& l : w.levels) CHECK(l.entry.accessed());
}

TEST_CASE("synth_tables frame counts") {
    auto empty = synth_tables(std::span<const Mapping>{}, 8);
    REQUIRE(empty);
    CHECK(empty->table_frames == std::vector<std::uint64_t>{8});
    CHECK(empty->mem.frames().at(8) == PhysMemory::Frame{});

    const SynthTables one = identity_tables();
    CHECK(one.table_frames.size() == 4);

    // Two va's sharing all indices above L1 share all four tables.
    const std::array<Mapping, 2> two = {Mapping{0x200000, 0x5000}, Mapping{0x201000, 0x6000}};
    auto t = synth_tables(two, 1);
    REQUIRE(t);
    std::set<std::uint64_t> touched;
    for (std::uint64_t va : {0x200000ull, 0x201000ull}) {
        const WalkResult w = walk(t->root, t->mem, va);
        for (const WalkLevel& l : w.levels) touched.insert(l.slot.frame.value());
    }
    CHECK(touched.size() == 4);
    CHECK(t->table_frames.size() == 4);

    const Mapping bad{0x200000, 0x5001};
    CHECK_FALSE(synth_tables(std::span(&bad, 1), 1));
}

TEST_CASE("single steps") {
    MachineState s;
    auto r = step(s, MovRegImm{RegId::rax, 7}, {});
    REQUIRE(r);
    CHECK(r->reg(RegId::rax) == 7);
    CHECK(r->pc == 1);

    r = step(*r, AddRegImm{RegId::rax, ~std::uint64_t{0}}, {});
    CHECK(r->reg(RegId::rax) == 6);

    SynthTables t = identity_tables();
    s.mem = t.mem;
    s.set_reg(RegId::cr3, t.root);
    s.set_reg(RegId::rdi, 0x200000);
    s.set_reg(RegId::rsp, 0xabc);
    auto w = step(s, MovMemFromReg{RegId::rdi, 8, RegId::rsp}, {});
    REQUIRE(w);
    CHECK(*w->mem.peek(translate(t.root, t.mem, 0x200008)->bytes()) == 0xabc);

    auto back = step(*w, MovRegFromMem{RegId::rax, RegId::rdi, 8}, {});
    CHECK(back->reg(RegId::rax) == 0xabc);

    auto cr3 = step(s, MovMemFromCr3{RegId::rdi, 56}, {});
    CHECK(*cr3->mem.peek(0x5038) == t.root);

    s.set_reg(RegId::rdi, 0x200004);
    auto mis = step(s, MovRegFromMem{RegId::rax, RegId::rdi, 0}, {});
    REQUIRE_FALSE(mis);
    CHECK(mis.error().kind == FaultKind::Misaligned);
}

TEST_CASE("unmapped reads name the missing level") {
    const SynthTables base = identity_tables();
    const WalkResult full = walk(base.root, base.mem, 0x200000);
    for (int k = 4; k >= 1; --k) {
        MachineState s;
        s.mem = base.mem;
        s.set_reg(RegId::cr3, base.root);
        s.set_reg(RegId::rsi, 0x200000);
        const WalkLevel& l = full.levels[4 - k];
        s.mem.write(l.slot, 0);
        auto r = step(s, MovRegFromMem{RegId::rax, RegId::rsi, 0}, {});
        REQUIRE_FALSE(r);
        CHECK(r.error().kind == FaultKind::NotPresent);
        CHECK(r.error().level == k);
    }
}

TEST_CASE("read-only entries") {
    const Mapping m{0x200000, 0x5000, false};
    auto t = synth_tables(std::span(&m, 1), 1);
    MachineState s;
    s.mem = t->mem;
    s.set_reg(RegId::cr3, t->root);
    s.set_reg(RegId::rdi, 0x200000);
    auto r = step(s, MovMemFromReg{RegId::rdi, 0, RegId::rax}, {});
    REQUIRE_FALSE(r);
    CHECK(r.error().kind == FaultKind::ReadOnly);
    CHECK(r.error().level == 1);
    CHECK(step(s, MovMemFromReg{RegId::rdi, 0, RegId::rax}, StepOptions{false, true}));
}

TEST_CASE("faulting steps leave the state alone") {
    MachineState s;
    s.set_reg(RegId::rdi, 0x200000);
    MachineState copy = s;
    CHECK_FALSE(apply(copy, MovRegFromMem{RegId::rax, RegId::rdi, 0}, {}));
    CHECK(copy == s);
}

TEST_CASE("run") {
    MachineState s;
    auto same = run(s, {}, {});
    REQUIRE(same);
    CHECK(*same == s);

    const std::array<Instr, 2> prog = {MovRegImm{RegId::rax, 1}, MovRegReg{RegId::rbx, RegId::rax}};
    auto r = run(s, prog, {});
    CHECK(r->reg(RegId::rbx) == 1);

    MachineState past = s;
    past.pc = 5;
    auto oob = run(past, prog, {});
    REQUIRE_FALSE(oob);
    CHECK(oob.error().fault.kind == FaultKind::PcOutOfRange);
}

TEST_CASE("swtch listing runs to the new root") {
    const CaseStudy c = *case_study("swtch");
    const std::vector<Instr> prog = instructions_of(c.script);
    auto r = run(c.fixture.state, prog, {});
    REQUIRE(r);
    CHECK(r->cr3() == layout::kOtherRoot);
    const std::array<RegId, 7> saved = {RegId::rbx, RegId::rsp, RegId::rbp, RegId::r12,
                                        RegId::r13, RegId::r14, RegId::r15};
    for (std::size_t i = 0; i < saved.size(); ++i) {
        const std::uint64_t load = translate(layout::kRoot, c.fixture.state.mem, layout::kLoadBlock + 8 * i)->bytes();
        const std::uint64_t save = translate(layout::kRoot, c.fixture.state.mem, layout::kSaveBlock + 8 * i)->bytes();
        CHECK(r->reg(saved[i]) == *c.fixture.state.mem.peek(load));
        CHECK(*r->mem.peek(save) == c.fixture.state.reg(saved[i]));
    }
}

}  // TEST_SUITE
