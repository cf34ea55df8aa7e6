#include "vmodal/checker.hpp"
#include "vmodal/format.hpp"

namespace vmodal {

namespace {

Expected<Assertion, std::string> clobber(const StubEnv& env, RegId r) {
    auto v = env.reg(r);
    if (!v) return unexpected(std::string(reg_name(r)) + " is not owned by the caller");
    return reg_pt(r, *v);
}

// rdi = va. Returns in rax a virtual address through which the L1 entry for
// va can be written, with full ownership of that entry and, for the L4..L2
// entries above it, enough share to map every word of the page.
StubSpec ensure_l1_page() {
    StubSpec s;
    s.name = "ensure_L1_page";
    s.consumes = [](const StubEnv& env) { return clobber(env, RegId::rax); };
    s.effect = [](StubEnv& env) -> Expected<Assertion, std::string> {
        auto va = env.reg(RegId::rdi);
        if (!va) return unexpected(std::string("rdi is not owned by the caller"));
        WalkResult w = walk(env.root, env.machine.mem, *va);
        if (w.levels.size() != 4) {
            return unexpected("no L1 table for " + hex(*va) + (w.fault ? ": " + w.fault->describe() : std::string()));
        }
        const std::uint64_t slot = w.levels[3].slot.bytes();
        const WalkMap* theta = env.registry.find(env.root);
        std::optional<std::uint64_t> pte_addr;
        if (theta != nullptr) {
            for (const auto& [v, pa] : *theta) {
                if (pa == slot) {
                    pte_addr = v;
                    break;
                }
            }
        }
        if (!pte_addr) return unexpected("the L1 entry at " + hex(slot) + " has no virtual mapping");
        env.machine.set_reg(RegId::rax, *pte_addr);
        std::vector<Assertion> parts;
        parts.push_back(reg_pt(RegId::rax, *pte_addr));
        parts.push_back(pte_pt(*pte_addr, slot, w.levels[3].entry.raw.value()));
        for (int i = 0; i < 3; ++i) {
            const int level = 4 - i;
            const std::uint64_t e = w.levels[i].entry.raw.value();
            parts.push_back(phys_pt(w.levels[i].slot.bytes(), e, Fraction::entry_share(level - 1)));
            parts.push_back(pure(PredKind::Present, {e}));
        }
        return sep(std::move(parts));
    };
    return s;
}

// Takes the next frame of the free list, zeroes it, and returns its address
// tagged present|writable in rax.
StubSpec alloc_phys_page() {
    StubSpec s;
    s.name = "alloc_phys_page_or_panic";
    s.consumes = [](const StubEnv& env) { return clobber(env, RegId::rax); };
    s.effect = [](StubEnv& env) -> Expected<Assertion, std::string> {
        if (env.free_frames.empty()) return unexpected(std::string("panic: free list exhausted"));
        const std::uint64_t frame = env.free_frames.front();
        env.free_frames.pop_front();
        env.machine.mem.remove_frame(frame);
        env.machine.mem.add_frame(frame);
        const std::uint64_t fpaddr = frame << 12;
        const std::uint64_t entry = fpaddr | pte_bits::present | pte_bits::writable;
        env.machine.set_reg(RegId::rax, entry);
        return sep({reg_pt(RegId::rax, entry), phys_pt(fpaddr, 0), pure(PredKind::PageAligned, {fpaddr}),
                    pure(PredKind::Present, {entry})});
    };
    return s;
}

// As alloc_phys_page_or_panic, handing back every word of the page.
StubSpec alloc_zeroed_page() {
    StubSpec s = alloc_phys_page();
    s.name = "alloc_zeroed_page";
    s.effect = [inner = s.effect](StubEnv& env) -> Expected<Assertion, std::string> {
        auto post = inner(env);
        if (!post) return post;
        const std::uint64_t fpaddr = env.machine.reg(RegId::rax) & ~std::uint64_t{0xFFF};
        std::vector<Assertion> parts{*post};
        for (std::uint64_t off = 8; off < kPageSize; off += 8) parts.push_back(phys_pt(fpaddr + off, 0));
        return sep(std::move(parts));
    };
    return s;
}

}  // namespace

StubTable builtin_stubs() {
    StubTable t;
    for (StubSpec s : {ensure_l1_page(), alloc_phys_page(), alloc_zeroed_page()}) t.emplace(s.name, s);
    return t;
}

}  // namespace vmodal
