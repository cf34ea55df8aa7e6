#include "vmodal/machine.hpp"

namespace vmodal {

WalkResult walk(std::uint64_t root, const PhysMemory& mem, std::uint64_t va) {
    WalkResult result;
    const VaIndices idx = split_va(va);
    W52 table = W52::truncate(root >> 12);
    for (int level = 4; level >= 1; --level) {
        const PhysAddr slot{table, W12::truncate(idx.index(level).value() * 8)};
        auto raw = mem.read(slot);
        if (!raw) {
            result.fault = raw.error();
            return result;
        }
        const Pte entry = decode_pte(*raw);
        result.levels.push_back({level, slot, entry});
        if (!entry.present()) {
            result.fault = Fault{FaultKind::NotPresent, level, va};
            return result;
        }
        table = entry.frame();
    }
    result.target = PhysAddr{table, idx.offset};
    return result;
}

Expected<PhysAddr, Fault> translate(std::uint64_t root, const PhysMemory& mem, std::uint64_t va) {
    WalkResult w = walk(root, mem, va);
    if (w.fault) return unexpected(*w.fault);
    return *w.target;
}

Expected<PhysAddr, Fault> translate(std::uint64_t root, PhysMemory& mem, std::uint64_t va, bool set_accessed) {
    WalkResult w = walk(root, mem, va);
    if (w.fault) return unexpected(*w.fault);
    if (set_accessed) {
        for (const WalkLevel& l : w.levels) {
            mem.write(l.slot, l.entry.raw.value() | pte_bits::accessed);
        }
    }
    return *w.target;
}

}  // namespace vmodal
