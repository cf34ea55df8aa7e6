#include <map>
#include <set>

#include "vmodal/format.hpp"
#include "vmodal/machine.hpp"

namespace vmodal {

Expected<SynthTables, std::string> synth_tables(std::span<const Mapping> mappings, std::uint64_t alloc_base) {
    SynthTables out;
    // Every table frame must be encodable in an entry.
    if ((alloc_base + 1 + 3 * mappings.size()) >> 40) return unexpected(std::string("table frames exceed 40 bits"));
    std::uint64_t next = alloc_base;
    auto alloc = [&]() {
        const std::uint64_t f = next++;
        out.mem.add_frame(f);
        out.table_frames.push_back(f);
        return f;
    };
    out.root = alloc() << 12;

    std::map<std::uint64_t, std::pair<std::uint64_t, bool>> pages;  // va page -> (pa, writable)
    for (const Mapping& m : mappings) {
        if (!page_aligned(m.pa)) return unexpected("physical page " + hex(m.pa) + " is not 4K-aligned");
        if ((m.pa >> 12) >> 40) return unexpected("physical page " + hex(m.pa) + " does not fit a 40-bit frame");
        const std::uint64_t vpage = m.va & ~0xFFFull & ((1ull << 48) - 1);
        auto [it, inserted] = pages.try_emplace(vpage, m.pa, m.writable);
        if (!inserted) {
            if (it->second != std::pair{m.pa, m.writable}) {
                return unexpected("inconsistent duplicate mapping for va page " + hex(vpage));
            }
            continue;
        }

        const VaIndices idx = split_va(m.va);
        std::uint64_t table = out.root >> 12;
        for (int level = 4; level >= 2; --level) {
            const PhysAddr slot{W52::truncate(table), W12::truncate(idx.index(level).value() * 8)};
            const Pte e = decode_pte(*out.mem.read(slot));
            if (e.present()) {
                table = e.frame().value();
            } else {
                const std::uint64_t f = alloc();
                out.mem.write(slot, Pte::encode(f, true, true).raw.value());
                table = f;
            }
        }
        const PhysAddr leaf{W52::truncate(table), W12::truncate(idx.l1.value() * 8)};
        out.mem.write(leaf, Pte::encode(m.pa >> 12, true, m.writable).raw.value());
    }

    const std::set<std::uint64_t> tables(out.table_frames.begin(), out.table_frames.end());
    for (const auto& [vpage, target] : pages) {
        const std::uint64_t frame = target.first >> 12;
        if (tables.contains(frame)) {
            return unexpected("data page " + hex(target.first) + " overlaps an allocated table frame");
        }
        out.mem.add_frame(frame);
    }
    return out;
}

}  // namespace vmodal
