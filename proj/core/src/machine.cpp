#include "vmodal/machine.hpp"

#include <algorithm>

#include "vmodal/format.hpp"

namespace vmodal {

namespace {

constexpr std::array<std::string_view, kRegCount> kRegNames = {
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp", "r8",
    "r9",  "r10", "r11", "r12", "r13", "r14", "r15", "cr3",
};

}  // namespace

std::string_view reg_name(RegId r) { return kRegNames[reg_index(r)]; }

std::optional<RegId> parse_reg(std::string_view name) {
    auto it = std::find(kRegNames.begin(), kRegNames.end(), name);
    if (it == kRegNames.end()) return std::nullopt;
    return static_cast<RegId>(it - kRegNames.begin());
}

W9 VaIndices::index(int level) const noexcept {
    switch (level) {
        case 4: return l4;
        case 3: return l3;
        case 2: return l2;
        default: return l1;
    }
}

VaIndices split_va(std::uint64_t va) noexcept {
    return {
        W9::truncate(va >> 39),
        W9::truncate(va >> 30),
        W9::truncate(va >> 21),
        W9::truncate(va >> 12),
        W12::truncate(va),
    };
}

Pte Pte::encode(std::uint64_t frame, bool present, bool writable, bool accessed) {
    if (frame >= (1ull << 40)) throw std::out_of_range("page-table entry frame exceeds 40 bits");
    std::uint64_t raw = frame << 12;
    if (present) raw |= pte_bits::present;
    if (writable) raw |= pte_bits::writable;
    if (accessed) raw |= pte_bits::accessed;
    return Pte{W64::truncate(raw)};
}

Pte decode_pte(std::uint64_t e) noexcept { return Pte{W64::truncate(e)}; }

std::string_view fault_kind_name(FaultKind k) {
    switch (k) {
        case FaultKind::NotPresent: return "NotPresent";
        case FaultKind::FrameUnmapped: return "FrameUnmapped";
        case FaultKind::Misaligned: return "Misaligned";
        case FaultKind::ReadOnly: return "ReadOnly";
        case FaultKind::BadRegister: return "BadRegister";
        case FaultKind::PcOutOfRange: return "PcOutOfRange";
    }
    return "?";
}

std::string Fault::describe() const {
    std::string out(fault_kind_name(kind));
    switch (kind) {
        case FaultKind::NotPresent:
        case FaultKind::ReadOnly:
            out += "(level " + std::to_string(level) + ", va " + hex(address) + ")";
            break;
        case FaultKind::FrameUnmapped:
        case FaultKind::Misaligned:
            out += "(" + hex(address) + ")";
            break;
        case FaultKind::BadRegister:
        case FaultKind::PcOutOfRange:
            break;
    }
    return out;
}

Expected<std::uint64_t, Fault> PhysMemory::read(PhysAddr a) const {
    if (!word_aligned(a.offset.value())) return unexpected(Fault{FaultKind::Misaligned, 0, a.bytes()});
    auto it = frames_.find(a.frame.value());
    if (it == frames_.end()) return unexpected(Fault{FaultKind::FrameUnmapped, 0, a.bytes()});
    return it->second[a.offset.value() / 8];
}

Status<Fault> PhysMemory::write(PhysAddr a, std::uint64_t value) {
    if (!word_aligned(a.offset.value())) return unexpected(Fault{FaultKind::Misaligned, 0, a.bytes()});
    auto it = frames_.find(a.frame.value());
    if (it == frames_.end()) return unexpected(Fault{FaultKind::FrameUnmapped, 0, a.bytes()});
    it->second[a.offset.value() / 8] = value;
    return {};
}

std::optional<std::uint64_t> PhysMemory::peek(std::uint64_t byte_address) const {
    auto r = read(PhysAddr::from_bytes(byte_address));
    if (!r) return std::nullopt;
    return *r;
}

bool PhysMemory::merge(const PhysMemory& other) {
    for (const auto& [frame, words] : other.frames_) {
        auto [it, inserted] = frames_.try_emplace(frame, words);
        if (!inserted && it->second != words) return false;
    }
    return true;
}

}  // namespace vmodal
