#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vmodal/expected.hpp"
#include "vmodal/word.hpp"

namespace vmodal {

// ---------------------------------------------------------------------------
// Registers

enum class RegId : std::uint8_t {
    rax, rbx, rcx, rdx, rsi, rdi, rbp, rsp,
    r8, r9, r10, r11, r12, r13, r14, r15,
    cr3,
};

inline constexpr std::size_t kRegCount = 17;

std::string_view reg_name(RegId r);
std::optional<RegId> parse_reg(std::string_view name);
constexpr bool is_data_reg(RegId r) noexcept { return r != RegId::cr3; }
constexpr std::size_t reg_index(RegId r) noexcept { return static_cast<std::size_t>(r); }

// ---------------------------------------------------------------------------
// Addresses and page-table entries

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr std::uint64_t kWordsPerFrame = 512;

constexpr bool page_aligned(std::uint64_t a) noexcept { return (a & 0xFFF) == 0; }
constexpr bool word_aligned(std::uint64_t a) noexcept { return (a & 7) == 0; }

// Physical address split into a 4K frame number and an in-frame byte offset.
struct PhysAddr {
    W52 frame;
    W12 offset;

    static PhysAddr from_bytes(std::uint64_t a) noexcept {
        return {W52::truncate(a >> 12), W12::truncate(a)};
    }
    std::uint64_t bytes() const noexcept { return (frame.value() << 12) | offset.value(); }

    friend bool operator==(const PhysAddr&, const PhysAddr&) = default;
    friend auto operator<=>(const PhysAddr&, const PhysAddr&) = default;
};

struct VaIndices {
    W9 l4;
    W9 l3;
    W9 l2;
    W9 l1;
    W12 offset;

    // Table index for level 4..1.
    W9 index(int level) const noexcept;

    friend bool operator==(const VaIndices&, const VaIndices&) = default;
};

// Bits 48..63 are ignored; canonical-form checks are not modelled.
VaIndices split_va(std::uint64_t va) noexcept;

namespace pte_bits {
inline constexpr std::uint64_t present = 1ull << 0;
inline constexpr std::uint64_t writable = 1ull << 1;
inline constexpr std::uint64_t accessed = 1ull << 5;
inline constexpr std::uint64_t frame_mask = ((1ull << 40) - 1) << 12;
}  // namespace pte_bits

struct Pte {
    W64 raw;

    bool present() const noexcept { return raw.value() & pte_bits::present; }
    bool writable() const noexcept { return raw.value() & pte_bits::writable; }
    bool accessed() const noexcept { return raw.value() & pte_bits::accessed; }
    W52 frame() const noexcept { return W52::truncate((raw.value() >> 12) & ((1ull << 40) - 1)); }

    static Pte encode(std::uint64_t frame, bool present, bool writable, bool accessed = false);

    friend bool operator==(const Pte&, const Pte&) = default;
};

Pte decode_pte(std::uint64_t e) noexcept;

// ---------------------------------------------------------------------------
// Faults

enum class FaultKind { NotPresent, FrameUnmapped, Misaligned, ReadOnly, BadRegister, PcOutOfRange };

struct Fault {
    FaultKind kind = FaultKind::NotPresent;
    int level = 0;              // NotPresent / ReadOnly
    std::uint64_t address = 0;  // va for NotPresent/ReadOnly/Misaligned, physical byte address for FrameUnmapped

    std::string describe() const;

    friend bool operator==(const Fault&, const Fault&) = default;
};

std::string_view fault_kind_name(FaultKind k);

// ---------------------------------------------------------------------------
// Physical memory: frame number -> 512 64-bit words. Absent frames fault.

class PhysMemory {
public:
    using Frame = std::array<std::uint64_t, kWordsPerFrame>;

    bool has_frame(std::uint64_t frame) const { return frames_.contains(frame); }
    void add_frame(std::uint64_t frame) { frames_.try_emplace(frame, Frame{}); }
    void remove_frame(std::uint64_t frame) { frames_.erase(frame); }

    Expected<std::uint64_t, Fault> read(PhysAddr a) const;
    Status<Fault> write(PhysAddr a, std::uint64_t value);

    // Word at an 8-aligned physical byte address, if its frame exists.
    std::optional<std::uint64_t> peek(std::uint64_t byte_address) const;

    // Copies every frame of `other`; fails on a frame present in both with different contents.
    bool merge(const PhysMemory& other);

    const std::map<std::uint64_t, Frame>& frames() const noexcept { return frames_; }

    friend bool operator==(const PhysMemory&, const PhysMemory&) = default;

private:
    std::map<std::uint64_t, Frame> frames_;
};

// ---------------------------------------------------------------------------
// Machine state

struct MachineState {
    std::array<std::uint64_t, kRegCount> regs{};
    PhysMemory mem;
    std::size_t pc = 0;

    std::uint64_t reg(RegId r) const noexcept { return regs[reg_index(r)]; }
    void set_reg(RegId r, std::uint64_t v) noexcept { regs[reg_index(r)] = v; }
    std::uint64_t cr3() const noexcept { return reg(RegId::cr3); }

    friend bool operator==(const MachineState&, const MachineState&) = default;
};

// ---------------------------------------------------------------------------
// Address translation

struct WalkLevel {
    int level;      // 4..1
    PhysAddr slot;  // where the entry was read
    Pte entry;
};

struct WalkResult {
    std::vector<WalkLevel> levels;  // entries read, in walk order
    std::optional<Fault> fault;
    std::optional<PhysAddr> target;
};

// Full four-level walk recording each entry. Never mutates memory.
WalkResult walk(std::uint64_t root, const PhysMemory& mem, std::uint64_t va);

Expected<PhysAddr, Fault> translate(std::uint64_t root, const PhysMemory& mem, std::uint64_t va);

// As above; when set_accessed is true, bit 5 is set on every entry read.
Expected<PhysAddr, Fault> translate(std::uint64_t root, PhysMemory& mem, std::uint64_t va, bool set_accessed);

// ---------------------------------------------------------------------------
// Instructions

struct MovRegReg { RegId dst; RegId src; };
struct MovRegImm { RegId dst; std::uint64_t imm; };
struct AddRegImm { RegId dst; std::uint64_t imm; };
struct MovRegFromMem { RegId dst; RegId base; std::int32_t disp; };
struct MovMemFromReg { RegId base; std::int32_t disp; RegId src; };
struct MovToCr3FromReg { RegId src; };
struct MovRegFromCr3 { RegId dst; };
struct MovMemFromCr3 { RegId base; std::int32_t disp; };
struct MovToCr3FromMem { RegId base; std::int32_t disp; };
struct Skip {};

using Instr = std::variant<MovRegReg, MovRegImm, AddRegImm, MovRegFromMem, MovMemFromReg,
                           MovToCr3FromReg, MovRegFromCr3, MovMemFromCr3, MovToCr3FromMem, Skip>;

// Displacements are byte offsets, multiples of 8, |disp| < 4096.
constexpr bool valid_disp(std::int64_t disp) noexcept {
    return disp % 8 == 0 && disp > -4096 && disp < 4096;
}

// Intel-syntax rendering, e.g. "mov [rdi+8], rsp".
std::string to_string(const Instr& instr);

bool operator==(const Instr& a, const Instr& b);

// ---------------------------------------------------------------------------
// Small-step semantics

struct StepOptions {
    bool enforce_rw = true;
    bool set_accessed = true;
};

// What a step changed, for traces.
struct StepEffect {
    std::optional<RegId> reg;
    std::uint64_t reg_value = 0;
    std::optional<PhysAddr> mem;
    std::uint64_t mem_value = 0;

    std::string describe() const;
};

// In-place step; on fault the state is left unchanged.
Expected<StepEffect, Fault> apply(MachineState& state, const Instr& instr, const StepOptions& opts);

Expected<MachineState, Fault> step(MachineState state, const Instr& instr, const StepOptions& opts);

struct RunFault {
    std::size_t pc;
    Fault fault;
};

using TraceSink = std::function<void(std::size_t pc, const Instr& instr, std::uint64_t root_before,
                                     const StepEffect& effect)>;

// Executes program[state.pc..] to the end.
Expected<MachineState, RunFault> run(MachineState state, std::span<const Instr> program,
                                     const StepOptions& opts, const TraceSink& trace = {});

// ---------------------------------------------------------------------------
// Page-table synthesis (fixture builder)

struct Mapping {
    std::uint64_t va;
    std::uint64_t pa;  // 4K-aligned page base
    bool writable = true;
};

struct SynthTables {
    PhysMemory mem;
    std::uint64_t root = 0;
    std::vector<std::uint64_t> table_frames;  // in allocation order; table_frames[0] is the root
};

// Builds minimal 4-level tables mapping each va's page to its pa page.
// Table frames are allocated sequentially from alloc_base; backing data
// frames are created zero-filled.
Expected<SynthTables, std::string> synth_tables(std::span<const Mapping> mappings, std::uint64_t alloc_base);

}  // namespace vmodal
