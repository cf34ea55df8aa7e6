#include <type_traits>

#include "vmodal/format.hpp"
#include "vmodal/machine.hpp"

namespace vmodal {

namespace {

std::string mem_operand(RegId base, std::int32_t disp) {
    std::string s = "[";
    s += reg_name(base);
    if (disp > 0) s += "+" + std::to_string(disp);
    if (disp < 0) s += "-" + std::to_string(-static_cast<std::int64_t>(disp));
    return s + "]";
}

Fault bad_register() { return Fault{FaultKind::BadRegister, 0, 0}; }

bool data(RegId r) { return is_data_reg(r); }

class Stepper {
public:
    Stepper(MachineState& s, const StepOptions& o) : s_(s), opts_(o) {}

    Expected<StepEffect, Fault> operator()(const MovRegReg& i) {
        if (!data(i.dst) || !data(i.src)) return unexpected(bad_register());
        return set(i.dst, s_.reg(i.src));
    }
    Expected<StepEffect, Fault> operator()(const MovRegImm& i) {
        if (!data(i.dst)) return unexpected(bad_register());
        return set(i.dst, i.imm);
    }
    Expected<StepEffect, Fault> operator()(const AddRegImm& i) {
        if (!data(i.dst)) return unexpected(bad_register());
        return set(i.dst, s_.reg(i.dst) + i.imm);
    }
    Expected<StepEffect, Fault> operator()(const MovRegFromMem& i) {
        if (!data(i.dst) || !data(i.base)) return unexpected(bad_register());
        auto v = load(i.base, i.disp);
        if (!v) return unexpected(v.error());
        return set(i.dst, *v);
    }
    Expected<StepEffect, Fault> operator()(const MovMemFromReg& i) {
        if (!data(i.base) || !data(i.src)) return unexpected(bad_register());
        return store(i.base, i.disp, s_.reg(i.src));
    }
    Expected<StepEffect, Fault> operator()(const MovToCr3FromReg& i) {
        if (!data(i.src)) return unexpected(bad_register());
        return set(RegId::cr3, s_.reg(i.src));
    }
    Expected<StepEffect, Fault> operator()(const MovRegFromCr3& i) {
        if (!data(i.dst)) return unexpected(bad_register());
        return set(i.dst, s_.cr3());
    }
    Expected<StepEffect, Fault> operator()(const MovMemFromCr3& i) {
        if (!data(i.base)) return unexpected(bad_register());
        return store(i.base, i.disp, s_.cr3());
    }
    Expected<StepEffect, Fault> operator()(const MovToCr3FromMem& i) {
        if (!data(i.base)) return unexpected(bad_register());
        auto v = load(i.base, i.disp);
        if (!v) return unexpected(v.error());
        return set(RegId::cr3, *v);
    }
    Expected<StepEffect, Fault> operator()(const Skip&) { return StepEffect{}; }

private:
    StepEffect set(RegId r, std::uint64_t v) {
        s_.set_reg(r, v);
        return StepEffect{r, v, std::nullopt, 0};
    }

    // Resolves regs[base]+disp without side effects.
    Expected<WalkResult, Fault> resolve(RegId base, std::int32_t disp) {
        const std::uint64_t va = s_.reg(base) + static_cast<std::uint64_t>(static_cast<std::int64_t>(disp));
        if (!word_aligned(va)) return unexpected(Fault{FaultKind::Misaligned, 0, va});
        WalkResult w = walk(s_.cr3(), s_.mem, va);
        if (w.fault) return unexpected(*w.fault);
        return w;
    }

    void mark_accessed(const WalkResult& w) {
        if (!opts_.set_accessed) return;
        for (const WalkLevel& l : w.levels) s_.mem.write(l.slot, l.entry.raw.value() | pte_bits::accessed);
    }

    Expected<std::uint64_t, Fault> load(RegId base, std::int32_t disp) {
        auto w = resolve(base, disp);
        if (!w) return unexpected(w.error());
        auto v = s_.mem.read(*w->target);
        if (!v) return unexpected(v.error());
        mark_accessed(*w);
        return *v;
    }

    Expected<StepEffect, Fault> store(RegId base, std::int32_t disp, std::uint64_t value) {
        auto w = resolve(base, disp);
        if (!w) return unexpected(w.error());
        if (opts_.enforce_rw) {
            for (const WalkLevel& l : w->levels) {
                if (!l.entry.writable()) {
                    const std::uint64_t va =
                        s_.reg(base) + static_cast<std::uint64_t>(static_cast<std::int64_t>(disp));
                    return unexpected(Fault{FaultKind::ReadOnly, l.level, va});
                }
            }
        }
        // Check the target frame before touching accessed bits.
        if (auto probe = s_.mem.read(*w->target); !probe) return unexpected(probe.error());
        mark_accessed(*w);
        s_.mem.write(*w->target, value);
        return StepEffect{std::nullopt, 0, *w->target, value};
    }

    MachineState& s_;
    const StepOptions& opts_;
};

struct Printer {
    std::string operator()(const MovRegReg& i) const {
        return "mov " + std::string(reg_name(i.dst)) + ", " + std::string(reg_name(i.src));
    }
    std::string operator()(const MovRegImm& i) const { return "mov " + std::string(reg_name(i.dst)) + ", " + hex(i.imm); }
    std::string operator()(const AddRegImm& i) const { return "add " + std::string(reg_name(i.dst)) + ", " + hex(i.imm); }
    std::string operator()(const MovRegFromMem& i) const {
        return "mov " + std::string(reg_name(i.dst)) + ", " + mem_operand(i.base, i.disp);
    }
    std::string operator()(const MovMemFromReg& i) const {
        return "mov " + mem_operand(i.base, i.disp) + ", " + std::string(reg_name(i.src));
    }
    std::string operator()(const MovToCr3FromReg& i) const { return "mov cr3, " + std::string(reg_name(i.src)); }
    std::string operator()(const MovRegFromCr3& i) const { return "mov " + std::string(reg_name(i.dst)) + ", cr3"; }
    std::string operator()(const MovMemFromCr3& i) const { return "mov " + mem_operand(i.base, i.disp) + ", cr3"; }
    std::string operator()(const MovToCr3FromMem& i) const { return "mov cr3, " + mem_operand(i.base, i.disp); }
    std::string operator()(const Skip&) const { return "skip"; }
};

}  // namespace

std::string to_string(const Instr& instr) { return std::visit(Printer{}, instr); }

bool operator==(const Instr& a, const Instr& b) {
    // Instr members are plain aggregates; compare by rendering, which is injective.
    return a.index() == b.index() && to_string(a) == to_string(b);
}

std::string StepEffect::describe() const {
    std::string out;
    if (reg) out = std::string(reg_name(*reg)) + "=" + hex(reg_value);
    if (mem) {
        if (!out.empty()) out += " ";
        out += "mem[" + hex(mem->bytes()) + "]=" + hex(mem_value);
    }
    return out.empty() ? "-" : out;
}

Expected<StepEffect, Fault> apply(MachineState& state, const Instr& instr, const StepOptions& opts) {
    auto effect = std::visit(Stepper{state, opts}, instr);
    if (effect) ++state.pc;
    return effect;
}

Expected<MachineState, Fault> step(MachineState state, const Instr& instr, const StepOptions& opts) {
    auto effect = apply(state, instr, opts);
    if (!effect) return unexpected(effect.error());
    return state;
}

Expected<MachineState, RunFault> run(MachineState state, std::span<const Instr> program, const StepOptions& opts,
                                     const TraceSink& trace) {
    if (state.pc > program.size()) {
        return unexpected(RunFault{state.pc, Fault{FaultKind::PcOutOfRange, 0, 0}});
    }
    while (state.pc < program.size()) {
        const std::size_t pc = state.pc;
        const std::uint64_t root_before = state.cr3();
        auto effect = apply(state, program[pc], opts);
        if (!effect) return unexpected(RunFault{pc, effect.error()});
        if (trace) trace(pc, program[pc], root_before, *effect);
    }
    return state;
}

}  // namespace vmodal
