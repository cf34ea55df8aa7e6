#include "vmodal/checker.hpp"

#include "vmodal/format.hpp"
#include "vmodal/ghost.hpp"
#include "vmodal/sat.hpp"

namespace vmodal {

std::string Expr::to_string() const {
    if (!reg) return hex(imm);
    std::string out(reg_name(*reg));
    if (imm != 0) out += (negative ? "-" : "+") + hex(imm);
    return out;
}

std::string_view ghost_op_name(GhostOp op) {
    switch (op) {
        case GhostOp::InsertWalk: return "insert_walk";
        case GhostOp::RemoveWalk: return "remove_walk";
        case GhostOp::PteToVirt: return "pte_to_virt";
    }
    return "?";
}

std::string to_string(const Step& step) {
    struct V {
        std::string operator()(const Instr& i) const { return vmodal::to_string(i); }
        std::string operator()(const GhostCmd& g) const {
            std::string out = "@ghost " + std::string(ghost_op_name(g.op)) + " va=" + g.va.to_string();
            if (g.pa) out += " pa=" + g.pa->to_string();
            return out;
        }
        std::string operator()(const Call& c) const { return "call " + c.name; }
        std::string operator()(const AssertNow& a) const { return "@assert { " + a.assertion.to_string() + " }"; }
    };
    return std::visit(V{}, step);
}

std::vector<Instr> instructions_of(const Script& script) {
    std::vector<Instr> out;
    for (const Step& s : script) {
        if (const Instr* i = std::get_if<Instr>(&s)) out.push_back(*i);
    }
    return out;
}

std::string_view check_mode_name(CheckMode m) { return m == CheckMode::Coexec ? "coexec" : "resource"; }

std::optional<std::uint64_t> StubEnv::reg(RegId r) const {
    auto c = ledger.find(Location::reg(r));
    if (!c) return std::nullopt;
    return c->value;
}

std::string_view violation_kind_name(ViolationKind k) {
    switch (k) {
        case ViolationKind::MissingResource: return "MissingResource";
        case ViolationKind::InsufficientFraction: return "InsufficientFraction";
        case ViolationKind::ValueDisagreement: return "ValueDisagreement";
        case ViolationKind::UnsoundFrame: return "UnsoundFrame";
        case ViolationKind::UnknownRoot: return "UnknownRoot";
        case ViolationKind::StubPreFailed: return "StubPreFailed";
        case ViolationKind::MachineDisagree: return "MachineDisagree";
        case ViolationKind::PreconditionFailed: return "PreconditionFailed";
        case ViolationKind::AssertionFalse: return "AssertionFalse";
        case ViolationKind::InvalidAssertion: return "InvalidAssertion";
        case ViolationKind::GhostRejected: return "GhostRejected";
    }
    return "?";
}

std::string Violation::describe() const {
    std::string out(violation_kind_name(kind));
    switch (phase) {
        case Phase::Pre: out += " in precondition"; break;
        case Phase::Step: out += " at step " + std::to_string(step); break;
        case Phase::Post: out += " in postcondition"; break;
    }
    if (pc) out += " (pc " + std::to_string(*pc) + ")";
    if (!location.empty()) out += " [" + location + "]";
    if (!narrative.empty()) out += ": " + narrative;
    return out;
}

std::string FrameWarning::describe() const {
    return "UnsoundFrame: " + claim.to_string() + " is framed across the cr3 write at step " + std::to_string(step);
}

// ---------------------------------------------------------------------------

namespace {

std::string claim_text(const Location& loc, const Claim& c) {
    std::string out = loc.describe();
    if (!c.q.is_one()) out += " {" + c.q.to_string() + "}";
    return out + " = " + hex(c.value);
}

// Any positive share is enough to read.
Fraction any_share() { return *Fraction::make(1, 1ull << 62); }

class Engine {
public:
    Engine(CheckerCtx& ctx, std::size_t index, const StubTable& stubs, StepRecord* rec)
        : ctx_(ctx), index_(index), stubs_(stubs), rec_(rec) {}

    Status<Violation> run(const Step& step) {
        if (rec_) {
            rec_->index = index_;
            rec_->text = to_string(step);
            rec_->root_before = ctx_.root;
        }
        auto ok = std::visit([this](const auto& s) { return apply(s); }, step);
        if (rec_) rec_->root_after = ctx_.root;
        return ok;
    }

private:
    using R = Status<Violation>;

    Violation violation(ViolationKind kind, std::string location, std::string narrative) const {
        return Violation{kind, Phase::Step, index_, std::nullopt, std::move(location), std::move(narrative)};
    }

    void rule(std::string name) {
        if (rec_) rec_->rule = std::move(name);
    }
    void consumed(const Location& loc, const Claim& c) {
        if (rec_) rec_->consumed.push_back(claim_text(loc, c));
    }
    void produced(const Location& loc, const Claim& c) {
        if (rec_) rec_->produced.push_back(claim_text(loc, c));
    }

    // The claim the step needs is held, but only under a root the double has
    // switched away from: the frame rule would have carried it across.
    std::optional<std::uint64_t> framed_elsewhere(const Location& loc) const {
        if (loc.kind != Location::Kind::Walk && loc.kind != Location::Kind::Space) return std::nullopt;
        for (std::uint64_t old : ctx_.left_roots) {
            Location moved = loc;
            moved.a = old;
            if (ctx_.ledger.find(moved)) return old;
        }
        return std::nullopt;
    }

    Violation from_ledger(const LedgerError& e) const {
        if (e.kind == LedgerErrorKind::MissingResource) {
            if (auto old = framed_elsewhere(e.location)) {
                return violation(ViolationKind::UnsoundFrame, e.location.describe(),
                                 "held only as [" + hex(*old) + "](...) since the cr3 write; a bare claim does not "
                                 "survive the switch to " + hex(ctx_.root));
            }
        }
        switch (e.kind) {
            case LedgerErrorKind::MissingResource:
                return violation(ViolationKind::MissingResource, e.location.describe(), e.detail);
            case LedgerErrorKind::InsufficientFraction:
                return violation(ViolationKind::InsufficientFraction, e.location.describe(), e.detail);
            case LedgerErrorKind::ValueDisagreement:
                return violation(ViolationKind::ValueDisagreement, e.location.describe(), e.detail);
            case LedgerErrorKind::UnknownRoot:
                return violation(ViolationKind::UnknownRoot, e.location.describe(), e.detail);
            case LedgerErrorKind::PureFalse:
                return violation(ViolationKind::AssertionFalse, "", e.detail);
            default:
                return violation(ViolationKind::InvalidAssertion, e.location.describe(), e.describe());
        }
    }

    Expected<Claim, Violation> need(const Location& loc, Fraction q) {
        auto c = ctx_.ledger.require(loc, q);
        if (!c) return unexpected(from_ledger(c.error()));
        return *c;
    }

    Expected<std::uint64_t, Violation> read_reg(RegId r) {
        auto c = need(Location::reg(r), any_share());
        if (!c) return unexpected(c.error());
        return c->value;
    }

    R write_reg(RegId r, std::uint64_t value) {
        const Location loc = Location::reg(r);
        auto c = need(loc, Fraction::one());
        if (!c) return unexpected(c.error());
        consumed(loc, *c);
        ctx_.ledger.update(loc, value);
        produced(loc, {Fraction::one(), value});
        return {};
    }

    Expected<std::uint64_t, Violation> eval(const Expr& e) {
        if (!e.reg) return e.imm;
        auto v = read_reg(*e.reg);
        if (!v) return v;
        return e.negative ? *v - e.imm : *v + e.imm;
    }

    // Resolves a virtual word through the current space: IASpace, the walk
    // token and the data claim with at least `q`.
    Expected<std::pair<std::uint64_t, Claim>, Violation> virt(RegId base, std::int32_t disp, Fraction q) {
        if (auto s = need(Location::space(ctx_.root), any_share()); !s) return unexpected(s.error());
        auto b = read_reg(base);
        if (!b) return unexpected(b.error());
        const std::uint64_t va = *b + static_cast<std::uint64_t>(static_cast<std::int64_t>(disp));
        auto w = need(Location::walk(ctx_.root, va), any_share());
        if (!w) return unexpected(w.error());
        auto d = need(Location::phys(w->value), q);
        if (!d) return unexpected(d.error());
        return std::pair{w->value, *d};
    }

    Expected<std::uint64_t, Violation> load(RegId base, std::int32_t disp) {
        auto v = virt(base, disp, any_share());
        if (!v) return unexpected(v.error());
        return v->second.value;
    }

    R store(RegId base, std::int32_t disp, std::uint64_t value) {
        auto v = virt(base, disp, Fraction::one());
        if (!v) return unexpected(v.error());
        const Location loc = Location::phys(v->first);
        consumed(loc, v->second);
        ctx_.ledger.update(loc, value);
        produced(loc, {Fraction::one(), value});
        return {};
    }

    R switch_root(std::uint64_t next) {
        if (!ctx_.registry.contains(next)) {
            return unexpected(violation(ViolationKind::UnknownRoot, "cr3", "no address space at " + hex(next)));
        }
        if (auto s = need(Location::space(ctx_.root), any_share()); !s) return unexpected(s.error());
        if (auto s = need(Location::space(next), any_share()); !s) {
            return unexpected(violation(ViolationKind::MissingResource, Location::space(next).describe(),
                                        "switching to " + hex(next) + " needs [" + hex(next) + "](iaspace)"));
        }
        std::size_t rewrapped = 0;
        std::size_t unwrapped = 0;
        for (const auto& [loc, c] : ctx_.ledger.claims()) {
            if (loc.is_fact()) continue;
            if (loc.a == ctx_.root) ++rewrapped;
            if (loc.a == next) ++unwrapped;
        }
        if (rec_) {
            rec_->consumed.push_back("cr3 = " + hex(ctx_.root));
            rec_->produced.push_back("cr3 = " + hex(next));
            rec_->produced.push_back(std::to_string(rewrapped) + " claims now under [" + hex(ctx_.root) + "]");
            rec_->produced.push_back(std::to_string(unwrapped) + " claims unwrapped from [" + hex(next) + "]");
        }
        if (next != ctx_.root) ctx_.left_roots.insert(ctx_.root);
        ctx_.left_roots.erase(next);
        ctx_.root = next;
        ctx_.ledger.set_root(next);
        return {};
    }

    // Machine instructions.

    R apply(const Instr& instr) {
        return std::visit([this](const auto& i) { return exec(i); }, instr);
    }

    R exec(const MovRegReg& i) {
        rule("WriteToRegFromReg");
        auto v = read_reg(i.src);
        if (!v) return unexpected(v.error());
        return write_reg(i.dst, *v);
    }
    R exec(const MovRegImm& i) {
        rule("WriteToRegFromImm");
        return write_reg(i.dst, i.imm);
    }
    R exec(const AddRegImm& i) {
        rule("AddRegImm");
        auto v = read_reg(i.dst);
        if (!v) return unexpected(v.error());
        return write_reg(i.dst, *v + i.imm);
    }
    R exec(const MovRegFromMem& i) {
        rule("WriteToRegFromVirtMem");
        auto v = load(i.base, i.disp);
        if (!v) return unexpected(v.error());
        return write_reg(i.dst, *v);
    }
    R exec(const MovMemFromReg& i) {
        rule("WriteToVirtMemFromReg");
        auto v = read_reg(i.src);
        if (!v) return unexpected(v.error());
        return store(i.base, i.disp, *v);
    }
    R exec(const MovToCr3FromReg& i) {
        rule("WriteToRegCtlFromRegModal");
        auto v = read_reg(i.src);
        if (!v) return unexpected(v.error());
        return switch_root(*v);
    }
    R exec(const MovRegFromCr3& i) {
        rule("WriteToRegFromRegCtl");
        return write_reg(i.dst, ctx_.root);
    }
    R exec(const MovMemFromCr3& i) {
        rule("WriteToVirtMemFromRegCtl");
        return store(i.base, i.disp, ctx_.root);
    }
    R exec(const MovToCr3FromMem& i) {
        rule("WriteToRegCtlFromVirtMemModal");
        auto v = load(i.base, i.disp);
        if (!v) return unexpected(v.error());
        return switch_root(*v);
    }
    R exec(const Skip&) {
        rule("Skip");
        return {};
    }

    // Ghost commands.

    R apply(const GhostCmd& g) {
        rule("Ghost:" + std::string(ghost_op_name(g.op)));
        auto va = eval(g.va);
        if (!va) return unexpected(va.error());
        switch (g.op) {
            case GhostOp::InsertWalk: {
                if (!g.pa) return unexpected(violation(ViolationKind::GhostRejected, "", "insert_walk needs pa="));
                auto pa = eval(*g.pa);
                if (!pa) return unexpected(pa.error());
                return insert_walk(*va, *pa);
            }
            case GhostOp::RemoveWalk: return remove_walk(*va);
            case GhostOp::PteToVirt: {
                auto w = need(Location::walk(ctx_.root, *va), any_share());
                if (!w) return unexpected(w.error());
                return {};
            }
        }
        return {};
    }

    R insert_walk(std::uint64_t va, std::uint64_t pa) {
        if (auto s = need(Location::space(ctx_.root), any_share()); !s) return unexpected(s.error());
        WalkMap* theta = ctx_.registry.find(ctx_.root);
        // Evidence comes from the physical entry claims the caller holds.
        const VaIndices idx = split_va(va);
        std::uint64_t table = ctx_.root >> 12;
        std::uint64_t entries[5] = {};
        std::uint64_t slots[5] = {};
        PhysMemory seen;
        for (int level = 4; level >= 1; --level) {
            slots[level] = (table << 12) | (idx.index(level).value() * 8);
            auto c = need(Location::phys(slots[level]), Fraction::entry_share(level));
            if (!c) return unexpected(c.error());
            entries[level] = c->value;
            seen.add_frame(table);
            seen.write(PhysAddr::from_bytes(slots[level]), c->value);
            if (!decode_pte(c->value).present()) {
                return unexpected(violation(ViolationKind::GhostRejected, Location::phys(slots[level]).describe(),
                                            "level " + std::to_string(level) + " entry not present"));
            }
            table = decode_pte(c->value).frame().value();
        }
        const node::WalkPt evidence{va, entries[4], entries[3], entries[2], entries[1], pa};
        TokenBank bank;
        auto ok = ghost_insert_walk(*theta, bank, ctx_.root, va, pa, evidence,
                                    ctx_.mode == CheckMode::Coexec ? ctx_.machine.mem : seen);
        if (!ok) return unexpected(violation(ViolationKind::GhostRejected, hex(va), ok.error().describe()));
        for (int level = 4; level >= 1; --level) {
            const Location loc = Location::phys(slots[level]);
            const Claim share{Fraction::entry_share(level), entries[level]};
            ctx_.ledger.take(loc, share.q);
            consumed(loc, share);
        }
        ctx_.footprint[ctx_.root][va] = evidence;
        const Location w = Location::walk(ctx_.root, va);
        ctx_.ledger.add(w, {Fraction::one(), pa});
        produced(w, {Fraction::one(), pa});
        return {};
    }

    R remove_walk(std::uint64_t va) {
        if (auto s = need(Location::space(ctx_.root), any_share()); !s) return unexpected(s.error());
        const Location w = Location::walk(ctx_.root, va);
        auto held = ctx_.ledger.find(w);
        TokenBank bank;
        if (held) bank.give(ctx_.root, va, held->q);
        WalkMap* theta = ctx_.registry.find(ctx_.root);
        auto pa = ghost_remove_walk(*theta, bank, ctx_.root, va);
        if (!pa) {
            if (!held && framed_elsewhere(w)) return unexpected(from_ledger({LedgerErrorKind::MissingResource, w, ""}));
            return unexpected(violation(ViolationKind::GhostRejected, w.describe(), pa.error().describe()));
        }
        ctx_.ledger.take(w, held->q);
        consumed(w, *held);
        auto space = ctx_.footprint.find(ctx_.root);
        if (space != ctx_.footprint.end()) {
            auto ev = space->second.find(va);
            if (ev != space->second.end()) {
                for (int level = 4; level >= 1; --level) {
                    const Location loc = Location::phys(walk_slot(ev->second, ctx_.root, level).bytes());
                    const Claim share{Fraction::entry_share(level), ev->second.entry(level)};
                    if (auto ok = ctx_.ledger.add(loc, share); !ok) return unexpected(from_ledger(ok.error()));
                    produced(loc, share);
                }
                space->second.erase(ev);
            }
        }
        return {};
    }

    // Stub calls.

    R apply(const Call& c) {
        rule("Call:" + c.name);
        auto it = stubs_.find(c.name);
        if (it == stubs_.end()) return unexpected(violation(ViolationKind::StubPreFailed, c.name, "unknown stub"));
        StubEnv env{ctx_.ledger, ctx_.registry, ctx_.root, ctx_.machine, ctx_.free_frames};
        auto pre = it->second.consumes(env);
        if (!pre) return unexpected(violation(ViolationKind::StubPreFailed, c.name, pre.error()));
        auto need_pre = lower(*pre, ctx_.root, ctx_.registry);
        if (!need_pre) return unexpected(violation(ViolationKind::StubPreFailed, c.name, need_pre.error().describe()));
        auto rest = ctx_.ledger.subtract(*need_pre);
        if (!rest) return unexpected(violation(ViolationKind::StubPreFailed, c.name, rest.error().describe()));
        for (const auto& [loc, claim] : need_pre->claims()) consumed(loc, claim);
        ctx_.ledger = *rest;

        auto post = it->second.effect(env);
        if (!post) return unexpected(violation(ViolationKind::StubPreFailed, c.name, post.error()));
        auto gained = lower(*post, ctx_.root, ctx_.registry);
        if (!gained) return unexpected(from_ledger(gained.error()));
        auto joined = ledger_join(ctx_.ledger, *gained);
        if (!joined) return unexpected(from_ledger(joined.error()));
        ctx_.ledger = *joined;
        for (const auto& [loc, claim] : gained->claims()) produced(loc, claim);
        if (ctx_.mode == CheckMode::Coexec) {
            if (auto sat = machine_sat(*post, ctx_.root, ctx_.machine, ctx_.registry); !sat) {
                Violation v = violation(ViolationKind::MachineDisagree, c.name,
                                        "stub postcondition not satisfied: " + sat.error().describe());
                v.pc = ctx_.machine.pc;
                return unexpected(v);
            }
        }
        return {};
    }

    R apply(const AssertNow& a) {
        rule("AssertNow");
        auto want = lower(a.assertion, ctx_.root, ctx_.registry);
        if (!want) {
            if (want.error().kind == LedgerErrorKind::UnresolvedWitness && framed_elsewhere(want.error().location)) {
                return unexpected(from_ledger({LedgerErrorKind::MissingResource, want.error().location, ""}));
            }
            return unexpected(from_ledger(want.error()));
        }
        // A framed walk explains a missing phys claim better than the phys claim does.
        for (const auto& [loc, _] : want->claims()) {
            if (!ctx_.ledger.find(loc) && framed_elsewhere(loc)) {
                return unexpected(from_ledger({LedgerErrorKind::MissingResource, loc, ""}));
            }
        }
        if (auto ok = ctx_.ledger.includes(*want); !ok) return unexpected(from_ledger(ok.error()));
        if (ctx_.mode == CheckMode::Coexec) {
            if (auto sat = machine_sat(a.assertion, ctx_.root, ctx_.machine, ctx_.registry); !sat) {
                Violation v = violation(ViolationKind::MachineDisagree, "", sat.error().describe());
                v.pc = ctx_.machine.pc;
                return unexpected(v);
            }
        }
        return {};
    }

public:
    // Executes `instr` on the machine (coexec only) and cross-checks.
    R machine_step(const Step& step) {
        if (ctx_.mode != CheckMode::Coexec) return {};
        if (const Instr* instr = std::get_if<Instr>(&step)) {
            const std::size_t pc = ctx_.machine.pc;
            auto eff = vmodal::apply(ctx_.machine, *instr, StepOptions{true, false});
            if (!eff) {
                Violation v = violation(ViolationKind::MachineDisagree, "", "machine faulted: " + eff.error().describe());
                v.pc = pc;
                return unexpected(v);
            }
        }
        if (ctx_.machine.cr3() != ctx_.root) {
            Violation v = violation(ViolationKind::MachineDisagree, "cr3",
                                    "machine cr3 " + hex(ctx_.machine.cr3()) + ", double root " + hex(ctx_.root));
            v.pc = ctx_.machine.pc;
            return unexpected(v);
        }
        auto bad = ledger_disagreements(ctx_);
        if (!bad.empty()) {
            Violation v = violation(ViolationKind::MachineDisagree, "", bad.front());
            v.pc = ctx_.machine.pc;
            return unexpected(v);
        }
        return {};
    }

private:
    CheckerCtx& ctx_;
    std::size_t index_;
    const StubTable& stubs_;
    StepRecord* rec_;
};

// Per-word sums of footprint shares and free physical claims must stay <= 1
// and agree on the entry value.
std::optional<std::string> footprint_conflict(const CheckerCtx& ctx) {
    std::map<std::uint64_t, Claim> total;
    for (const auto& [loc, c] : ctx.ledger.claims()) {
        if (loc.kind == Location::Kind::Phys) total.emplace(loc.a, c);
    }
    for (const auto& [root, walks] : ctx.footprint) {
        for (const auto& [va, ev] : walks) {
            for (int level = 4; level >= 1; --level) {
                const std::uint64_t slot = walk_slot(ev, root, level).bytes();
                const Claim share{Fraction::entry_share(level), ev.entry(level)};
                auto it = total.find(slot);
                if (it == total.end()) {
                    total.emplace(slot, share);
                    continue;
                }
                if (it->second.value != share.value) {
                    return "phys@" + hex(slot) + " is " + hex(it->second.value) + " but the walk of " + hex(va) +
                           " under " + hex(root) + " relies on " + hex(share.value);
                }
                auto sum = frac_combine(it->second.q, share.q);
                if (!sum) {
                    return "phys@" + hex(slot) + " is claimed beyond full ownership together with the walk of " +
                           hex(va) + " under " + hex(root);
                }
                it->second.q = *sum;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<std::string> ledger_disagreements(const CheckerCtx& ctx) {
    std::vector<std::string> out;
    const MachineState& m = ctx.machine;
    for (const auto& [loc, c] : ctx.ledger.claims()) {
        switch (loc.kind) {
            case Location::Kind::Reg: {
                const std::uint64_t v = m.reg(static_cast<RegId>(loc.a));
                if (v != c.value) out.push_back(loc.describe() + " is " + hex(v) + ", ledger says " + hex(c.value));
                break;
            }
            case Location::Kind::Phys: {
                auto v = m.mem.peek(loc.a);
                if (!v) {
                    out.push_back(loc.describe() + " is not backed by memory");
                } else if (*v != c.value) {
                    out.push_back(loc.describe() + " is " + hex(*v) + ", ledger says " + hex(c.value));
                }
                break;
            }
            case Location::Kind::Walk: {
                auto t = translate(loc.a, m.mem, loc.b);
                if (!t) {
                    out.push_back(loc.describe() + ": " + t.error().describe());
                } else if (t->bytes() != c.value) {
                    out.push_back(loc.describe() + " translates to " + hex(t->bytes()) + ", ledger says " +
                                  hex(c.value));
                }
                break;
            }
            case Location::Kind::Space: {
                auto r = ias_check(m.mem, loc.a, ctx.registry);
                if (!r) {
                    out.push_back(loc.describe() + ": " + r.error().describe());
                } else if (!r->empty()) {
                    out.push_back(loc.describe() + ": " + r->front().describe());
                }
                break;
            }
        }
    }
    for (const auto& [root, walks] : ctx.footprint) {
        for (const auto& [va, ev] : walks) {
            if (auto ok = validate_walk(ev, root, m.mem); !ok) {
                out.push_back("iaspace@" + hex(root) + " footprint: " + ok.error().describe());
            }
        }
    }
    return out;
}

Status<Violation> apply_rule(CheckerCtx& ctx, const Step& step, std::size_t index, const StubTable& stubs,
                             StepRecord* record) {
    Engine e(ctx, index, stubs, record);
    if (auto ok = e.run(step); !ok) return ok;
    if (std::holds_alternative<Call>(step)) {
        if (auto bad = footprint_conflict(ctx)) {
            return unexpected(Violation{ViolationKind::InsufficientFraction, Phase::Step, index, std::nullopt, "", *bad});
        }
    }
    return e.machine_step(step);
}

Expected<CheckerCtx, Violation> make_context(const Assertion& pre, std::uint64_t root, const CheckSetup& setup) {
    auto fail = [](ViolationKind kind, std::string loc, std::string narrative) {
        return unexpected(Violation{kind, Phase::Pre, 0, std::nullopt, std::move(loc), std::move(narrative)});
    };
    if (!setup.registry.contains(root)) return fail(ViolationKind::UnknownRoot, hex(root), "root not registered");
    CheckerCtx ctx;
    ctx.root = root;
    ctx.registry = setup.registry;
    ctx.machine = setup.init;
    ctx.mode = setup.mode;
    ctx.free_frames = setup.free_frames;

    auto ledger = lower(pre, root, setup.registry);
    if (!ledger) {
        const LedgerError& e = ledger.error();
        const ViolationKind kind = e.kind == LedgerErrorKind::PureFalse     ? ViolationKind::AssertionFalse
                                   : e.kind == LedgerErrorKind::UnknownRoot ? ViolationKind::UnknownRoot
                                                                            : ViolationKind::InvalidAssertion;
        return fail(kind, e.location.describe(), e.describe());
    }
    ctx.ledger = *ledger;

    for (const auto& [r, theta] : setup.registry.spaces()) {
        for (const auto& [va, pa] : theta) {
            auto ev = walk_evidence(r, setup.init.mem, va);
            if (!ev) continue;
            const auto& w = *ev->as<node::WalkPt>();
            if (w.pa == pa) ctx.footprint[r][va] = w;
        }
    }
    if (auto bad = footprint_conflict(ctx)) return fail(ViolationKind::InsufficientFraction, "", *bad);

    if (ctx.mode == CheckMode::Coexec) {
        if (setup.init.cr3() != root) {
            return fail(ViolationKind::PreconditionFailed, "cr3",
                        "machine cr3 " + hex(setup.init.cr3()) + ", double root " + hex(root));
        }
        if (auto sat = machine_sat(pre, root, setup.init, setup.registry); !sat) {
            return fail(ViolationKind::PreconditionFailed, "", sat.error().describe());
        }
        if (auto bad = ledger_disagreements(ctx); !bad.empty()) {
            return fail(ViolationKind::PreconditionFailed, "", bad.front());
        }
    }
    return ctx;
}

namespace {

void run_steps(Report& report, const Script& script, const StubTable& stubs, const std::optional<Assertion>& post) {
    for (std::size_t i = 0; i < script.size(); ++i) {
        StepRecord rec{};
        auto ok = apply_rule(report.ctx, script[i], i, stubs, &rec);
        report.steps.push_back(std::move(rec));
        if (!ok) {
            report.violation = ok.error();
            return;
        }
    }
    if (!post) return;
    // The postcondition is checked like a final inline assertion.
    StepRecord rec{};
    auto ok = apply_rule(report.ctx, AssertNow{*post}, script.size(), stubs, &rec);
    if (!ok) {
        Violation v = ok.error();
        v.phase = Phase::Post;
        report.violation = v;
    }
}

}  // namespace

Report check_double(const Assertion& pre, std::uint64_t root, const Script& script, const StubTable& stubs,
                    const CheckSetup& setup, const std::optional<Assertion>& post) {
    Report report;
    report.frame_warnings = frame_audit(pre, root, script);
    auto ctx = make_context(pre, root, setup);
    if (!ctx) {
        report.ctx.root = root;
        report.ctx.ledger = ResourceLedger(root);
        report.ctx.registry = setup.registry;
        report.ctx.machine = setup.init;
        report.ctx.mode = setup.mode;
        report.violation = ctx.error();
        return report;
    }
    report.ctx = std::move(*ctx);
    run_steps(report, script, stubs, post);
    return report;
}

Report resume_double(const Report& from, const Script& script, const StubTable& stubs,
                     const std::optional<Assertion>& post) {
    Report report;
    report.ctx = from.ctx;
    if (from.violation) {
        report.violation = from.violation;
        return report;
    }
    report.frame_warnings = frame_audit(render(from.ctx.ledger), from.ctx.root, script);
    run_steps(report, script, stubs, post);
    return report;
}

}  // namespace vmodal
