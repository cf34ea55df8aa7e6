#include "vmodal/sat.hpp"

#include "vmodal/format.hpp"
#include "vmodal/ghost.hpp"

namespace vmodal {

std::string MismatchReport::describe() const {
    std::string out = leaf + ": " + observed;
    if (fault && observed.find(fault_kind_name(fault->kind)) == std::string::npos) out += " (" + fault->describe() + ")";
    return out;
}

namespace {

using Result = Status<MismatchReport>;

Result mismatch(const Assertion& leaf, std::string observed, std::optional<Fault> fault = std::nullopt) {
    return unexpected(MismatchReport{leaf.to_string(), std::move(observed), fault});
}

struct Sat {
    const MachineState& state;
    const Registry& registry;
    std::uint64_t root;

    Result check(const Assertion& a) {
        cur = &a;
        return std::visit(*this, a.node());
    }

    Result operator()(const node::Emp&) { return {}; }

    Result operator()(const node::Pure& p) {
        if (!eval_pure(p, registry)) return mismatch(*cur, "false");
        return {};
    }

    Result operator()(const node::RegPt& r) {
        const std::uint64_t v = state.reg(r.reg);
        if (v != r.val) return mismatch(*cur, "register holds " + hex(v));
        return {};
    }

    Result operator()(const node::PhysPt& p) {
        auto v = state.mem.read(PhysAddr::from_bytes(p.address()));
        if (!v) return mismatch(*cur, v.error().describe(), v.error());
        if (*v != p.val) return mismatch(*cur, "word holds " + hex(*v));
        return {};
    }

    Result virt(std::uint64_t va, std::optional<std::uint64_t> pa, std::optional<std::uint64_t> val) {
        auto t = translate(root, state.mem, va);
        if (!t) return mismatch(*cur, t.error().describe(), t.error());
        if (pa && t->bytes() != *pa) return mismatch(*cur, "translates to " + hex(t->bytes()));
        if (val) {
            auto v = state.mem.read(*t);
            if (!v) return mismatch(*cur, v.error().describe(), v.error());
            if (*v != *val) return mismatch(*cur, "word holds " + hex(*v));
        }
        return {};
    }

    Result operator()(const node::VirtPt& v) { return virt(v.va, std::nullopt, v.val); }
    Result operator()(const node::PtePt& v) { return virt(v.va, v.pa, v.val); }
    Result operator()(const node::Token& t) { return virt(t.va, t.pa, std::nullopt); }

    Result operator()(const node::WalkPt& w) {
        for (int level = 4; level >= 1; --level) {
            const PhysAddr slot = walk_slot(w, root, level);
            auto e = state.mem.read(slot);
            if (!e) return mismatch(*cur, e.error().describe(), e.error());
            if (*e != w.entry(level)) {
                return mismatch(*cur, "level " + std::to_string(level) + " entry holds " + hex(*e));
            }
            if (!decode_pte(*e).present()) {
                Fault f{FaultKind::NotPresent, level, w.va};
                return mismatch(*cur, f.describe(), f);
            }
        }
        const std::uint64_t resolved = (decode_pte(w.l1e).frame().value() << 12) | (w.va & 0xFFF);
        if (resolved != w.pa) return mismatch(*cur, "resolves to " + hex(resolved));
        return {};
    }

    Result operator()(const node::IASpace&) {
        auto r = ias_check(state.mem, root, registry);
        if (!r) return mismatch(*cur, r.error().describe());
        if (!r->empty()) return mismatch(*cur, r->front().describe(), r->front().fault);
        return {};
    }

    Result operator()(const node::OtherSpace& o) {
        Sat inner{state, registry, o.root};
        return inner.check(o.body);
    }

    Result operator()(const node::Sep& s) { return all(s.parts); }
    Result operator()(const node::And& s) { return all(s.parts); }

    Result operator()(const node::Or& s) {
        const Assertion* self = cur;
        std::optional<MismatchReport> first;
        for (const Assertion& p : s.parts) {
            Sat inner{state, registry, root};
            auto r = inner.check(p);
            if (r) return {};
            if (!first) first = r.error();
        }
        if (!first) return mismatch(*self, "empty disjunction");
        return unexpected(*first);
    }

    Result all(const std::vector<Assertion>& parts) {
        for (const Assertion& p : parts) {
            Sat inner{state, registry, root};
            if (auto r = inner.check(p); !r) return r;
        }
        return {};
    }

    const Assertion* cur = nullptr;
};

}  // namespace

Status<MismatchReport> machine_sat(const Assertion& a, std::uint64_t root, const MachineState& state,
                                   const Registry& registry) {
    Sat s{state, registry, root};
    return s.check(a);
}

}  // namespace vmodal
