#include <map>
#include <optional>
#include <set>

#include "vmodal/checker.hpp"

namespace vmodal {

namespace {

// Constant propagation over the script, starting from the register facts
// and virtual contents the precondition states.
class Audit {
public:
    Audit(const Assertion& pre, std::uint64_t root) : root_(root) {
        for (const Assertion& part : conjuncts(normalize(pre))) seed(part, root, true);
    }

    std::vector<FrameWarning> run(const Script& script) {
        for (std::size_t i = 0; i < script.size(); ++i) {
            std::visit([&](const auto& s) { visit(s, i); }, script[i]);
        }
        std::vector<FrameWarning> out;
        if (!first_switch_ || wild_) return out;
        for (const auto& [va, claim] : bare_) {
            if (!touched_.contains(va)) out.push_back({claim, *first_switch_});
        }
        return out;
    }

private:
    using Key = std::pair<std::uint64_t, std::uint64_t>;  // (root, va)

    void seed(const Assertion& a, std::uint64_t r, bool top) {
        if (const auto* o = a.as<node::OtherSpace>()) {
            for (const Assertion& p : conjuncts(o->body)) seed(p, o->root, false);
        } else if (const auto* p = a.as<node::RegPt>()) {
            regs_[p->reg] = p->val;
        } else if (const auto* v = a.as<node::VirtPt>()) {
            mem_[{r, v->va}] = v->val;
            if (top) bare_.emplace(Key{r, v->va}, a);
        } else if (const auto* v = a.as<node::PtePt>()) {
            mem_[{r, v->va}] = v->val;
            if (top) bare_.emplace(Key{r, v->va}, a);
        } else if (const auto* t = a.as<node::Token>()) {
            if (top) bare_.emplace(Key{r, t->va}, a);
        } else if (const auto* w = a.as<node::WalkPt>()) {
            if (top) bare_.emplace(Key{r, w->va}, a);
        }
    }

    std::optional<std::uint64_t> reg(RegId r) const {
        auto it = regs_.find(r);
        if (it == regs_.end()) return std::nullopt;
        return it->second;
    }

    void set(RegId r, std::optional<std::uint64_t> v) {
        if (v) {
            regs_[r] = *v;
        } else {
            regs_.erase(r);
        }
    }

    // Marks the word at base+disp as touched and returns its address.
    std::optional<Key> touch(RegId base, std::int32_t disp) {
        auto b = reg(base);
        if (!b || !cur_) {
            wild_ = true;
            return std::nullopt;
        }
        const Key k{*cur_, *b + static_cast<std::uint64_t>(static_cast<std::int64_t>(disp))};
        touched_.insert(k);
        return k;
    }

    std::optional<std::uint64_t> load(RegId base, std::int32_t disp) {
        auto k = touch(base, disp);
        if (!k) return std::nullopt;
        auto it = mem_.find(*k);
        if (it == mem_.end()) return std::nullopt;
        return it->second;
    }

    void store(RegId base, std::int32_t disp, std::optional<std::uint64_t> v) {
        auto k = touch(base, disp);
        if (!k) return;
        if (v) {
            mem_[*k] = *v;
        } else {
            mem_.erase(*k);
        }
    }

    void switch_to(std::optional<std::uint64_t> next, std::size_t step) {
        if (!first_switch_) first_switch_ = step;
        cur_ = next;
    }

    void visit(const Instr& instr, std::size_t step) {
        std::visit(
            [&](const auto& i) {
                using T = std::decay_t<decltype(i)>;
                if constexpr (std::is_same_v<T, MovRegReg>) {
                    set(i.dst, reg(i.src));
                } else if constexpr (std::is_same_v<T, MovRegImm>) {
                    set(i.dst, i.imm);
                } else if constexpr (std::is_same_v<T, AddRegImm>) {
                    auto v = reg(i.dst);
                    set(i.dst, v ? std::optional(*v + i.imm) : std::nullopt);
                } else if constexpr (std::is_same_v<T, MovRegFromMem>) {
                    set(i.dst, load(i.base, i.disp));
                } else if constexpr (std::is_same_v<T, MovMemFromReg>) {
                    store(i.base, i.disp, reg(i.src));
                } else if constexpr (std::is_same_v<T, MovToCr3FromReg>) {
                    switch_to(reg(i.src), step);
                } else if constexpr (std::is_same_v<T, MovRegFromCr3>) {
                    set(i.dst, cur_);
                } else if constexpr (std::is_same_v<T, MovMemFromCr3>) {
                    store(i.base, i.disp, cur_);
                } else if constexpr (std::is_same_v<T, MovToCr3FromMem>) {
                    switch_to(load(i.base, i.disp), step);
                }
            },
            instr);
    }

    void visit(const GhostCmd& g, std::size_t) {
        std::optional<std::uint64_t> va;
        if (!g.va.reg) {
            va = g.va.imm;
        } else if (auto b = reg(*g.va.reg)) {
            va = g.va.negative ? *b - g.va.imm : *b + g.va.imm;
        }
        if (!va || !cur_) {
            wild_ = true;
            return;
        }
        touched_.insert({*cur_, *va});
    }

    // Stubs return in rax and may clobber nothing else the audit tracks.
    void visit(const Call&, std::size_t) { regs_.erase(RegId::rax); }

    void visit(const AssertNow&, std::size_t) {}

    std::uint64_t root_;
    std::optional<std::uint64_t> cur_{root_};
    std::map<RegId, std::uint64_t> regs_;
    std::map<Key, std::uint64_t> mem_;
    std::map<Key, Assertion> bare_;
    std::set<Key> touched_;
    std::optional<std::size_t> first_switch_;
    bool wild_ = false;
};

}  // namespace

std::vector<FrameWarning> frame_audit(const Assertion& pre, std::uint64_t root, const Script& script) {
    Audit a(pre, root);
    return a.run(script);
}

}  // namespace vmodal
