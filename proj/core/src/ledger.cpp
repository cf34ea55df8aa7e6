#include "vmodal/ledger.hpp"

#include <vector>

#include "vmodal/format.hpp"

namespace vmodal {

std::optional<std::uint64_t> Location::root() const noexcept {
    if (kind == Kind::Walk || kind == Kind::Space) return a;
    return std::nullopt;
}

std::string Location::describe() const {
    switch (kind) {
        case Kind::Reg: return std::string(reg_name(static_cast<RegId>(a)));
        case Kind::Phys: return "phys@" + hex(a);
        case Kind::Walk: return "walk@" + hex(a) + ":" + hex(b);
        case Kind::Space: return "iaspace@" + hex(a);
    }
    return "?";
}

std::string_view ledger_error_name(LedgerErrorKind k) {
    switch (k) {
        case LedgerErrorKind::SumExceedsOne: return "SumExceedsOne";
        case LedgerErrorKind::ValueDisagreement: return "ValueDisagreement";
        case LedgerErrorKind::RootMismatch: return "RootMismatch";
        case LedgerErrorKind::Overflow: return "Overflow";
        case LedgerErrorKind::MissingResource: return "MissingResource";
        case LedgerErrorKind::InsufficientFraction: return "InsufficientFraction";
        case LedgerErrorKind::UnknownRoot: return "UnknownRoot";
        case LedgerErrorKind::UnresolvedWitness: return "UnresolvedWitness";
        case LedgerErrorKind::EvidenceInvalid: return "EvidenceInvalid";
        case LedgerErrorKind::PureFalse: return "PureFalse";
        case LedgerErrorKind::NotLowerable: return "NotLowerable";
        case LedgerErrorKind::BadRegister: return "BadRegister";
    }
    return "?";
}

std::string LedgerError::describe() const {
    std::string out = std::string(ledger_error_name(kind)) + " at " + location.describe();
    if (!detail.empty()) out += ": " + detail;
    return out;
}

std::optional<Claim> ResourceLedger::find(const Location& loc) const {
    auto it = claims_.find(loc);
    if (it == claims_.end()) return std::nullopt;
    return it->second;
}

Status<LedgerError> ResourceLedger::add(const Location& loc, const Claim& claim) {
    auto it = claims_.find(loc);
    if (it == claims_.end()) {
        claims_.emplace(loc, claim);
        return {};
    }
    if (it->second.value != claim.value) {
        return unexpected(LedgerError{LedgerErrorKind::ValueDisagreement, loc,
                                      hex(it->second.value) + " vs " + hex(claim.value)});
    }
    auto sum = frac_combine(it->second.q, claim.q);
    if (!sum) {
        const auto kind = sum.error() == FractionError::Overflow ? LedgerErrorKind::Overflow
                                                                 : LedgerErrorKind::SumExceedsOne;
        return unexpected(LedgerError{kind, loc, it->second.q.to_string() + " + " + claim.q.to_string()});
    }
    it->second.q = *sum;
    return {};
}

Expected<Claim, LedgerError> ResourceLedger::require(const Location& loc, Fraction q) const {
    auto it = claims_.find(loc);
    if (it == claims_.end()) return unexpected(LedgerError{LedgerErrorKind::MissingResource, loc, ""});
    if (it->second.q < q) {
        return unexpected(LedgerError{LedgerErrorKind::InsufficientFraction, loc,
                                      "holds " + it->second.q.to_string() + ", needs " + q.to_string()});
    }
    return it->second;
}

Status<LedgerError> ResourceLedger::take(const Location& loc, Fraction q) {
    auto held = require(loc, q);
    if (!held) return unexpected(held.error());
    auto rest = frac_subtract(held->q, q);
    if (!rest) return unexpected(LedgerError{LedgerErrorKind::Overflow, loc, "fraction underflow"});
    if (*rest) {
        claims_[loc].q = **rest;
    } else {
        claims_.erase(loc);
    }
    return {};
}

Status<LedgerError> ResourceLedger::update(const Location& loc, std::uint64_t value) {
    auto held = require(loc, Fraction::one());
    if (!held) return unexpected(held.error());
    claims_[loc].value = value;
    return {};
}

Status<LedgerError> ResourceLedger::includes(const ResourceLedger& sub) const {
    for (const auto& [loc, claim] : sub.claims_) {
        auto held = require(loc, claim.q);
        if (!held) return unexpected(held.error());
        if (held->value != claim.value) {
            return unexpected(LedgerError{LedgerErrorKind::ValueDisagreement, loc,
                                          "holds " + hex(held->value) + ", expected " + hex(claim.value)});
        }
    }
    return {};
}

Expected<ResourceLedger, LedgerError> ResourceLedger::subtract(const ResourceLedger& sub) const {
    if (auto ok = includes(sub); !ok) return unexpected(ok.error());
    ResourceLedger out = *this;
    for (const auto& [loc, claim] : sub.claims_) out.take(loc, claim.q);
    return out;
}

Expected<ResourceLedger, LedgerError> ledger_join(const ResourceLedger& a, const ResourceLedger& b) {
    if (a.root() != b.root()) {
        return unexpected(LedgerError{LedgerErrorKind::RootMismatch, Location::space(b.root()),
                                      "joining ledgers evaluated at " + hex(a.root()) + " and " + hex(b.root())});
    }
    ResourceLedger out = a;
    for (const auto& [loc, claim] : b.claims()) {
        if (auto ok = out.add(loc, claim); !ok) return unexpected(ok.error());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lowering

namespace {

class Lowerer {
public:
    Lowerer(ResourceLedger& out, const Registry& registry) : out_(out), registry_(registry) {}

    Status<LedgerError> run(const Assertion& a, std::uint64_t root) {
        root_ = root;
        return std::visit(*this, a.node());
    }

    Status<LedgerError> operator()(const node::Emp&) { return {}; }

    Status<LedgerError> operator()(const node::Pure& p) {
        if (!eval_pure(p, registry_)) {
            return unexpected(LedgerError{LedgerErrorKind::PureFalse, Location{}, Assertion{Node{p}}.to_string()});
        }
        return {};
    }

    Status<LedgerError> operator()(const node::RegPt& r) {
        if (!is_data_reg(r.reg)) {
            return unexpected(LedgerError{LedgerErrorKind::BadRegister, Location::reg(r.reg),
                                          "cr3 is owned by the Hoare double, not by assertions"});
        }
        return out_.add(Location::reg(r.reg), {r.q, r.val});
    }

    Status<LedgerError> operator()(const node::PhysPt& p) { return out_.add(Location::phys(p.address()), {p.q, p.val}); }

    Status<LedgerError> operator()(const node::VirtPt& v) {
        auto pa = witness(v.va);
        if (!pa) return unexpected(pa.error());
        return virtual_claims(v.va, *pa, v.q, v.val);
    }

    Status<LedgerError> operator()(const node::PtePt& v) {
        auto pa = witness(v.va);
        if (!pa) return unexpected(pa.error());
        if (*pa != v.pa) {
            return unexpected(LedgerError{LedgerErrorKind::EvidenceInvalid, Location::walk(root_, v.va),
                                          "walk map resolves to " + hex(*pa) + ", assertion names " + hex(v.pa)});
        }
        return virtual_claims(v.va, v.pa, v.q, v.val);
    }

    Status<LedgerError> operator()(const node::Token& t) {
        auto pa = witness(t.va);
        if (!pa) return unexpected(pa.error());
        if (*pa != t.pa) {
            return unexpected(LedgerError{LedgerErrorKind::EvidenceInvalid, Location::walk(root_, t.va),
                                          "walk map resolves to " + hex(*pa) + ", token names " + hex(t.pa)});
        }
        return out_.add(Location::walk(root_, t.va), {t.q, t.pa});
    }

    Status<LedgerError> operator()(const node::WalkPt& w) {
        for (int level = 4; level >= 1; --level) {
            if (!decode_pte(w.entry(level)).present()) {
                return unexpected(LedgerError{LedgerErrorKind::EvidenceInvalid, Location::walk(root_, w.va),
                                              "level " + std::to_string(level) + " entry not present"});
            }
        }
        const std::uint64_t resolved = (decode_pte(w.l1e).frame().value() << 12) | (w.va & 0xFFF);
        if (resolved != w.pa) {
            return unexpected(LedgerError{LedgerErrorKind::EvidenceInvalid, Location::walk(root_, w.va),
                                          "entries resolve to " + hex(resolved) + ", not " + hex(w.pa)});
        }
        for (int level = 4; level >= 1; --level) {
            const PhysAddr slot = walk_slot(w, root_, level);
            if (auto ok = out_.add(Location::phys(slot.bytes()), {Fraction::entry_share(level), w.entry(level)}); !ok) {
                return ok;
            }
        }
        return {};
    }

    Status<LedgerError> operator()(const node::IASpace&) {
        if (!registry_.contains(root_)) {
            return unexpected(LedgerError{LedgerErrorKind::UnknownRoot, Location::space(root_), ""});
        }
        return out_.add(Location::space(root_), {Fraction::one(), root_});
    }

    Status<LedgerError> operator()(const node::OtherSpace& o) {
        const std::uint64_t saved = root_;
        root_ = o.root;
        auto ok = std::visit(*this, o.body.node());
        root_ = saved;
        return ok;
    }

    Status<LedgerError> operator()(const node::Sep& s) {
        for (const Assertion& p : s.parts) {
            if (auto ok = std::visit(*this, p.node()); !ok) return ok;
        }
        return {};
    }

    Status<LedgerError> operator()(const node::And&) {
        return unexpected(LedgerError{LedgerErrorKind::NotLowerable, Location{}, "conjunction has no ledger form"});
    }
    Status<LedgerError> operator()(const node::Or&) {
        return unexpected(LedgerError{LedgerErrorKind::NotLowerable, Location{}, "disjunction has no ledger form"});
    }

private:
    Expected<std::uint64_t, LedgerError> witness(std::uint64_t va) const {
        const WalkMap* theta = registry_.find(root_);
        if (theta == nullptr) return unexpected(LedgerError{LedgerErrorKind::UnknownRoot, Location::space(root_), ""});
        auto pa = theta->lookup(va);
        if (!pa) {
            return unexpected(LedgerError{LedgerErrorKind::UnresolvedWitness, Location::walk(root_, va),
                                          "va not in the walk map of " + hex(root_)});
        }
        return *pa;
    }

    Status<LedgerError> virtual_claims(std::uint64_t va, std::uint64_t pa, Fraction q, std::uint64_t val) {
        if (auto ok = out_.add(Location::walk(root_, va), {q, pa}); !ok) return ok;
        return out_.add(Location::phys(pa), {q, val});
    }

    ResourceLedger& out_;
    const Registry& registry_;
    std::uint64_t root_ = 0;
};

}  // namespace

Expected<ResourceLedger, LedgerError> lower(const Assertion& a, std::uint64_t root, const Registry& registry) {
    ResourceLedger out(root);
    Lowerer lw(out, registry);
    if (auto ok = lw.run(a, root); !ok) return unexpected(ok.error());
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

Assertion render(const ResourceLedger& ledger) {
    std::map<std::uint64_t, std::vector<Assertion>> by_root;  // governing root -> parts
    std::vector<Assertion> facts;
    std::map<std::uint64_t, Claim> phys;  // remaining physical claims
    for (const auto& [loc, claim] : ledger.claims()) {
        if (loc.kind == Location::Kind::Phys) phys.emplace(loc.a, claim);
    }
    for (const auto& [loc, claim] : ledger.claims()) {
        switch (loc.kind) {
            case Location::Kind::Reg:
                facts.push_back(reg_pt(static_cast<RegId>(loc.a), claim.value, claim.q));
                break;
            case Location::Kind::Space:
                by_root[loc.a].push_back(ia_space());
                break;
            case Location::Kind::Walk: {
                const std::uint64_t pa = claim.value;
                auto it = phys.find(pa);
                if (it == phys.end()) {
                    by_root[loc.a].push_back(token(loc.b, pa, claim.q));
                    break;
                }
                if (it->second.q >= claim.q) {
                    by_root[loc.a].push_back(virt_pt(loc.b, it->second.value, claim.q));
                    auto rest = frac_subtract(it->second.q, claim.q);
                    if (*rest) {
                        it->second.q = **rest;
                    } else {
                        phys.erase(it);
                    }
                } else {
                    by_root[loc.a].push_back(virt_pt(loc.b, it->second.value, it->second.q));
                    by_root[loc.a].push_back(token(loc.b, pa, **frac_subtract(claim.q, it->second.q)));
                    phys.erase(it);
                }
                break;
            }
            case Location::Kind::Phys:
                break;
        }
    }
    for (const auto& [addr, claim] : phys) facts.push_back(phys_pt(addr, claim.value, claim.q));

    std::vector<Assertion> parts = facts;
    for (auto& [root, rs] : by_root) {
        if (root == ledger.root()) {
            parts.insert(parts.end(), rs.begin(), rs.end());
        } else {
            parts.push_back(other_space(root, sep(rs)));
        }
    }
    return canonical(sep(parts));
}

}  // namespace vmodal
