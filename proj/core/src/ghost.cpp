#include "vmodal/ghost.hpp"

#include "vmodal/format.hpp"

namespace vmodal {

std::string_view ghost_error_name(GhostErrorKind k) {
    switch (k) {
        case GhostErrorKind::UnknownRoot: return "UnknownRoot";
        case GhostErrorKind::AlreadyMapped: return "AlreadyMapped";
        case GhostErrorKind::NotMapped: return "NotMapped";
        case GhostErrorKind::EvidenceInvalid: return "EvidenceInvalid";
        case GhostErrorKind::InsufficientToken: return "InsufficientToken";
        case GhostErrorKind::SumExceedsOne: return "SumExceedsOne";
    }
    return "?";
}

std::string GhostError::describe() const {
    std::string out = std::string(ghost_error_name(kind)) + " at va " + hex(va);
    if (!detail.empty()) out += ": " + detail;
    return out;
}

std::string IasDefect::describe() const {
    std::string out = "va " + hex(va) + " expected " + hex(expected) + ", ";
    if (fault) return out + fault->describe();
    return out + "resolved to " + hex(got.value_or(0));
}

Expected<std::vector<IasDefect>, GhostError> ias_check(const PhysMemory& mem, std::uint64_t root,
                                                       const Registry& registry) {
    const WalkMap* theta = registry.find(root);
    if (theta == nullptr) return unexpected(GhostError{GhostErrorKind::UnknownRoot, 0, "root " + hex(root)});
    std::vector<IasDefect> defects;
    for (const auto& [va, pa] : *theta) {
        auto got = translate(root, mem, va);
        if (!got) {
            defects.push_back({va, pa, got.error(), std::nullopt});
        } else if (got->bytes() != pa) {
            defects.push_back({va, pa, std::nullopt, got->bytes()});
        }
    }
    return defects;
}

// ---------------------------------------------------------------------------

std::optional<Fraction> TokenBank::find(std::uint64_t root, std::uint64_t va) const {
    auto it = tokens_.find({root, va});
    if (it == tokens_.end()) return std::nullopt;
    return it->second;
}

Status<GhostError> TokenBank::grant(std::uint64_t root, std::uint64_t va) {
    if (tokens_.contains({root, va})) {
        return unexpected(GhostError{GhostErrorKind::AlreadyMapped, va, "token already issued"});
    }
    tokens_.emplace(Key{root, va}, Fraction::one());
    return {};
}

Status<GhostError> TokenBank::give(std::uint64_t root, std::uint64_t va, Fraction q) {
    auto it = tokens_.find({root, va});
    if (it == tokens_.end()) {
        tokens_.emplace(Key{root, va}, q);
        return {};
    }
    auto sum = frac_combine(it->second, q);
    if (!sum) {
        return unexpected(GhostError{GhostErrorKind::SumExceedsOne, va, it->second.to_string() + " + " + q.to_string()});
    }
    it->second = *sum;
    return {};
}

Status<GhostError> TokenBank::take(std::uint64_t root, std::uint64_t va, Fraction q) {
    auto it = tokens_.find({root, va});
    if (it == tokens_.end() || it->second < q) {
        return unexpected(GhostError{GhostErrorKind::InsufficientToken, va, "needs " + q.to_string()});
    }
    auto rest = frac_subtract(it->second, q);
    if (*rest) {
        it->second = **rest;
    } else {
        tokens_.erase(it);
    }
    return {};
}

Status<GhostError> TokenBank::retire(std::uint64_t root, std::uint64_t va) {
    auto it = tokens_.find({root, va});
    if (it == tokens_.end() || !it->second.is_one()) {
        const std::string held = it == tokens_.end() ? "none" : it->second.to_string();
        return unexpected(GhostError{GhostErrorKind::InsufficientToken, va, "holds " + held + ", needs 1"});
    }
    tokens_.erase(it);
    return {};
}

// ---------------------------------------------------------------------------

Status<GhostError> validate_walk(const node::WalkPt& evidence, std::uint64_t root, const PhysMemory& mem) {
    for (int level = 4; level >= 1; --level) {
        const std::uint64_t e = evidence.entry(level);
        if (!decode_pte(e).present()) {
            return unexpected(GhostError{GhostErrorKind::EvidenceInvalid, evidence.va,
                                         "level " + std::to_string(level) + " entry not present"});
        }
        const PhysAddr slot = walk_slot(evidence, root, level);
        auto got = mem.read(slot);
        if (!got || *got != e) {
            return unexpected(GhostError{GhostErrorKind::EvidenceInvalid, evidence.va,
                                         "level " + std::to_string(level) + " entry at " + hex(slot.bytes()) +
                                             " is not " + hex(e)});
        }
    }
    const std::uint64_t resolved = (decode_pte(evidence.l1e).frame().value() << 12) | (evidence.va & 0xFFF);
    if (resolved != evidence.pa) {
        return unexpected(GhostError{GhostErrorKind::EvidenceInvalid, evidence.va,
                                     "walk resolves to " + hex(resolved) + ", not " + hex(evidence.pa)});
    }
    return {};
}

Status<GhostError> ghost_insert_walk(WalkMap& theta, TokenBank& tokens, std::uint64_t root, std::uint64_t va,
                                     std::uint64_t pa, const node::WalkPt& evidence, const PhysMemory& mem) {
    if (theta.contains(va)) return unexpected(GhostError{GhostErrorKind::AlreadyMapped, va, ""});
    if (evidence.va != va || evidence.pa != pa) {
        return unexpected(GhostError{GhostErrorKind::EvidenceInvalid, va, "evidence is for another mapping"});
    }
    if (auto ok = validate_walk(evidence, root, mem); !ok) return ok;
    if (auto ok = theta.insert(va, pa); !ok) {
        return unexpected(GhostError{GhostErrorKind::EvidenceInvalid, va, ok.error()});
    }
    if (auto ok = tokens.grant(root, va); !ok) {
        theta.erase(va);
        return ok;
    }
    return {};
}

Expected<std::uint64_t, GhostError> ghost_remove_walk(WalkMap& theta, TokenBank& tokens, std::uint64_t root,
                                                      std::uint64_t va) {
    auto pa = theta.lookup(va);
    if (!pa) return unexpected(GhostError{GhostErrorKind::NotMapped, va, ""});
    if (auto ok = tokens.retire(root, va); !ok) return unexpected(ok.error());
    theta.erase(va);
    return *pa;
}

node::VirtPt pte_to_virt(const node::PtePt& claim) { return {claim.va, claim.q, claim.val}; }

Expected<node::PtePt, GhostError> virt_to_pte(const node::VirtPt& claim, std::uint64_t pa, std::uint64_t root,
                                              const PhysMemory& mem) {
    auto got = translate(root, mem, claim.va);
    if (!got) return unexpected(GhostError{GhostErrorKind::EvidenceInvalid, claim.va, got.error().describe()});
    if (got->bytes() != pa) {
        return unexpected(GhostError{GhostErrorKind::EvidenceInvalid, claim.va,
                                     "translates to " + hex(got->bytes()) + ", not " + hex(pa)});
    }
    return node::PtePt{claim.va, claim.q, pa, claim.val};
}

}  // namespace vmodal
