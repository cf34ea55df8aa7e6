#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vmodal/assertion.hpp"
#include "vmodal/fraction.hpp"
#include "vmodal/machine.hpp"
#include "vmodal/registry.hpp"

namespace vmodal {

enum class GhostErrorKind { UnknownRoot, AlreadyMapped, NotMapped, EvidenceInvalid, InsufficientToken, SumExceedsOne };

std::string_view ghost_error_name(GhostErrorKind k);

struct GhostError {
    GhostErrorKind kind;
    std::uint64_t va = 0;
    std::string detail;

    std::string describe() const;
};

// A walk-map entry whose translation does not hold in memory.
struct IasDefect {
    std::uint64_t va;
    std::uint64_t expected;             // pa recorded in the walk map
    std::optional<Fault> fault;         // set when the walk faulted
    std::optional<std::uint64_t> got;   // set when the walk resolved elsewhere

    std::string describe() const;
    friend bool operator==(const IasDefect&, const IasDefect&) = default;
};

// Checks every (va, pa) of the root's walk map against the page tables in
// `mem` (no accessed-bit writes). An empty result means the invariant holds.
Expected<std::vector<IasDefect>, GhostError> ias_check(const PhysMemory& mem, std::uint64_t root,
                                                       const Registry& registry);

// Walk-map tokens held outside the authoritative map, keyed by (root, va).
class TokenBank {
public:
    using Key = std::pair<std::uint64_t, std::uint64_t>;

    // Share currently held, if any.
    std::optional<Fraction> find(std::uint64_t root, std::uint64_t va) const;

    // Issues the full token; fails if any share is outstanding.
    Status<GhostError> grant(std::uint64_t root, std::uint64_t va);
    // Returns a share to the bank.
    Status<GhostError> give(std::uint64_t root, std::uint64_t va, Fraction q);
    // Takes a share out of the bank.
    Status<GhostError> take(std::uint64_t root, std::uint64_t va, Fraction q);
    // Destroys the full token.
    Status<GhostError> retire(std::uint64_t root, std::uint64_t va);

    const std::map<Key, Fraction>& entries() const noexcept { return tokens_; }

private:
    std::map<Key, Fraction> tokens_;
};

// Records va -> pa in the walk map of `root`, justified by `evidence`, and
// grants the full token. Evidence must be present at all levels, sit at its
// slots in `mem`, and resolve va to pa.
Status<GhostError> ghost_insert_walk(WalkMap& theta, TokenBank& tokens, std::uint64_t root, std::uint64_t va,
                                     std::uint64_t pa, const node::WalkPt& evidence, const PhysMemory& mem);

// Removes va from the walk map; needs the full token. Returns the physical
// word the mapping resolved to, whose data claim goes back to the caller.
Expected<std::uint64_t, GhostError> ghost_remove_walk(WalkMap& theta, TokenBank& tokens, std::uint64_t root,
                                                      std::uint64_t va);

node::VirtPt pte_to_virt(const node::PtePt& claim);

// Re-exposes the physical address; `pa` must be what va translates to.
Expected<node::PtePt, GhostError> virt_to_pte(const node::VirtPt& claim, std::uint64_t pa, std::uint64_t root,
                                              const PhysMemory& mem);

// Checks that `evidence` is a present walk found in `mem` under `root`.
Status<GhostError> validate_walk(const node::WalkPt& evidence, std::uint64_t root, const PhysMemory& mem);

}  // namespace vmodal
