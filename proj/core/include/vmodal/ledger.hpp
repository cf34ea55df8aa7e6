#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "vmodal/assertion.hpp"
#include "vmodal/fraction.hpp"
#include "vmodal/machine.hpp"
#include "vmodal/registry.hpp"

namespace vmodal {

// A resource location. Reg and Phys locations are root-independent;
// Walk and Space locations are keyed by the address space they belong to.
struct Location {
    enum class Kind : std::uint8_t { Reg, Phys, Walk, Space };

    Kind kind = Kind::Reg;
    std::uint64_t a = 0;  // Reg: register index; Phys: byte address; Walk/Space: root
    std::uint64_t b = 0;  // Walk: va

    static Location reg(RegId r) { return {Kind::Reg, reg_index(r), 0}; }
    static Location phys(std::uint64_t address) { return {Kind::Phys, address, 0}; }
    static Location walk(std::uint64_t root, std::uint64_t va) { return {Kind::Walk, root, va}; }
    static Location space(std::uint64_t root) { return {Kind::Space, root, 0}; }

    bool is_fact() const noexcept { return kind == Kind::Reg || kind == Kind::Phys; }
    std::optional<std::uint64_t> root() const noexcept;

    std::string describe() const;

    friend bool operator==(const Location&, const Location&) = default;
    friend auto operator<=>(const Location&, const Location&) = default;
};

// Fractional share of a location and the value all shares agree on. For
// Walk locations the value is the physical word address the va resolves to;
// for Space locations it is the root itself.
struct Claim {
    Fraction q;
    std::uint64_t value = 0;

    friend bool operator==(const Claim&, const Claim&) = default;
};

enum class LedgerErrorKind {
    SumExceedsOne,
    ValueDisagreement,
    RootMismatch,
    Overflow,
    MissingResource,
    InsufficientFraction,
    UnknownRoot,
    UnresolvedWitness,
    EvidenceInvalid,
    PureFalse,
    NotLowerable,
    BadRegister,
};

std::string_view ledger_error_name(LedgerErrorKind k);

struct LedgerError {
    LedgerErrorKind kind;
    Location location;
    std::string detail;

    std::string describe() const;
};

// Concrete multiset of fractional ownership claims, evaluated relative to a
// current page-table root. Claims whose governing root differs from the
// evaluation root are the ones held under an other-space modality.
class ResourceLedger {
public:
    using Map = std::map<Location, Claim>;

    explicit ResourceLedger(std::uint64_t root = 0) : root_(root) {}

    std::uint64_t root() const noexcept { return root_; }
    void set_root(std::uint64_t r) noexcept { root_ = r; }

    const Map& claims() const noexcept { return claims_; }
    std::optional<Claim> find(const Location& loc) const;
    bool empty() const noexcept { return claims_.empty(); }
    std::size_t size() const noexcept { return claims_.size(); }

    // Adds a share, summing fractions and requiring value agreement.
    Status<LedgerError> add(const Location& loc, const Claim& claim);

    // Removes `q` of the share at loc; MissingResource / InsufficientFraction.
    Status<LedgerError> take(const Location& loc, Fraction q);

    // Requires at least `q` at loc and returns the held claim.
    Expected<Claim, LedgerError> require(const Location& loc, Fraction q) const;

    // Changes the value at loc; requires full ownership.
    Status<LedgerError> update(const Location& loc, std::uint64_t value);

    // Sub-ledger inclusion: every claim of `sub` is held here with at least
    // its fraction and the same value.
    Status<LedgerError> includes(const ResourceLedger& sub) const;

    // this minus sub; fails where includes() would.
    Expected<ResourceLedger, LedgerError> subtract(const ResourceLedger& sub) const;

    friend bool operator==(const ResourceLedger&, const ResourceLedger&) = default;

private:
    std::uint64_t root_;
    Map claims_;
};

// Separating conjunction of two ledgers over the same evaluation root.
Expected<ResourceLedger, LedgerError> ledger_join(const ResourceLedger& a, const ResourceLedger& b);

// Lowers an assertion at evaluation root `root`. Root-relative nodes are keyed
// by their innermost governing root; virtual points-to witnesses (the backing
// physical address) come from that root's walk map in `registry`.
Expected<ResourceLedger, LedgerError> lower(const Assertion& a, std::uint64_t root, const Registry& registry);

// Renders the ledger as an assertion at its evaluation root, pairing Walk and
// Phys claims of equal fraction into virtual points-to and wrapping claims of
// other roots in [r](...). Unpaired walk tokens and their physical claims are
// rendered as PtePt with the larger share split off as Phys.
Assertion render(const ResourceLedger& ledger);

}  // namespace vmodal
