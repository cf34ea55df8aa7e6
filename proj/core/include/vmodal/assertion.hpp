#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "vmodal/fraction.hpp"
#include "vmodal/machine.hpp"
#include "vmodal/registry.hpp"

namespace vmodal {

class Assertion;

// Closed pure-predicate language. All arguments are concrete words.
enum class PredKind {
    Eq,           // a == b
    Ne,           // a != b
    Aligned,      // a is 8-aligned
    PageAligned,  // a is 4K-aligned
    Present,      // bit 0 of entry a is set
    Unmapped,     // registry[root = a] has no walk for va = b
};

std::string_view pred_name(PredKind k);
std::size_t pred_arity(PredKind k);

namespace node {

struct Emp {};

struct Pure {
    PredKind kind;
    std::vector<std::uint64_t> args;
};

// reg |->r {q} val
struct RegPt {
    RegId reg;
    Fraction q;
    std::uint64_t val;
};

// phys frame:off |->a {q} val
struct PhysPt {
    std::uint64_t frame;
    std::uint64_t offset;
    Fraction q;
    std::uint64_t val;

    std::uint64_t address() const noexcept { return (frame << 12) | offset; }
};

// va |->v {q} val
struct VirtPt {
    std::uint64_t va;
    Fraction q;
    std::uint64_t val;
};

// va |->vpte {q} pa val : a virtual points-to with its physical address exposed.
struct PtePt {
    std::uint64_t va;
    Fraction q;
    std::uint64_t pa;
    std::uint64_t val;
};

// va |->tok {q} pa : a bare share of the ghost walk-map entry for va.
struct Token {
    std::uint64_t va;
    Fraction q;
    std::uint64_t pa;
};

// The physical page-table walk for va: four present entries at their slots,
// resolving va to pa. Owns 1/512^k of each level-k entry.
struct WalkPt {
    std::uint64_t va;
    std::uint64_t l4e;
    std::uint64_t l3e;
    std::uint64_t l2e;
    std::uint64_t l1e;
    std::uint64_t pa;

    std::uint64_t entry(int level) const noexcept;
};

// Per-address-space invariant of the governing root.
struct IASpace {};

struct OtherSpace;
struct Sep;
struct And;
struct Or;

}  // namespace node

using Node = std::variant<node::Emp, node::Pure, node::RegPt, node::PhysPt, node::VirtPt, node::PtePt, node::Token, node::WalkPt,
                          node::IASpace, node::OtherSpace, node::Sep, node::And, node::Or>;

// Immutable, cheaply copyable assertion tree.
class Assertion {
public:
    Assertion();  // emp
    Assertion(Node n);

    const Node& node() const noexcept;

    template <typename T>
    const T* as() const noexcept;
    template <typename T>
    bool is() const noexcept;

    // Grammar text; parse(to_string(a)) reproduces a.
    std::string to_string() const;

private:
    std::shared_ptr<const Node> node_;
};

namespace node {

// [root](body)
struct OtherSpace {
    std::uint64_t root;
    Assertion body;
};

struct Sep {
    std::vector<Assertion> parts;
};

struct And {
    std::vector<Assertion> parts;
};

struct Or {
    std::vector<Assertion> parts;
};

}  // namespace node

inline const Node& Assertion::node() const noexcept { return *node_; }

template <typename T>
const T* Assertion::as() const noexcept {
    return std::get_if<T>(node_.get());
}

template <typename T>
bool Assertion::is() const noexcept {
    return std::holds_alternative<T>(*node_);
}

// Constructors.
Assertion emp();
Assertion pure(PredKind kind, std::vector<std::uint64_t> args);
Assertion reg_pt(RegId reg, std::uint64_t val, Fraction q = Fraction::one());
Assertion phys_pt(std::uint64_t address, std::uint64_t val, Fraction q = Fraction::one());
Assertion virt_pt(std::uint64_t va, std::uint64_t val, Fraction q = Fraction::one());
Assertion pte_pt(std::uint64_t va, std::uint64_t pa, std::uint64_t val, Fraction q = Fraction::one());
Assertion token(std::uint64_t va, std::uint64_t pa, Fraction q = Fraction::one());
Assertion walk_pt(std::uint64_t va, std::uint64_t l4e, std::uint64_t l3e, std::uint64_t l2e, std::uint64_t l1e,
                  std::uint64_t pa);
Assertion ia_space();
Assertion other_space(std::uint64_t root, Assertion body);
Assertion sep(std::vector<Assertion> parts);
Assertion conj(std::vector<Assertion> parts);
Assertion disj(std::vector<Assertion> parts);

// Flattens nested Sep and orders Sep parts canonically (by text); Sep is a
// multiset, so this is the representative used for equality.
Assertion canonical(const Assertion& a);

// Equality up to Sep reordering and flattening.
bool operator==(const Assertion& a, const Assertion& b);

// True when the assertion's meaning does not depend on the evaluation root:
// no root-relative node (virtual, PTE, token, walk, IASpace) outside an OtherSpace.
bool is_fact(const Assertion& a);

// Pushes OtherSpace through Sep/And/Or, collapses nested OtherSpace,
// erases OtherSpace around Facts, flattens Sep/And/Or and drops Emp units.
// Idempotent.
Assertion normalize(const Assertion& a);

// Top-level conjuncts of a Sep (or the assertion itself).
std::vector<Assertion> conjuncts(const Assertion& a);

// Truth of a pure predicate; Unmapped consults the registry.
bool eval_pure(const node::Pure& p, const Registry& registry);

// The walk of `va` under `root` as a WalkPt, read from machine memory.
// Fails with the walk's fault.
Expected<Assertion, Fault> walk_evidence(std::uint64_t root, const PhysMemory& mem, std::uint64_t va);

// Physical slot of the level-`level` entry of `walk` when evaluated at `root`.
PhysAddr walk_slot(const node::WalkPt& walk, std::uint64_t root, int level);

}  // namespace vmodal
