#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "vmodal/assertion.hpp"
#include "vmodal/ledger.hpp"
#include "vmodal/machine.hpp"
#include "vmodal/registry.hpp"

namespace vmodal {

// ---------------------------------------------------------------------------
// Scripts

// REG, NUM, REG+NUM or REG-NUM.
struct Expr {
    std::optional<RegId> reg;
    std::uint64_t imm = 0;
    bool negative = false;

    std::string to_string() const;
    friend bool operator==(const Expr&, const Expr&) = default;
};

enum class GhostOp { InsertWalk, RemoveWalk, PteToVirt };

std::string_view ghost_op_name(GhostOp op);

struct GhostCmd {
    GhostOp op;
    Expr va;
    std::optional<Expr> pa;  // insert_walk only

    friend bool operator==(const GhostCmd&, const GhostCmd&) = default;
};

struct Call {
    std::string name;
    friend bool operator==(const Call&, const Call&) = default;
};

struct AssertNow {
    Assertion assertion;
    friend bool operator==(const AssertNow& a, const AssertNow& b) { return a.assertion == b.assertion; }
};

using Step = std::variant<Instr, GhostCmd, Call, AssertNow>;
using Script = std::vector<Step>;

// One line of program text for the step.
std::string to_string(const Step& step);

// The machine instructions of a script, in order.
std::vector<Instr> instructions_of(const Script& script);

// ---------------------------------------------------------------------------
// Stubs

enum class CheckMode { ResourceOnly, Coexec };

std::string_view check_mode_name(CheckMode m);

// What a stub sees when called. Register values are the ones the ledger
// records; the machine is the stub's model of the world and is updated by it.
struct StubEnv {
    const ResourceLedger& ledger;
    const Registry& registry;
    std::uint64_t root;
    MachineState& machine;
    std::deque<std::uint64_t>& free_frames;

    std::optional<std::uint64_t> reg(RegId r) const;
};

// An axiomatized procedure: a precondition the caller gives up and a
// deterministic effect that yields the postcondition it hands back.
struct StubSpec {
    std::string name;
    std::function<Expected<Assertion, std::string>(const StubEnv&)> consumes;
    std::function<Expected<Assertion, std::string>(StubEnv&)> effect;
};

using StubTable = std::map<std::string, StubSpec, std::less<>>;

// ensure_L1_page, alloc_phys_page_or_panic and alloc_zeroed_page.
StubTable builtin_stubs();

// ---------------------------------------------------------------------------
// Violations and reports

enum class ViolationKind {
    MissingResource,
    InsufficientFraction,
    ValueDisagreement,
    UnsoundFrame,
    UnknownRoot,
    StubPreFailed,
    MachineDisagree,
    PreconditionFailed,
    AssertionFalse,
    InvalidAssertion,
    GhostRejected,
};

std::string_view violation_kind_name(ViolationKind k);

enum class Phase { Pre, Step, Post };

struct Violation {
    ViolationKind kind;
    Phase phase = Phase::Step;
    std::size_t step = 0;
    std::optional<std::size_t> pc;  // machine pc, for MachineDisagree
    std::string location;
    std::string narrative;

    std::string describe() const;
};

struct StepRecord {
    std::size_t index;
    std::string text;
    std::string rule;
    std::vector<std::string> consumed;
    std::vector<std::string> produced;
    std::uint64_t root_before;
    std::uint64_t root_after;
};

// A bare root-relative claim carried unchanged across a cr3 write.
struct FrameWarning {
    Assertion claim;
    std::size_t step;  // the first cr3-writing step

    std::string describe() const;
};

// Walk evidence owned by the IASpace invariant of a root: root -> va -> walk.
using Footprint = std::map<std::uint64_t, std::map<std::uint64_t, node::WalkPt>>;

struct CheckerCtx {
    ResourceLedger ledger;
    std::uint64_t root = 0;
    Registry registry;
    Footprint footprint;
    MachineState machine;
    CheckMode mode = CheckMode::Coexec;
    std::deque<std::uint64_t> free_frames;
    std::set<std::uint64_t> left_roots;  // roots switched away from during the double
};

struct CheckSetup {
    MachineState init;
    Registry registry;
    std::deque<std::uint64_t> free_frames;
    CheckMode mode = CheckMode::Coexec;
};

struct Report {
    CheckerCtx ctx;
    std::vector<StepRecord> steps;
    std::optional<Violation> violation;
    std::vector<FrameWarning> frame_warnings;

    bool ok() const noexcept { return !violation; }
    std::string to_text() const;
    std::string to_json() const;
};

// Builds the initial context: lowers the precondition, seeds the IASpace
// footprints from the initial machine, and in coexec mode checks that the
// machine satisfies the precondition with cr3 = root.
Expected<CheckerCtx, Violation> make_context(const Assertion& pre, std::uint64_t root, const CheckSetup& setup);

// Applies one step's rule to the context.
Status<Violation> apply_rule(CheckerCtx& ctx, const Step& step, std::size_t index, const StubTable& stubs,
                             StepRecord* record = nullptr);

// {pre}_root script, optionally followed by an inclusion check of `post`.
Report check_double(const Assertion& pre, std::uint64_t root, const Script& script, const StubTable& stubs,
                    const CheckSetup& setup, const std::optional<Assertion>& post = std::nullopt);

// Continues from the final context of an accepted report.
Report resume_double(const Report& from, const Script& script, const StubTable& stubs,
                     const std::optional<Assertion>& post = std::nullopt);

// Static advisory pass: bare root-relative conjuncts of `pre` that no step
// touches but that are carried across a cr3 write.
std::vector<FrameWarning> frame_audit(const Assertion& pre, std::uint64_t root, const Script& script);

// Claims of the ledger that the machine contradicts, empty when it agrees.
std::vector<std::string> ledger_disagreements(const CheckerCtx& ctx);

}  // namespace vmodal
