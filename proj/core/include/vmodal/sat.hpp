#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vmodal/assertion.hpp"
#include "vmodal/machine.hpp"
#include "vmodal/registry.hpp"

namespace vmodal {

// First leaf that does not hold, with what the machine showed instead.
struct MismatchReport {
    std::string leaf;
    std::string observed;
    std::optional<Fault> fault;

    std::string describe() const;
};

// Ground-truth satisfaction of `a` by the machine, evaluated with `root` as
// the current page-table root. Sep parts are checked independently; And
// needs every part, Or needs one.
Status<MismatchReport> machine_sat(const Assertion& a, std::uint64_t root, const MachineState& state,
                                   const Registry& registry);

}  // namespace vmodal
