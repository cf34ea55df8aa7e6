#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>

#include "vmodal/machine.hpp"
#include "vmodal/registry.hpp"
#include "vmodal/syntax.hpp"

namespace vmodal {

// Initial machine, address-space registry and allocator free list.
//
//   {
//     "registers": { "rdi": "0x200000", "cr3": "0x1000" },
//     "frames":    { "0x1": { "0x0": "0x2003" }, "0x5": {} },
//     "spaces":    { "0x1000": { "0x200000": "0x5000" } },
//     "free_frames": [ "0x9" ]
//   }
//
// Numbers are 0x-hex strings. Registers that are zero and words that are
// zero are omitted when printing.
struct StateConfig {
    MachineState state;
    Registry registry;
    std::deque<std::uint64_t> free_frames;

    friend bool operator==(const StateConfig&, const StateConfig&) = default;
};

Expected<StateConfig, ParseError> parse_config(std::string_view text);

// Canonical text; parse_config(print_config(c)) == c.
std::string print_config(const StateConfig& config);

}  // namespace vmodal
