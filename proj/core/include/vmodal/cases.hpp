#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vmodal/assertion.hpp"
#include "vmodal/checker.hpp"
#include "vmodal/config.hpp"

namespace vmodal {

struct CaseStudy {
    std::string name;
    Assertion pre;
    std::uint64_t root = 0;
    Script script;
    StubTable stubs;
    Assertion expected_post;
    StateConfig fixture;

    CheckSetup setup(CheckMode mode = CheckMode::Coexec) const;
};

// Fixed addresses used by the fixtures.
namespace layout {
inline constexpr std::uint64_t kRoot = 0x10000;         // address space of map/unmap and swtch's first space
inline constexpr std::uint64_t kOtherRoot = 0x40000;    // swtch's second space
inline constexpr std::uint64_t kMapVa = 0x400000;       // page mapped by map_new_page
inline constexpr std::uint64_t kPteWindow = 0x600000;   // virtual window onto the L1 table of kMapVa
inline constexpr std::uint64_t kFreeFrame = 0x30;       // first frame on the free list
inline constexpr std::uint64_t kSaveBlock = 0x500000;   // swtch rdi
inline constexpr std::uint64_t kLoadBlock = 0x501000;   // swtch rsi
inline constexpr std::uint64_t kStackSlot = 0x7ff000;   // return slot, mapped differently in each space
}  // namespace layout

// map_new_page, map_new_page_full, unmap_page, swtch.
std::vector<std::string> case_names();

Expected<CaseStudy, std::string> case_study(std::string_view name);

// Writes program.vasm, state.json, pre.txt and post.txt into dir.
Status<std::string> emit_case(const CaseStudy& c, const std::filesystem::path& dir);

}  // namespace vmodal
