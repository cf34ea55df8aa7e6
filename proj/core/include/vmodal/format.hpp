#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace vmodal {

// "0x" followed by lowercase hex digits, no padding.
std::string hex(std::uint64_t v);

// Accepts 0x-hex or decimal; rejects trailing junk and overflow.
std::optional<std::uint64_t> parse_number(std::string_view text);

}  // namespace vmodal
