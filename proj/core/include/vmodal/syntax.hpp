#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "vmodal/assertion.hpp"
#include "vmodal/checker.hpp"
#include "vmodal/expected.hpp"

namespace vmodal {

struct ParseError {
    std::size_t line = 0;    // 1-based; 0 when not tied to a position
    std::size_t column = 0;  // 1-based
    std::vector<std::string> expected;
    std::string found;
    std::string message;

    std::string describe() const;
};

// Assertion text:
//   A    ::= C ("||" C)*
//   C    ::= S ("&&" S)*
//   S    ::= atom ("*" atom)*
//   atom ::= "emp" | "iaspace" | "(" A ")" | "[" W "]" "(" A ")" | "pure" "(" PRED W* ")"
//          | REG "|->r" FR? W | "phys" W ":" W "|->a" FR? W
//          | W "|->v" FR? W | W "|->vpte" FR? W W | W "|->tok" FR? W
//          | "l4l1" "(" W "," W "," W "," W "," W "," W ")"
//   FR   ::= "{" INT "/" INT "}" | "{" "1" "}"
Expected<Assertion, ParseError> parse_assertion(std::string_view text);

// One statement per line, ';' starts a comment:
//   mov r, r | mov r, IMM | add r, IMM | mov r, [r+D] | mov [r+D], r
//   mov cr3, r | mov cr3, [r+D] | mov [r+D], cr3 | mov r, cr3 | skip
//   call NAME | @ghost insert_walk va=E pa=E | @ghost remove_walk va=E
//   @ghost pte_to_virt va=E | @assert { A }
Expected<Script, ParseError> parse_program(std::string_view text);

std::string print_program(const Script& script);

}  // namespace vmodal
