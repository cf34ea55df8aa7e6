#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vmodal/machine.hpp"

namespace oracle {

// Flat word store: physical byte address -> word, plus the set of frames
// that exist. Kept apart from vmodal::PhysMemory on purpose.
struct FlatMemory {
    std::set<std::uint64_t> frames;
    std::map<std::uint64_t, std::uint64_t> words;

    bool has(std::uint64_t byte_address) const { return frames.count(byte_address / 4096) != 0; }
    std::uint64_t get(std::uint64_t byte_address) const {
        auto it = words.find(byte_address);
        return it == words.end() ? 0 : it->second;
    }
    vmodal::PhysMemory to_phys() const;
};

// Bits [lo, hi] of v, read one bit at a time.
std::uint64_t slice(std::uint64_t v, unsigned lo, unsigned hi);

struct Outcome {
    bool ok = false;
    std::uint64_t pa = 0;
    std::string fault;  // "NotPresent" or "FrameUnmapped"
    int level = 0;      // NotPresent only
    std::uint64_t address = 0;

    bool operator==(const Outcome&) const = default;
};

std::string to_string(const Outcome& o);

Outcome naive_translate(std::uint64_t root, const FlatMemory& mem, std::uint64_t va);

Outcome from_vmodal(const vmodal::Expected<vmodal::PhysAddr, vmodal::Fault>& r);

// Sparse random tables with a mix of present, non-present and dangling
// entries. Returns the root and fills `mapped` with addresses likely to
// resolve.
struct RandomTables {
    FlatMemory mem;
    std::uint64_t root = 0;
    std::vector<std::uint64_t> interesting;
};

RandomTables random_tables(std::mt19937_64& rng);

// An address near one of the interesting ones, or a uniformly random one.
std::uint64_t random_va(std::mt19937_64& rng, const RandomTables& t);

}  // namespace oracle
