#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "vmodal/expected.hpp"

namespace vmodal {

// Ghost walk map of one address space: 8-aligned virtual word address ->
// the physical word address it must translate to.
class WalkMap {
public:
    using Map = std::map<std::uint64_t, std::uint64_t>;

    std::optional<std::uint64_t> lookup(std::uint64_t va) const;
    bool contains(std::uint64_t va) const { return map_.contains(va); }
    // Rejects unaligned keys and already-present keys.
    Status<std::string> insert(std::uint64_t va, std::uint64_t pa);
    bool erase(std::uint64_t va) { return map_.erase(va) != 0; }

    std::size_t size() const noexcept { return map_.size(); }
    bool empty() const noexcept { return map_.empty(); }
    Map::const_iterator begin() const { return map_.begin(); }
    Map::const_iterator end() const { return map_.end(); }

    friend bool operator==(const WalkMap&, const WalkMap&) = default;

private:
    Map map_;
};

// The global map from page-table roots to their address spaces' walk maps.
// Roots double as the ghost names of their spaces.
class Registry {
public:
    // Registers a new root with an empty walk map.
    Status<std::string> create_space(std::uint64_t root);

    bool contains(std::uint64_t root) const { return spaces_.contains(root); }
    const WalkMap* find(std::uint64_t root) const;
    WalkMap* find(std::uint64_t root);

    const std::map<std::uint64_t, WalkMap>& spaces() const noexcept { return spaces_; }

    friend bool operator==(const Registry&, const Registry&) = default;

private:
    std::map<std::uint64_t, WalkMap> spaces_;
};

}  // namespace vmodal
