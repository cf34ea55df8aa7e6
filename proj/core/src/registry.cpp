#include "vmodal/registry.hpp"

#include "vmodal/format.hpp"

namespace vmodal {

std::optional<std::uint64_t> WalkMap::lookup(std::uint64_t va) const {
    auto it = map_.find(va);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

Status<std::string> WalkMap::insert(std::uint64_t va, std::uint64_t pa) {
    if ((va & 7) != 0 || (pa & 7) != 0) return unexpected("walk map keys and values must be 8-aligned: " + hex(va));
    if (!map_.try_emplace(va, pa).second) return unexpected("va " + hex(va) + " already mapped");
    return {};
}

Status<std::string> Registry::create_space(std::uint64_t root) {
    if ((root & 0xFFF) != 0) return unexpected("root " + hex(root) + " is not 4K-aligned");
    if (!spaces_.try_emplace(root).second) return unexpected("root " + hex(root) + " already registered");
    return {};
}

const WalkMap* Registry::find(std::uint64_t root) const {
    auto it = spaces_.find(root);
    return it == spaces_.end() ? nullptr : &it->second;
}

WalkMap* Registry::find(std::uint64_t root) {
    auto it = spaces_.find(root);
    return it == spaces_.end() ? nullptr : &it->second;
}

}  // namespace vmodal
