#include "vmodal/config.hpp"

#include <json.hpp>

#include "vmodal/format.hpp"

namespace vmodal {

namespace {

using Json = nlohmann::ordered_json;

struct ConfigError {
    std::string message;
};

std::uint64_t num(const Json& j, const std::string& what) {
    if (!j.is_string()) throw ConfigError{what + " must be a hex string"};
    auto v = parse_number(j.get<std::string>());
    if (!v) throw ConfigError{what + ": bad number '" + j.get<std::string>() + "'"};
    return *v;
}

std::uint64_t key(const std::string& k, const std::string& what) {
    auto v = parse_number(k);
    if (!v) throw ConfigError{what + ": bad number '" + k + "'"};
    return *v;
}

const Json& object(const Json& j, const std::string& what) {
    if (!j.is_object()) throw ConfigError{what + " must be an object"};
    return j;
}

StateConfig from_json(const Json& j) {
    object(j, "config");
    for (const auto& [k, _] : j.items()) {
        if (k != "registers" && k != "frames" && k != "spaces" && k != "free_frames") {
            throw ConfigError{"unknown field '" + k + "'"};
        }
    }
    StateConfig c;
    if (j.contains("registers")) {
        for (const auto& [name, v] : object(j["registers"], "registers").items()) {
            auto r = parse_reg(name);
            if (!r) throw ConfigError{"unknown register '" + name + "'"};
            c.state.set_reg(*r, num(v, name));
        }
    }
    if (j.contains("frames")) {
        for (const auto& [fk, words] : object(j["frames"], "frames").items()) {
            const std::uint64_t frame = key(fk, "frame");
            if (frame >> 52) throw ConfigError{"frame " + fk + " exceeds 52 bits"};
            c.state.mem.add_frame(frame);
            for (const auto& [ok, v] : object(words, "frame " + fk).items()) {
                const std::uint64_t off = key(ok, "offset");
                if (off >= kPageSize || !word_aligned(off)) throw ConfigError{"offset " + ok + " is not an 8-aligned page offset"};
                c.state.mem.write(PhysAddr::from_bytes((frame << 12) | off), num(v, "word"));
            }
        }
    }
    if (j.contains("spaces")) {
        for (const auto& [rk, walks] : object(j["spaces"], "spaces").items()) {
            const std::uint64_t root = key(rk, "root");
            if (auto ok = c.registry.create_space(root); !ok) throw ConfigError{ok.error()};
            WalkMap* theta = c.registry.find(root);
            for (const auto& [vk, pa] : object(walks, "space " + rk).items()) {
                if (auto ok = theta->insert(key(vk, "va"), num(pa, "pa")); !ok) throw ConfigError{ok.error()};
            }
        }
    }
    if (j.contains("free_frames")) {
        if (!j["free_frames"].is_array()) throw ConfigError{"free_frames must be an array"};
        for (const Json& f : j["free_frames"]) c.free_frames.push_back(num(f, "free frame"));
    }
    return c;
}

}  // namespace

Expected<StateConfig, ParseError> parse_config(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // Map the byte offset back to a line and column.
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        return unexpected(ParseError{line, col, {}, "", "invalid JSON"});
    }
    try {
        return from_json(j);
    } catch (const ConfigError& e) {
        return unexpected(ParseError{0, 0, {}, "", e.message});
    }
}

std::string print_config(const StateConfig& c) {
    Json j = Json::object();
    Json regs = Json::object();
    for (std::size_t i = 0; i < kRegCount; ++i) {
        const auto r = static_cast<RegId>(i);
        if (c.state.reg(r) != 0) regs[std::string(reg_name(r))] = hex(c.state.reg(r));
    }
    j["registers"] = regs;
    Json frames = Json::object();
    for (const auto& [frame, words] : c.state.mem.frames()) {
        Json w = Json::object();
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (words[i] != 0) w[hex(i * 8)] = hex(words[i]);
        }
        frames[hex(frame)] = w;
    }
    j["frames"] = frames;
    Json spaces = Json::object();
    for (const auto& [root, theta] : c.registry.spaces()) {
        Json t = Json::object();
        for (const auto& [va, pa] : theta) t[hex(va)] = hex(pa);
        spaces[hex(root)] = t;
    }
    j["spaces"] = spaces;
    Json free = Json::array();
    for (std::uint64_t f : c.free_frames) free.push_back(hex(f));
    j["free_frames"] = free;
    return j.dump(2) + "\n";
}

}  // namespace vmodal
