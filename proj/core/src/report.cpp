#include <sstream>

#include <json.hpp>

#include "vmodal/checker.hpp"
#include "vmodal/format.hpp"

namespace vmodal {

namespace {

using Json = nlohmann::ordered_json;

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Pre: return "pre";
        case Phase::Step: return "step";
        case Phase::Post: return "post";
    }
    return "?";
}

Json claims_json(const ResourceLedger& ledger) {
    Json out = Json::array();
    for (const auto& [loc, c] : ledger.claims()) {
        out.push_back({{"location", loc.describe()}, {"q", c.q.to_string()}, {"value", hex(c.value)}});
    }
    return out;
}

}  // namespace

std::string Report::to_json() const {
    Json j;
    j["ok"] = ok();
    j["mode"] = std::string(check_mode_name(ctx.mode));
    if (violation) {
        Json v;
        v["kind"] = std::string(violation_kind_name(violation->kind));
        v["phase"] = std::string(phase_name(violation->phase));
        v["step"] = violation->step;
        v["pc"] = violation->pc ? Json(*violation->pc) : Json(nullptr);
        v["location"] = violation->location;
        v["narrative"] = violation->narrative;
        j["violation"] = v;
    } else {
        j["violation"] = nullptr;
    }
    Json steps = Json::array();
    for (const StepRecord& s : this->steps) {
        steps.push_back({{"index", s.index},
                         {"step", s.text},
                         {"rule", s.rule},
                         {"consumed", s.consumed},
                         {"produced", s.produced},
                         {"root_before", hex(s.root_before)},
                         {"root_after", hex(s.root_after)}});
    }
    j["steps"] = steps;
    Json warnings = Json::array();
    for (const FrameWarning& w : frame_warnings) warnings.push_back(w.describe());
    j["frame_warnings"] = warnings;
    j["final_root"] = hex(ctx.root);
    j["final_assertion"] = render(ctx.ledger).to_string();
    j["final_ledger"] = claims_json(ctx.ledger);
    return j.dump(2) + "\n";
}

std::string Report::to_text() const {
    std::ostringstream out;
    for (const StepRecord& s : steps) {
        out << "step " << s.index << ": " << s.text << "\n";
        out << "  rule " << (s.rule.empty() ? "-" : s.rule) << ", root " << hex(s.root_before);
        if (s.root_after != s.root_before) out << " -> " << hex(s.root_after);
        out << "\n";
        for (const std::string& c : s.consumed) out << "  - " << c << "\n";
        for (const std::string& p : s.produced) out << "  + " << p << "\n";
    }
    for (const FrameWarning& w : frame_warnings) out << "warning: " << w.describe() << "\n";
    if (violation) {
        out << "FAILED: " << violation->describe() << "\n";
    } else {
        out << "OK\n";
    }
    out << "final root: " << hex(ctx.root) << "\n";
    out << "final: " << render(ctx.ledger).to_string() << "\n";
    return out.str();
}

}  // namespace vmodal
