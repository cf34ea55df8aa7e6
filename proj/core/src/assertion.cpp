#include "vmodal/assertion.hpp"

#include <algorithm>

#include "vmodal/format.hpp"

namespace vmodal {

std::string_view pred_name(PredKind k) {
    switch (k) {
        case PredKind::Eq: return "eq";
        case PredKind::Ne: return "ne";
        case PredKind::Aligned: return "aligned";
        case PredKind::PageAligned: return "page_aligned";
        case PredKind::Present: return "present";
        case PredKind::Unmapped: return "unmapped";
    }
    return "?";
}

std::size_t pred_arity(PredKind k) {
    switch (k) {
        case PredKind::Eq:
        case PredKind::Ne:
        case PredKind::Unmapped:
            return 2;
        default:
            return 1;
    }
}

std::uint64_t node::WalkPt::entry(int level) const noexcept {
    switch (level) {
        case 4: return l4e;
        case 3: return l3e;
        case 2: return l2e;
        default: return l1e;
    }
}

Assertion::Assertion() : node_(std::make_shared<const Node>(node::Emp{})) {}
Assertion::Assertion(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}

Assertion emp() { return Assertion{}; }
Assertion pure(PredKind kind, std::vector<std::uint64_t> args) { return Node{node::Pure{kind, std::move(args)}}; }
Assertion reg_pt(RegId reg, std::uint64_t val, Fraction q) { return Node{node::RegPt{reg, q, val}}; }
Assertion phys_pt(std::uint64_t address, std::uint64_t val, Fraction q) {
    return Node{node::PhysPt{address >> 12, address & 0xFFF, q, val}};
}
Assertion virt_pt(std::uint64_t va, std::uint64_t val, Fraction q) { return Node{node::VirtPt{va, q, val}}; }
Assertion pte_pt(std::uint64_t va, std::uint64_t pa, std::uint64_t val, Fraction q) {
    return Node{node::PtePt{va, q, pa, val}};
}
Assertion token(std::uint64_t va, std::uint64_t pa, Fraction q) { return Node{node::Token{va, q, pa}}; }
Assertion walk_pt(std::uint64_t va, std::uint64_t l4e, std::uint64_t l3e, std::uint64_t l2e, std::uint64_t l1e,
                  std::uint64_t pa) {
    return Node{node::WalkPt{va, l4e, l3e, l2e, l1e, pa}};
}
Assertion ia_space() { return Node{node::IASpace{}}; }
Assertion other_space(std::uint64_t root, Assertion body) { return Node{node::OtherSpace{root, std::move(body)}}; }
Assertion sep(std::vector<Assertion> parts) { return Node{node::Sep{std::move(parts)}}; }
Assertion conj(std::vector<Assertion> parts) { return Node{node::And{std::move(parts)}}; }
Assertion disj(std::vector<Assertion> parts) { return Node{node::Or{std::move(parts)}}; }

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string frac_prefix(Fraction q) { return q.is_one() ? "" : "{" + q.to_string() + "} "; }

// Binding strength: Or < And < Sep < atom.
int precedence(const Assertion& a) {
    if (a.is<node::Or>() && a.as<node::Or>()->parts.size() > 1) return 0;
    if (a.is<node::And>() && a.as<node::And>()->parts.size() > 1) return 1;
    if (a.is<node::Sep>() && a.as<node::Sep>()->parts.size() > 1) return 2;
    return 3;
}

std::string print_joined(const std::vector<Assertion>& parts, std::string_view op, int level) {
    if (parts.empty()) return "emp";
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += op;
        std::string s = parts[i].to_string();
        // Equal precedence nested on the same operator still needs grouping so the
        // tree shape survives a parse.
        if (precedence(parts[i]) <= level) s = "(" + s + ")";
        out += s;
    }
    return out;
}

struct TextPrinter {
    std::string operator()(const node::Emp&) const { return "emp"; }
    std::string operator()(const node::Pure& p) const {
        std::string out = "pure(" + std::string(pred_name(p.kind));
        for (std::uint64_t a : p.args) out += " " + hex(a);
        return out + ")";
    }
    std::string operator()(const node::RegPt& r) const {
        return std::string(reg_name(r.reg)) + " |->r " + frac_prefix(r.q) + hex(r.val);
    }
    std::string operator()(const node::PhysPt& p) const {
        return "phys " + hex(p.frame) + ":" + hex(p.offset) + " |->a " + frac_prefix(p.q) + hex(p.val);
    }
    std::string operator()(const node::VirtPt& v) const { return hex(v.va) + " |->v " + frac_prefix(v.q) + hex(v.val); }
    std::string operator()(const node::PtePt& v) const {
        return hex(v.va) + " |->vpte " + frac_prefix(v.q) + hex(v.pa) + " " + hex(v.val);
    }
    std::string operator()(const node::Token& t) const {
        return hex(t.va) + " |->tok " + frac_prefix(t.q) + hex(t.pa);
    }
    std::string operator()(const node::WalkPt& w) const {
        return "l4l1(" + hex(w.va) + ", " + hex(w.l4e) + ", " + hex(w.l3e) + ", " + hex(w.l2e) + ", " + hex(w.l1e) +
               ", " + hex(w.pa) + ")";
    }
    std::string operator()(const node::IASpace&) const { return "iaspace"; }
    std::string operator()(const node::OtherSpace& o) const {
        return "[" + hex(o.root) + "](" + o.body.to_string() + ")";
    }
    std::string operator()(const node::Sep& s) const {
        if (s.parts.size() == 1) return s.parts[0].to_string();
        return print_joined(s.parts, " * ", 1);
    }
    std::string operator()(const node::And& s) const {
        if (s.parts.size() == 1) return s.parts[0].to_string();
        return print_joined(s.parts, " && ", 0);
    }
    std::string operator()(const node::Or& s) const {
        if (s.parts.size() == 1) return s.parts[0].to_string();
        return print_joined(s.parts, " || ", -1);
    }
};

}  // namespace

std::string Assertion::to_string() const { return std::visit(TextPrinter{}, *node_); }

// ---------------------------------------------------------------------------
// Canonical form, facts, normalization

namespace {

template <typename Conn>
void flatten_into(const Assertion& a, std::vector<Assertion>& out) {
    if (const Conn* c = a.as<Conn>()) {
        for (const Assertion& p : c->parts) flatten_into<Conn>(p, out);
    } else {
        out.push_back(a);
    }
}

void sort_parts(std::vector<Assertion>& parts) {
    std::vector<std::pair<std::string, Assertion>> keyed;
    keyed.reserve(parts.size());
    for (auto& p : parts) keyed.emplace_back(p.to_string(), p);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t i = 0; i < parts.size(); ++i) parts[i] = keyed[i].second;
}

template <typename Conn>
Assertion make_connective(const std::vector<Assertion>& raw, bool drop_emp) {
    std::vector<Assertion> parts;
    for (const Assertion& p : raw) flatten_into<Conn>(p, parts);
    if (drop_emp) {
        std::erase_if(parts, [](const Assertion& p) { return p.is<node::Emp>(); });
        if (parts.empty()) return emp();
    }
    if (parts.size() == 1) return parts[0];
    sort_parts(parts);
    return Node{Conn{std::move(parts)}};
}

Assertion canonical_rec(const Assertion& a) {
    if (const auto* o = a.as<node::OtherSpace>()) return other_space(o->root, canonical_rec(o->body));
    auto children = [](const std::vector<Assertion>& ps) {
        std::vector<Assertion> out;
        for (const auto& p : ps) out.push_back(canonical_rec(p));
        return out;
    };
    if (const auto* s = a.as<node::Sep>()) {
        if (s->parts.empty()) return a;
        return make_connective<node::Sep>(children(s->parts), false);
    }
    if (const auto* s = a.as<node::And>()) return make_connective<node::And>(children(s->parts), false);
    if (const auto* s = a.as<node::Or>()) return make_connective<node::Or>(children(s->parts), false);
    return a;
}

Assertion push_modal(std::uint64_t root, const Assertion& body);

template <typename Conn>
Assertion push_through(std::uint64_t root, const Conn& c, bool drop_emp) {
    std::vector<Assertion> parts;
    for (const Assertion& p : c.parts) parts.push_back(push_modal(root, p));
    return make_connective<Conn>(parts, drop_emp);
}

// body is already normalized.
Assertion push_modal(std::uint64_t root, const Assertion& body) {
    if (const auto* s = body.as<node::Sep>()) return push_through(root, *s, true);
    if (const auto* s = body.as<node::And>()) return push_through(root, *s, false);
    if (const auto* s = body.as<node::Or>()) return push_through(root, *s, false);
    if (is_fact(body)) return body;
    return other_space(root, body);
}

Assertion normalize_rec(const Assertion& a) {
    auto children = [](const std::vector<Assertion>& ps) {
        std::vector<Assertion> out;
        for (const auto& p : ps) out.push_back(normalize_rec(p));
        return out;
    };
    if (const auto* s = a.as<node::Sep>()) return make_connective<node::Sep>(children(s->parts), true);
    if (const auto* s = a.as<node::And>()) return make_connective<node::And>(children(s->parts), false);
    if (const auto* s = a.as<node::Or>()) return make_connective<node::Or>(children(s->parts), false);
    if (const auto* o = a.as<node::OtherSpace>()) return push_modal(o->root, normalize_rec(o->body));
    return a;
}

}  // namespace

Assertion canonical(const Assertion& a) { return canonical_rec(a); }

bool operator==(const Assertion& a, const Assertion& b) {
    return canonical(a).to_string() == canonical(b).to_string();
}

bool is_fact(const Assertion& a) {
    struct V {
        bool operator()(const node::Emp&) const { return true; }
        bool operator()(const node::Pure&) const { return true; }
        bool operator()(const node::RegPt&) const { return true; }
        bool operator()(const node::PhysPt&) const { return true; }
        bool operator()(const node::VirtPt&) const { return false; }
        bool operator()(const node::PtePt&) const { return false; }
        bool operator()(const node::Token&) const { return false; }
        bool operator()(const node::WalkPt&) const { return false; }
        bool operator()(const node::IASpace&) const { return false; }
        bool operator()(const node::OtherSpace&) const { return true; }
        bool all(const std::vector<Assertion>& ps) const {
            return std::all_of(ps.begin(), ps.end(), [](const Assertion& p) { return is_fact(p); });
        }
        bool operator()(const node::Sep& s) const { return all(s.parts); }
        bool operator()(const node::And& s) const { return all(s.parts); }
        bool operator()(const node::Or& s) const { return all(s.parts); }
    };
    return std::visit(V{}, a.node());
}

Assertion normalize(const Assertion& a) { return normalize_rec(a); }

std::vector<Assertion> conjuncts(const Assertion& a) {
    std::vector<Assertion> out;
    flatten_into<node::Sep>(a, out);
    std::erase_if(out, [](const Assertion& p) { return p.is<node::Emp>(); });
    return out;
}

bool eval_pure(const node::Pure& p, const Registry& registry) {
    if (p.args.size() != pred_arity(p.kind)) return false;
    switch (p.kind) {
        case PredKind::Eq: return p.args[0] == p.args[1];
        case PredKind::Ne: return p.args[0] != p.args[1];
        case PredKind::Aligned: return word_aligned(p.args[0]);
        case PredKind::PageAligned: return page_aligned(p.args[0]);
        case PredKind::Present: return decode_pte(p.args[0]).present();
        case PredKind::Unmapped: {
            const WalkMap* theta = registry.find(p.args[0]);
            return theta != nullptr && !theta->contains(p.args[1]);
        }
    }
    return false;
}

PhysAddr walk_slot(const node::WalkPt& walk, std::uint64_t root, int level) {
    const VaIndices idx = split_va(walk.va);
    const std::uint64_t table = level == 4 ? (root >> 12) : decode_pte(walk.entry(level + 1)).frame().value();
    return PhysAddr{W52::truncate(table), W12::truncate(idx.index(level).value() * 8)};
}

Expected<Assertion, Fault> walk_evidence(std::uint64_t root, const PhysMemory& mem, std::uint64_t va) {
    WalkResult w = walk(root, mem, va);
    if (w.fault) return unexpected(*w.fault);
    return walk_pt(va, w.levels[0].entry.raw.value(), w.levels[1].entry.raw.value(), w.levels[2].entry.raw.value(),
                   w.levels[3].entry.raw.value(), w.target->bytes());
}

}  // namespace vmodal
