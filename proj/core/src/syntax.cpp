#include "vmodal/syntax.hpp"

#include <array>
#include <cctype>

#include "vmodal/format.hpp"

namespace vmodal {

std::string ParseError::describe() const {
    std::string out;
    if (line != 0) out = std::to_string(line) + ":" + std::to_string(column) + ": ";
    out += message.empty() ? "parse error" : message;
    if (!expected.empty()) {
        out += "; expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i) out += i + 1 == expected.size() ? " or " : ", ";
            out += expected[i];
        }
    }
    if (!found.empty()) out += ", found " + found;
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Word, Sym, Newline, End };

struct Token {
    Tok kind;
    std::string text;
    std::size_t line;
    std::size_t column;
};

constexpr std::array<std::string_view, 20> kSymbols = {
    "|->vpte", "|->tok", "|->r", "|->a", "|->v", "&&", "||", "*", "(", ")",
    "[",       "]",      "{",    "}",    "/",    ":",  ",",  "+", "-", "=",
};

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

Expected<std::vector<Token>, ParseError> lex(std::string_view text) {
    std::vector<Token> out;
    std::size_t line = 1;
    std::size_t col = 1;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            out.push_back({Tok::Newline, "\n", line, col});
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            ++col;
            continue;
        }
        if (c == ';') {
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        if (word_char(c) || c == '@') {
            std::size_t j = i + 1;
            while (j < text.size() && word_char(text[j])) ++j;
            out.push_back({Tok::Word, std::string(text.substr(i, j - i)), line, col});
            col += j - i;
            i = j;
            continue;
        }
        bool matched = false;
        for (std::string_view sym : kSymbols) {
            if (text.substr(i).starts_with(sym)) {
                out.push_back({Tok::Sym, std::string(sym), line, col});
                i += sym.size();
                col += sym.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            return unexpected(ParseError{line, col, {}, "'" + std::string(1, c) + "'", "unexpected character"});
        }
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

// ---------------------------------------------------------------------------
// Parser

std::string quoted(std::string_view s) { return "'" + std::string(s) + "'"; }

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    const Token& peek() const { return toks_[pos_]; }
    bool at_sym(std::string_view s) const { return peek().kind == Tok::Sym && peek().text == s; }
    bool at_word(std::string_view s) const { return peek().kind == Tok::Word && peek().text == s; }
    bool at_end_of_line() const { return peek().kind == Tok::Newline || peek().kind == Tok::End; }
    Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    ParseError error(std::vector<std::string> expected, std::string message = {}) const {
        const Token& t = peek();
        std::string found = t.kind == Tok::End ? "end of input" : t.kind == Tok::Newline ? "end of line" : quoted(t.text);
        return ParseError{t.line, t.column, std::move(expected), std::move(found), std::move(message)};
    }

    Status<ParseError> sym(std::string_view s) {
        if (!at_sym(s)) return unexpected(error({quoted(s)}));
        next();
        return {};
    }

    Status<ParseError> keyword(std::string_view s) {
        if (!at_word(s)) return unexpected(error({quoted(s)}));
        next();
        return {};
    }

    Expected<std::uint64_t, ParseError> number() {
        if (peek().kind != Tok::Word) return unexpected(error({"number"}));
        auto v = parse_number(peek().text);
        if (!v) return unexpected(error({"number"}));
        next();
        return *v;
    }

    Expected<RegId, ParseError> reg(bool allow_cr3) {
        if (peek().kind == Tok::Word) {
            if (auto r = parse_reg(peek().text); r && (allow_cr3 || is_data_reg(*r))) {
                next();
                return *r;
            }
        }
        return unexpected(error({allow_cr3 ? "register" : "data register"}));
    }

    std::optional<RegId> peek_reg() const {
        if (peek().kind != Tok::Word) return std::nullopt;
        return parse_reg(peek().text);
    }

    // -- assertions -------------------------------------------------------

    Expected<Assertion, ParseError> assertion() { return disjunction(); }

    Expected<Assertion, ParseError> disjunction() {
        auto first = conjunction();
        if (!first) return first;
        std::vector<Assertion> parts{*first};
        while (at_sym("||")) {
            next();
            auto p = conjunction();
            if (!p) return p;
            parts.push_back(*p);
        }
        return parts.size() == 1 ? parts[0] : disj(std::move(parts));
    }

    Expected<Assertion, ParseError> conjunction() {
        auto first = separating();
        if (!first) return first;
        std::vector<Assertion> parts{*first};
        while (at_sym("&&")) {
            next();
            auto p = separating();
            if (!p) return p;
            parts.push_back(*p);
        }
        return parts.size() == 1 ? parts[0] : conj(std::move(parts));
    }

    Expected<Assertion, ParseError> separating() {
        auto first = atom();
        if (!first) return first;
        std::vector<Assertion> parts{*first};
        while (at_sym("*")) {
            next();
            auto p = atom();
            if (!p) return p;
            parts.push_back(*p);
        }
        return parts.size() == 1 ? parts[0] : sep(std::move(parts));
    }

    Expected<Fraction, ParseError> fraction() {
        if (!at_sym("{")) return Fraction::one();
        next();
        auto n = number();
        if (!n) return unexpected(n.error());
        std::uint64_t d = 1;
        if (at_sym("/")) {
            next();
            auto dd = number();
            if (!dd) return unexpected(dd.error());
            d = *dd;
        }
        auto q = Fraction::make(*n, d);
        if (!q) return unexpected(error({}, "fraction must lie in (0, 1]"));
        if (auto ok = sym("}"); !ok) return unexpected(ok.error());
        return *q;
    }

    Expected<Assertion, ParseError> parenthesized() {
        if (auto ok = sym("("); !ok) return unexpected(ok.error());
        auto body = assertion();
        if (!body) return body;
        if (auto ok = sym(")"); !ok) return unexpected(ok.error());
        return body;
    }

    Expected<Assertion, ParseError> atom() {
        if (at_word("emp")) {
            next();
            return emp();
        }
        if (at_word("iaspace")) {
            next();
            return ia_space();
        }
        if (at_sym("(")) return parenthesized();
        if (at_sym("[")) {
            next();
            auto r = number();
            if (!r) return unexpected(r.error());
            if (auto ok = sym("]"); !ok) return unexpected(ok.error());
            auto body = parenthesized();
            if (!body) return body;
            return other_space(*r, *body);
        }
        if (at_word("pure")) return pure_atom();
        if (at_word("phys")) {
            next();
            auto frame = number();
            if (!frame) return unexpected(frame.error());
            if (auto ok = sym(":"); !ok) return unexpected(ok.error());
            auto off = number();
            if (!off) return unexpected(off.error());
            if (*off >= kPageSize || !word_aligned(*off)) return unexpected(error({}, "offset must be an 8-aligned page offset"));
            if (*frame >> 52) return unexpected(error({}, "frame number exceeds 52 bits"));
            if (auto ok = sym("|->a"); !ok) return unexpected(ok.error());
            auto q = fraction();
            if (!q) return unexpected(q.error());
            auto v = number();
            if (!v) return unexpected(v.error());
            return phys_pt((*frame << 12) | *off, *v, *q);
        }
        if (at_word("l4l1")) {
            next();
            if (auto ok = sym("("); !ok) return unexpected(ok.error());
            std::uint64_t w[6];
            for (int i = 0; i < 6; ++i) {
                if (i) {
                    if (auto ok = sym(","); !ok) return unexpected(ok.error());
                }
                auto v = number();
                if (!v) return unexpected(v.error());
                w[i] = *v;
            }
            if (auto ok = sym(")"); !ok) return unexpected(ok.error());
            return walk_pt(w[0], w[1], w[2], w[3], w[4], w[5]);
        }
        if (auto r = peek_reg()) {
            next();
            if (auto ok = sym("|->r"); !ok) return unexpected(ok.error());
            auto q = fraction();
            if (!q) return unexpected(q.error());
            auto v = number();
            if (!v) return unexpected(v.error());
            return reg_pt(*r, *v, *q);
        }
        if (peek().kind == Tok::Word && parse_number(peek().text)) {
            const std::uint64_t va = *number();
            if (at_sym("|->v")) {
                next();
                auto q = fraction();
                if (!q) return unexpected(q.error());
                auto v = number();
                if (!v) return unexpected(v.error());
                return virt_pt(va, *v, *q);
            }
            if (at_sym("|->vpte")) {
                next();
                auto q = fraction();
                if (!q) return unexpected(q.error());
                auto pa = number();
                if (!pa) return unexpected(pa.error());
                auto v = number();
                if (!v) return unexpected(v.error());
                return pte_pt(va, *pa, *v, *q);
            }
            if (at_sym("|->tok")) {
                next();
                auto q = fraction();
                if (!q) return unexpected(q.error());
                auto pa = number();
                if (!pa) return unexpected(pa.error());
                return token(va, *pa, *q);
            }
            return unexpected(error({"'|->v'", "'|->vpte'", "'|->tok'"}));
        }
        return unexpected(error({"'emp'", "'iaspace'", "'pure'", "'phys'", "'l4l1'", "register", "address", "'('",
                                 "'['"}));
    }

    Expected<Assertion, ParseError> pure_atom() {
        next();
        if (auto ok = sym("("); !ok) return unexpected(ok.error());
        static constexpr std::array<PredKind, 6> kinds = {PredKind::Eq,          PredKind::Ne,      PredKind::Aligned,
                                                          PredKind::PageAligned, PredKind::Present, PredKind::Unmapped};
        std::optional<PredKind> kind;
        for (PredKind k : kinds) {
            if (at_word(pred_name(k))) kind = k;
        }
        if (!kind) return unexpected(error({"'eq'", "'ne'", "'aligned'", "'page_aligned'", "'present'", "'unmapped'"}));
        next();
        std::vector<std::uint64_t> args;
        for (std::size_t i = 0; i < pred_arity(*kind); ++i) {
            auto v = number();
            if (!v) return unexpected(v.error());
            args.push_back(*v);
        }
        if (auto ok = sym(")"); !ok) return unexpected(ok.error());
        return pure(*kind, std::move(args));
    }

    // -- programs ---------------------------------------------------------

    Expected<std::int32_t, ParseError> disp_suffix() {
        if (at_sym("]")) return 0;
        bool negative = false;
        if (at_sym("-")) {
            negative = true;
        } else if (!at_sym("+")) {
            return unexpected(error({"'+'", "'-'", "']'"}));
        }
        next();
        auto v = number();
        if (!v) return unexpected(v.error());
        if (*v >= 4096) return unexpected(error({}, "displacement out of range"));
        const std::int64_t d = negative ? -static_cast<std::int64_t>(*v) : static_cast<std::int64_t>(*v);
        if (!valid_disp(d)) return unexpected(error({}, "displacement must be a multiple of 8"));
        return static_cast<std::int32_t>(d);
    }

    struct MemOperand {
        RegId base;
        std::int32_t disp;
    };

    Expected<MemOperand, ParseError> mem_operand() {
        if (auto ok = sym("["); !ok) return unexpected(ok.error());
        if (at_word("cr3")) return unexpected(error({"data register"}, "cr3 cannot address memory"));
        auto base = reg(false);
        if (!base) return unexpected(base.error());
        auto d = disp_suffix();
        if (!d) return unexpected(d.error());
        if (auto ok = sym("]"); !ok) return unexpected(ok.error());
        return MemOperand{*base, *d};
    }

    Expected<Step, ParseError> mov() {
        next();
        if (at_sym("[")) {
            auto m = mem_operand();
            if (!m) return unexpected(m.error());
            if (auto ok = sym(","); !ok) return unexpected(ok.error());
            auto src = reg(true);
            if (!src) return unexpected(src.error());
            if (*src == RegId::cr3) return Step{Instr{MovMemFromCr3{m->base, m->disp}}};
            return Step{Instr{MovMemFromReg{m->base, m->disp, *src}}};
        }
        auto dst = reg(true);
        if (!dst) return unexpected(error({"register", "'['"}));
        if (auto ok = sym(","); !ok) return unexpected(ok.error());
        if (at_sym("[")) {
            auto m = mem_operand();
            if (!m) return unexpected(m.error());
            if (*dst == RegId::cr3) return Step{Instr{MovToCr3FromMem{m->base, m->disp}}};
            return Step{Instr{MovRegFromMem{*dst, m->base, m->disp}}};
        }
        if (auto src = peek_reg()) {
            next();
            if (*dst == RegId::cr3 && *src == RegId::cr3) return unexpected(error({}, "mov cr3, cr3 is not an instruction"));
            if (*dst == RegId::cr3) return Step{Instr{MovToCr3FromReg{*src}}};
            if (*src == RegId::cr3) return Step{Instr{MovRegFromCr3{*dst}}};
            return Step{Instr{MovRegReg{*dst, *src}}};
        }
        if (*dst == RegId::cr3) return unexpected(error({"register", "'['"}));
        auto imm = number();
        if (!imm) return unexpected(error({"register", "number", "'['"}));
        return Step{Instr{MovRegImm{*dst, *imm}}};
    }

    Expected<Expr, ParseError> expr() {
        Expr e;
        if (auto r = peek_reg()) {
            if (*r == RegId::cr3) return unexpected(error({"data register", "number"}));
            next();
            e.reg = *r;
            if (at_sym("+") || at_sym("-")) {
                e.negative = at_sym("-");
                next();
                auto v = number();
                if (!v) return unexpected(v.error());
                e.imm = *v;
            }
            return e;
        }
        auto v = number();
        if (!v) return unexpected(error({"register", "number"}));
        e.imm = *v;
        return e;
    }

    Expected<Expr, ParseError> named_expr(std::string_view name) {
        if (auto ok = keyword(name); !ok) return unexpected(ok.error());
        if (auto ok = sym("="); !ok) return unexpected(ok.error());
        return expr();
    }

    Expected<Step, ParseError> ghost() {
        next();
        GhostCmd g{};
        if (at_word("insert_walk")) {
            g.op = GhostOp::InsertWalk;
        } else if (at_word("remove_walk")) {
            g.op = GhostOp::RemoveWalk;
        } else if (at_word("pte_to_virt")) {
            g.op = GhostOp::PteToVirt;
        } else {
            return unexpected(error({"'insert_walk'", "'remove_walk'", "'pte_to_virt'"}));
        }
        next();
        auto va = named_expr("va");
        if (!va) return unexpected(va.error());
        g.va = *va;
        if (g.op == GhostOp::InsertWalk) {
            auto pa = named_expr("pa");
            if (!pa) return unexpected(pa.error());
            g.pa = *pa;
        }
        return Step{g};
    }

    Expected<Step, ParseError> statement() {
        if (at_word("mov")) return mov();
        if (at_word("add")) {
            next();
            auto dst = reg(false);
            if (!dst) return unexpected(dst.error());
            if (auto ok = sym(","); !ok) return unexpected(ok.error());
            auto imm = number();
            if (!imm) return unexpected(imm.error());
            return Step{Instr{AddRegImm{*dst, *imm}}};
        }
        if (at_word("skip")) {
            next();
            return Step{Instr{Skip{}}};
        }
        if (at_word("call")) {
            next();
            if (peek().kind != Tok::Word || parse_number(peek().text)) return unexpected(error({"procedure name"}));
            return Step{Call{next().text}};
        }
        if (at_word("@ghost")) return ghost();
        if (at_word("@assert")) {
            next();
            if (auto ok = sym("{"); !ok) return unexpected(ok.error());
            auto a = assertion();
            if (!a) return unexpected(a.error());
            if (auto ok = sym("}"); !ok) return unexpected(ok.error());
            return Step{AssertNow{*a}};
        }
        return unexpected(error({"'mov'", "'add'", "'skip'", "'call'", "'@ghost'", "'@assert'"}));
    }

    Expected<Script, ParseError> program() {
        Script out;
        while (peek().kind != Tok::End) {
            if (peek().kind == Tok::Newline) {
                next();
                continue;
            }
            auto s = statement();
            if (!s) return unexpected(s.error());
            out.push_back(*s);
            if (!at_end_of_line()) return unexpected(error({"end of line"}));
        }
        return out;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace

Expected<Assertion, ParseError> parse_assertion(std::string_view text) {
    auto toks = lex(text);
    if (!toks) return unexpected(toks.error());
    std::erase_if(*toks, [](const Token& t) { return t.kind == Tok::Newline; });
    Parser p(std::move(*toks));
    auto a = p.assertion();
    if (!a) return a;
    if (p.peek().kind != Tok::End) return unexpected(p.error({"'*'", "'&&'", "'||'", "end of input"}));
    return a;
}

Expected<Script, ParseError> parse_program(std::string_view text) {
    auto toks = lex(text);
    if (!toks) return unexpected(toks.error());
    Parser p(std::move(*toks));
    return p.program();
}

std::string print_program(const Script& script) {
    std::string out;
    for (const Step& s : script) out += to_string(s) + "\n";
    return out;
}

}  // namespace vmodal
