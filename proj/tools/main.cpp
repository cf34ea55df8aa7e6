#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "vmodal/cases.hpp"
#include "vmodal/config.hpp"
#include "vmodal/format.hpp"
#include "vmodal/syntax.hpp"

using namespace vmodal;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError {
    std::string message;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError{"cannot read " + path};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename T>
T parsed(Expected<T, ParseError> r, const std::string& path) {
    if (!r) throw UsageError{path + ": " + r.error().describe()};
    return std::move(r).value();
}

std::uint64_t number(const std::string& text, const std::string& what) {
    auto v = parse_number(text);
    if (!v) throw UsageError{"bad " + what + ": " + text};
    return *v;
}

// ---------------------------------------------------------------------------

int cmd_run(const std::string& prog_path, const std::string& state_path, bool trace, bool no_accessed, bool no_rw) {
    const Script script = parsed(parse_program(slurp(prog_path)), prog_path);
    const StateConfig cfg = parsed(parse_config(slurp(state_path)), state_path);
    for (const Step& s : script) {
        if (!std::holds_alternative<Instr>(s)) throw UsageError{"run takes plain instructions only: " + to_string(s)};
    }
    const std::vector<Instr> program = instructions_of(script);
    const StepOptions opts{!no_rw, !no_accessed};

    std::map<std::uint64_t, std::uint64_t> touched;
    auto sink = [&](std::size_t pc, const Instr& instr, std::uint64_t root, const StepEffect& e) {
        if (e.mem) touched[e.mem->bytes()] = e.mem_value;
        if (trace) std::cout << pc << " | " << to_string(instr) << " | " << hex(root) << " | " << e.describe() << "\n";
    };
    auto result = run(cfg.state, program, opts, sink);
    if (!result) {
        const RunFault& f = result.error();
        const std::uint64_t root = cfg.state.cr3();
        if (trace && f.pc < program.size()) {
            std::cout << f.pc << " | " << to_string(program[f.pc]) << " | " << hex(root) << " | fault "
                      << f.fault.describe() << "\n";
        }
        std::cout << "fault at pc " << f.pc << ": " << f.fault.describe() << "\n";
        return kFailed;
    }
    // Accessed bits set by walks are part of the final memory too.
    for (const auto& [frame, words] : result->mem.frames()) {
        const PhysMemory& before = cfg.state.mem;
        for (std::size_t i = 0; i < words.size(); ++i) {
            const std::uint64_t addr = (frame << 12) | (i * 8);
            if (before.peek(addr) != words[i]) touched[addr] = words[i];
        }
    }
    for (std::size_t i = 0; i < kRegCount; ++i) {
        const auto r = static_cast<RegId>(i);
        if (result->reg(r) != 0) std::cout << reg_name(r) << " = " << hex(result->reg(r)) << "\n";
    }
    for (const auto& [addr, v] : touched) std::cout << "phys " << hex(addr) << " = " << hex(v) << "\n";
    return kOk;
}

int cmd_check(const std::string& prog_path, const std::string& state_path, const std::string& pre_path,
              const std::optional<std::string>& root_text, const std::optional<std::string>& post_path,
              const std::string& mode, const std::string& report) {
    const Script script = parsed(parse_program(slurp(prog_path)), prog_path);
    const StateConfig cfg = parsed(parse_config(slurp(state_path)), state_path);
    const Assertion pre = parsed(parse_assertion(slurp(pre_path)), pre_path);
    std::optional<Assertion> post;
    if (post_path) post = parsed(parse_assertion(slurp(*post_path)), *post_path);
    const std::uint64_t root = root_text ? number(*root_text, "root") : cfg.state.cr3();
    const CheckSetup setup{cfg.state, cfg.registry, cfg.free_frames,
                           mode == "resource" ? CheckMode::ResourceOnly : CheckMode::Coexec};
    const Report r = check_double(pre, root, script, builtin_stubs(), setup, post);
    std::cout << (report == "json" ? r.to_json() : r.to_text());
    return r.ok() ? kOk : kFailed;
}

int cmd_walk(const std::string& state_path, const std::string& root_text, const std::string& va_text) {
    const StateConfig cfg = parsed(parse_config(slurp(state_path)), state_path);
    const std::uint64_t root = number(root_text, "root");
    const std::uint64_t va = number(va_text, "va");
    const WalkResult w = walk(root, cfg.state.mem, va);
    for (const WalkLevel& l : w.levels) {
        std::cout << "L" << l.level << " " << hex(l.slot.bytes()) << " = " << hex(l.entry.raw.value()) << " "
                  << (l.entry.present() ? 'P' : '-') << (l.entry.writable() ? 'W' : '-')
                  << (l.entry.accessed() ? 'A' : '-') << " frame " << hex(l.entry.frame().value()) << "\n";
    }
    if (w.fault) {
        std::cout << "fault " << w.fault->describe() << "\n";
        return kFailed;
    }
    std::cout << "pa " << hex(w.target->bytes()) << "\n";
    return kOk;
}

int cmd_case(const std::string& name, const std::string& dir) {
    auto c = case_study(name);
    if (!c) throw UsageError{c.error()};
    if (auto ok = emit_case(*c, dir); !ok) {
        std::cerr << ok.error() << "\n";
        return kFailed;
    }
    return kOk;
}

// Canonical reprint of an input file.
int cmd_fmt(const std::string& kind, const std::string& path) {
    const std::string text = slurp(path);
    if (kind == "program") {
        std::cout << print_program(parsed(parse_program(text), path));
    } else if (kind == "assertion") {
        std::cout << parsed(parse_assertion(text), path).to_string() << "\n";
    } else {
        std::cout << print_config(parsed(parse_config(text), path));
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vmodal: page-table machine and address-space checker"};
    app.require_subcommand(1);

    std::string prog;
    std::string state;
    bool trace = false;
    bool no_accessed = false;
    bool no_rw = false;
    auto* run_cmd = app.add_subcommand("run", "execute a program");
    run_cmd->add_option("PROG", prog)->required();
    run_cmd->add_option("--state", state)->required();
    run_cmd->add_flag("--trace", trace, "print one line per step");
    run_cmd->add_flag("--no-accessed", no_accessed, "do not set accessed bits");
    run_cmd->add_flag("--no-rw", no_rw, "ignore the writable bit");

    std::string pre;
    std::optional<std::string> root;
    std::optional<std::string> post;
    std::string mode = "coexec";
    std::string report = "text";
    auto* check_cmd = app.add_subcommand("check", "check a program against a precondition");
    check_cmd->add_option("PROG", prog)->required();
    check_cmd->add_option("--state", state)->required();
    check_cmd->add_option("--pre", pre)->required();
    check_cmd->add_option("--root", root, "evaluation root (default: cr3 of the state)");
    check_cmd->add_option("--post", post, "postcondition to check at the end");
    check_cmd->add_option("--mode", mode)->check(CLI::IsMember({"coexec", "resource"}));
    check_cmd->add_option("--report", report)->check(CLI::IsMember({"json", "text"}));

    std::string va;
    std::string walk_root;
    auto* walk_cmd = app.add_subcommand("walk", "dump the page walk of one address");
    walk_cmd->add_option("--state", state)->required();
    walk_cmd->add_option("--root", walk_root)->required();
    walk_cmd->add_option("--va", va)->required();

    std::string name;
    std::string dir;
    auto* case_cmd = app.add_subcommand("case", "write a case-study fixture");
    case_cmd->add_option("NAME", name)->required()->check(CLI::IsMember(case_names()));
    case_cmd->add_option("--emit", dir)->required();

    std::string kind;
    std::string file;
    auto* fmt_cmd = app.add_subcommand("fmt", "reprint a program, assertion or state in canonical form");
    fmt_cmd->add_option("KIND", kind)->required()->check(CLI::IsMember({"program", "assertion", "state"}));
    fmt_cmd->add_option("FILE", file)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*run_cmd) return cmd_run(prog, state, trace, no_accessed, no_rw);
        if (*check_cmd) return cmd_check(prog, state, pre, root, post, mode, report);
        if (*walk_cmd) return cmd_walk(state, walk_root, va);
        if (*case_cmd) return cmd_case(name, dir);
        if (*fmt_cmd) return cmd_fmt(kind, file);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.message << "\n";
        return kUsage;
    }
    return kUsage;
}
