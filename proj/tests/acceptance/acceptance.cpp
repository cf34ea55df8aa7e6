// Acceptance checks 1..10. Usage: vmodal_acceptance <path-to-vmodal> <fixtures-dir>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "gen.hpp"
#include "oracle.hpp"
#include "vmodal/cases.hpp"
#include "vmodal/format.hpp"
#include "vmodal/ghost.hpp"
#include "vmodal/ledger.hpp"
#include "vmodal/sat.hpp"
#include "vmodal/syntax.hpp"

using namespace vmodal;
namespace fs = std::filesystem;

namespace {

struct Failure {
    std::string why;
};

void expect(bool ok, const std::string& why) {
    if (!ok) throw Failure{why};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Captured {
    int status = -1;
    std::string out;
};

Captured capture(const std::string& cmd) {
    Captured c;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return c;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) c.out.append(buf.data(), n);
    const int raw = pclose(pipe);
    c.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return c;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

Report run_case(const CaseStudy& c, CheckMode mode = CheckMode::Coexec) {
    return check_double(c.pre, c.root, c.script, c.stubs, c.setup(mode), c.expected_post);
}

bool has_conjunct(const Assertion& a, const Assertion& part) {
    for (const Assertion& p : conjuncts(a)) {
        if (p == part) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------

void translation_oracle() {
    const auto start = std::chrono::steady_clock::now();
    std::size_t checked = 0;
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        std::mt19937_64 rng(seed * 7919 + 1);
        const oracle::RandomTables t = oracle::random_tables(rng);
        const PhysMemory mem = t.mem.to_phys();
        for (int i = 0; i < 10; ++i) {
            const std::uint64_t va = oracle::random_va(rng, t);
            const oracle::Outcome want = oracle::naive_translate(t.root, t.mem, va);
            const oracle::Outcome got = oracle::from_vmodal(translate(t.root, mem, va));
            expect(got == want, "seed " + std::to_string(seed) + " va " + hex(va) + ": " + oracle::to_string(got) +
                                    " vs oracle " + oracle::to_string(want));
            ++checked;
            ok += got.ok;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    expect(checked == 10000, "address count");
    expect(ok > 1000 && ok < 9000, "sample is one-sided: " + std::to_string(ok) + " resolved");
    expect(secs < 10.0, "took " + std::to_string(secs) + "s");
}

void fraction_conservation() {
    ResourceLedger l;
    const Location entry = Location::phys(0x13000);
    for (int i = 0; i < 512; ++i) {
        ResourceLedger piece;
        expect(piece.add(entry, {Fraction::entry_share(1), 0x30003}).ok(), "piece");
        auto joined = ledger_join(l, piece);
        expect(joined.has_value(), "join " + std::to_string(i));
        l = *joined;
    }
    expect(l.find(entry)->q.is_one(), "512 shares are not one");
    ResourceLedger extra;
    (void)extra.add(entry, {Fraction::entry_share(1), 0x30003});
    auto over = ledger_join(l, extra);
    expect(!over && over.error().kind == LedgerErrorKind::SumExceedsOne, "513th share accepted");

    std::mt19937_64 rng(42);
    for (int round = 0; round < 500; ++round) {
        std::vector<ResourceLedger> held{l};
        for (int i = 0; i < 40; ++i) {
            const std::size_t k = rng() % held.size();
            const Claim c = *held[k].find(entry);
            if (rng() % 2 && c.q.den() < (1ull << 50)) {
                const Fraction h = *frac_halve(c.q);
                ResourceLedger a;
                (void)a.add(entry, {h, c.value});
                held[k] = a;
                held.push_back(a);
            } else if (held.size() > 1) {
                const std::size_t j = (k + 1) % held.size();
                auto s = ledger_join(held[k], held[j]);
                expect(s.has_value(), "join of a split failed");
                held[k] = *s;
                held.erase(held.begin() + static_cast<std::ptrdiff_t>(j));
            }
            for (const ResourceLedger& h : held) expect(!(Fraction::one() < h.find(entry)->q), "share above one");
        }
        ResourceLedger total(0);
        for (const ResourceLedger& h : held) total = *ledger_join(total, h);
        expect(total.find(entry)->q.is_one(), "split/join lost or gained ownership");
        expect(!ledger_join(total, extra), "overfull join accepted");
    }
}

void modality_laws() {
    const gen::World w = gen::make_world();
    const MachineState& s = w.config.state;
    const Registry& reg = w.config.registry;
    std::mt19937_64 rng(2024);
    std::size_t facts = 0;
    for (int i = 0; i < 500; ++i) {
        const Assertion p = gen::random_assertion(rng, w, 3);
        const Assertion q = gen::random_assertion(rng, w, 3);
        const std::uint64_t r = w.roots[rng() % 3];
        const Assertion n = normalize(p);
        expect(normalize(n) == n, "normalize not idempotent on " + p.to_string());
        expect(normalize(other_space(r, sep({p, q}))) == normalize(sep({other_space(r, p), other_space(r, q)})),
               "Sep law on " + p.to_string());
        expect(normalize(other_space(r, conj({p, q}))) == normalize(conj({other_space(r, p), other_space(r, q)})),
               "And law on " + p.to_string());
        expect(normalize(other_space(r, disj({p, q}))) == normalize(disj({other_space(r, p), other_space(r, q)})),
               "Or law on " + p.to_string());
        if (is_fact(p)) {
            ++facts;
            expect(normalize(other_space(r, p)) == n, "Fact elimination on " + p.to_string());
        }
        const bool fact = is_fact(p);
        std::optional<bool> first;
        for (std::uint64_t root : w.roots) {
            const bool v = machine_sat(p, root, s, reg).ok();
            expect(v == machine_sat(n, root, s, reg).ok(), "normalize changed the verdict of " + p.to_string());
            const bool boxed = machine_sat(other_space(r, p), root, s, reg).ok();
            expect(boxed == machine_sat(p, r, s, reg).ok(), "[r](P) is not P at r for " + p.to_string());
            if (fact) {
                if (first) expect(*first == v, "Fact verdict moved with the root: " + p.to_string());
                first = v;
            }
        }
    }
    expect(facts > 50, "too few Facts generated");
}

void iaspace_sensitivity() {
    std::mt19937_64 rng(77);
    std::size_t trials = 0;
    for (int round = 0; round < 40; ++round) {
        std::vector<Mapping> ms;
        std::set<std::uint64_t> pages;
        const std::uint64_t i4 = rng() % 512;
        while (ms.size() < 12) {
            const std::uint64_t va = (i4 << 39) | ((rng() % 2) << 30) | ((rng() % 3) << 21) | ((rng() % 4) << 12);
            if (!pages.insert(va).second) continue;
            ms.push_back({va, (0x1000 + ms.size()) << 12});
        }
        const SynthTables t = *synth_tables(ms, 1);
        Registry reg;
        reg.create_space(t.root);
        for (const Mapping& m : ms) {
            for (std::uint64_t off : {0ull, 0x10ull}) reg.find(t.root)->insert(m.va + off, m.pa + off);
        }
        auto clean = ias_check(t.mem, t.root, reg);
        expect(clean && clean->empty(), "ias_check fails on fresh tables");
        for (int k = 1; k <= 4; ++k) {
            const Mapping& victim = ms[rng() % ms.size()];
            const WalkLevel lvl = walk(t.root, t.mem, victim.va).levels[4 - k];
            PhysMemory mem = t.mem;
            mem.write(lvl.slot, lvl.entry.raw.value() & ~pte_bits::present);
            // Everything sharing the victim's indices from L4 down to level k routes through the entry.
            const unsigned lo = 12 + 9 * static_cast<unsigned>(k - 1);
            std::set<std::uint64_t> expected;
            for (const auto& [va, pa] : *reg.find(t.root)) {
                if (oracle::slice(va, lo, 47) == oracle::slice(victim.va, lo, 47)) expected.insert(va);
            }
            std::set<std::uint64_t> got;
            const auto defects = ias_check(mem, t.root, reg);
            expect(defects.has_value(), "ias_check failed");
            for (const IasDefect& d : *defects) {
                expect(d.fault && d.fault->kind == FaultKind::NotPresent && d.fault->level == k,
                       "defect at the wrong level");
                got.insert(d.va);
            }
            auto show = [](const std::set<std::uint64_t>& xs) {
                std::string out;
                for (std::uint64_t x : xs) out += " " + hex(x);
                return out;
            };
            expect(got == expected, "level " + std::to_string(k) + ": reported" + show(got) + ", enumeration" +
                                        show(expected));
            ++trials;
        }
    }
    expect(trials == 160, "trial count");
}

void map_new_page_end_to_end() {
    const CaseStudy c = *case_study("map_new_page");
    const Report r = run_case(c);
    expect(r.ok(), r.ok() ? "" : r.violation->describe());
    expect(r.ctx.mode == CheckMode::Coexec, "mode");
    expect(has_conjunct(render(r.ctx.ledger), virt_pt(layout::kMapVa, 0)), "no VirtPt(va, 1, 0) in the final ledger");
    auto pa = translate(c.root, r.ctx.machine.mem, layout::kMapVa);
    expect(pa && pa->bytes() == layout::kFreeFrame << 12, "va does not translate to the allocated page");
    expect(r.ctx.machine.mem.peek(pa->bytes()) == 0u, "word 0 of the page is not zero");
    expect(machine_sat(render(r.ctx.ledger), r.ctx.root, r.ctx.machine, r.ctx.registry).ok(), "final ledger");
}

void swtch_end_to_end() {
    const CaseStudy c = *case_study("swtch");
    const Report r = run_case(c);
    expect(r.ok(), r.ok() ? "" : r.violation->describe());
    const MachineState& init = c.fixture.state;
    const std::uint64_t load = translate(c.root, init.mem, layout::kLoadBlock)->bytes();
    const std::uint64_t save = translate(c.root, init.mem, layout::kSaveBlock)->bytes();
    expect(r.ctx.root == *init.mem.peek(load + 56), "final root is not the restore block's word 56");
    expect(r.ctx.machine.cr3() == r.ctx.root, "machine cr3");
    const std::array<RegId, 7> saved = {RegId::rbx, RegId::rsp, RegId::rbp, RegId::r12,
                                        RegId::r13, RegId::r14, RegId::r15};
    for (std::size_t i = 0; i < saved.size(); ++i) {
        expect(r.ctx.machine.mem.peek(save + 8 * i) == init.reg(saved[i]), "save block word " + std::to_string(8 * i));
        expect(r.ctx.machine.reg(saved[i]) == *init.mem.peek(load + 8 * i), "loaded register");
    }
    expect(r.ctx.machine.mem.peek(save + 56) == c.root, "save block word 56 is not the old root");
    bool wrapped = false;
    for (const Assertion& p : conjuncts(render(r.ctx.ledger))) {
        const auto* o = p.as<node::OtherSpace>();
        if (o && o->root == c.root && has_conjunct(o->body, virt_pt(layout::kStackSlot, 0xa0a0)) &&
            has_conjunct(o->body, ia_space())) {
            wrapped = true;
        }
    }
    expect(wrapped, "old-space claims are not wrapped in [old root]");
}

void unsound_frame() {
    const CaseStudy c = *case_study("swtch");
    MachineState m = c.fixture.state;
    m.set_reg(RegId::rbx, layout::kOtherRoot);
    const CheckSetup setup{m, c.fixture.registry, {}, CheckMode::Coexec};
    const Script script = *parse_program("mov cr3, rbx");
    const std::string rest = " * iaspace * [0x40000](iaspace) * rbx |->r 0x40000";
    const Assertion bare = virt_pt(layout::kStackSlot, 0xa0a0);
    const Assertion boxed = other_space(layout::kRoot, bare);

    const Report r1 = check_double(*parse_assertion(bare.to_string() + rest), layout::kRoot, script, c.stubs, setup, bare);
    expect(r1.violation && r1.violation->kind == ViolationKind::UnsoundFrame,
           "bare frame not rejected as UnsoundFrame: " + (r1.violation ? r1.violation->describe() : "accepted"));
    expect(r1.frame_warnings.size() == 1 && r1.frame_warnings[0].claim == bare, "audit did not name the claim");

    const Report r2 = check_double(*parse_assertion(boxed.to_string() + rest), layout::kRoot, script, c.stubs, setup, boxed);
    expect(r2.ok(), r2.ok() ? "" : r2.violation->describe());
    expect(r2.frame_warnings.empty(), "audit warns about the wrapped claim");
}

void coexec_soundness() {
    const gen::World w = gen::make_world();
    std::mt19937_64 rng(8);
    std::size_t switches = 0;
    for (int i = 0; i < 200; ++i) {
        const gen::RandomDouble d = gen::random_double(rng, w, 10 + rng() % 30);
        const Report r = check_double(d.pre, d.root, d.script, builtin_stubs(), d.setup);
        expect(r.ok(), "script " + std::to_string(i) + " rejected: " + (r.ok() ? "" : r.violation->describe()));
        auto ran = run(d.setup.init, instructions_of(d.script), StepOptions{true, false});
        expect(ran.has_value(), "machine faulted on script " + std::to_string(i));
        auto sat = machine_sat(render(r.ctx.ledger), r.ctx.root, *ran, r.ctx.registry);
        expect(sat.ok(), "final ledger of script " + std::to_string(i) + ": " + (sat ? "" : sat.error().describe()));
        for (const StepRecord& s : r.steps) switches += s.root_before != s.root_after;
    }
    expect(switches > 100, "generator rarely switches roots");
}

void unmap_roundtrip() {
    const CaseStudy map = *case_study("map_new_page");
    const Report mapped = run_case(map);
    expect(mapped.ok(), "map failed");
    const CaseStudy unmap = *case_study("unmap_page");
    const Report r = resume_double(mapped, unmap.script, unmap.stubs, unmap.expected_post);
    expect(r.ok(), r.ok() ? "" : r.violation->describe());
    expect(r.ctx.registry == map.fixture.registry, "walk map not restored");
    const auto page = r.ctx.ledger.find(Location::phys(layout::kFreeFrame << 12));
    expect(page && page->q.is_one(), "no full claim on the released frame");
    const Report after = resume_double(r, *parse_program("@assert { 0x400000 |->v 0x0 }"), unmap.stubs);
    expect(!after.ok(), "VirtPt on the unmapped va accepted");
    const Report direct = run_case(unmap);
    expect(direct.ok(), "unmap_page fixture: " + (direct.ok() ? "" : direct.violation->describe()));
}

void determinism(const std::string& cli, const fs::path& fixtures) {
    const fs::path tmp = fs::temp_directory_path() / ("vmodal_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(tmp);
    std::vector<std::string> commands;
    for (const std::string& name : case_names()) {
        const fs::path d = fixtures / name;
        const std::string base = cli + " check " + quote(d / "program.vasm") + " --state " + quote(d / "state.json") +
                                 " --pre " + quote(d / "pre.txt") + " --post " + quote(d / "post.txt");
        commands.push_back(base);
        commands.push_back(base + " --report json");
        commands.push_back(base + " --mode resource --report json");
        for (const char* file : {"program.vasm", "pre.txt", "post.txt", "state.json"}) {
            const std::string kind = file[0] == 'p' && file[1] == 'r' && file[2] == 'o' ? "program"
                                     : std::string(file) == "state.json"                ? "state"
                                                                                         : "assertion";
            const Captured c = capture(cli + " fmt " + kind + " " + quote(d / file));
            expect(c.status == 0, "fmt failed on " + (d / file).string());
            expect(c.out == slurp(d / file), (d / file).string() + " does not round-trip");
        }
        for (int i = 0; i < 2; ++i) {
            const Captured e = capture(cli + " case " + name + " --emit " + quote(tmp / std::to_string(i) / name));
            expect(e.status == 0, "case --emit " + name);
        }
        for (const char* file : {"program.vasm", "pre.txt", "post.txt", "state.json"}) {
            const std::string a = slurp(tmp / "0" / name / file);
            expect(a == slurp(tmp / "1" / name / file), "emit differs between runs: " + name);
            expect(a == slurp(d / file), "shipped fixture is stale: " + (d / file).string());
        }
    }
    const fs::path cl = fixtures / "cli";
    commands.push_back(cli + " walk --state " + quote(cl / "tables.json") + " --root 0x1000 --va 0x200000");
    commands.push_back(cli + " walk --state " + quote(cl / "tables.json") + " --root 0x1000 --va 0x400000");
    commands.push_back(cli + " run " + quote(cl / "write_read.vasm") + " --state " + quote(cl / "tables.json") + " --trace");
    commands.push_back(cli + " run " + quote(cl / "read_unmapped.vasm") + " --state " + quote(cl / "tables.json") + " --trace");
    commands.push_back(cli + " run " + quote(fixtures / "swtch" / "program.vasm") + " --state " +
                       quote(fixtures / "swtch" / "state.json") + " --trace");
    for (const std::string& cmd : commands) {
        const Captured a = capture(cmd);
        const Captured b = capture(cmd);
        expect(a.status == b.status && a.out == b.out, "output differs between runs: " + cmd);
        expect(a.status == 0 || a.status == 1, "unexpected exit " + std::to_string(a.status) + ": " + cmd);
        expect(!a.out.empty(), "no output: " + cmd);
    }
    fs::remove_all(tmp);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: vmodal_acceptance <vmodal> <fixtures-dir>\n";
        return 2;
    }
    const std::string cli = quote(argv[1]);
    const fs::path fixtures = argv[2];

    const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
        {"translation matches the naive walker on 10000 addresses", translation_oracle},
        {"fraction conservation", fraction_conservation},
        {"modality laws", modality_laws},
        {"IASpace sensitivity", iaspace_sensitivity},
        {"map_new_page end to end", map_new_page_end_to_end},
        {"swtch end to end", swtch_end_to_end},
        {"framing across cr3 is rejected unless wrapped", unsound_frame},
        {"co-execution soundness", coexec_soundness},
        {"unmap after map", unmap_roundtrip},
        {"determinism and round trips", [&] { determinism(cli, fixtures); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string why;
        try {
            criteria[i].second();
        } catch (const Failure& f) {
            why = f.why;
        } catch (const std::exception& e) {
            why = std::string("exception: ") + e.what();
        }
        std::cout << (why.empty() ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first;
        if (!why.empty()) {
            std::cout << ": " << why;
            ++failed;
        }
        std::cout << "\n";
    }
    return failed == 0 ? 0 : 1;
}
