#include "vmodal/cases.hpp"

#include <array>
#include <fstream>

#include "vmodal/format.hpp"
#include "vmodal/syntax.hpp"

namespace vmodal {

using namespace layout;

CheckSetup CaseStudy::setup(CheckMode mode) const {
    return CheckSetup{fixture.state, fixture.registry, fixture.free_frames, mode};
}

namespace {

// Maps the page of va to pa in existing tables, taking new table frames from
// `next`. Unlike synth_tables this may point a leaf at a table frame.
void install(PhysMemory& mem, std::uint64_t root, std::uint64_t va, std::uint64_t pa, std::uint64_t& next) {
    const VaIndices idx = split_va(va);
    std::uint64_t table = root >> 12;
    for (int level = 4; level >= 2; --level) {
        const PhysAddr slot{W52::truncate(table), W12::truncate(idx.index(level).value() * 8)};
        const Pte e = decode_pte(*mem.read(slot));
        if (e.present()) {
            table = e.frame().value();
        } else {
            mem.add_frame(next);
            mem.write(slot, Pte::encode(next, true, true).raw.value());
            table = next++;
        }
    }
    mem.write(PhysAddr{W52::truncate(table), W12::truncate(idx.l1.value() * 8)},
              Pte::encode(pa >> 12, true, true).raw.value());
}

Assertion must_parse(std::string_view text) {
    auto a = parse_assertion(text);
    if (!a) throw std::logic_error("bad built-in assertion: " + a.error().describe() + ": " + std::string(text));
    return *a;
}

Script must_parse_program(std::string_view text) {
    auto s = parse_program(text);
    if (!s) throw std::logic_error("bad built-in program: " + s.error().describe());
    return *s;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += " * ";
        out += parts[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// map_new_page

// One data page next to kMapVa gives kMapVa an L1 table whose entry for
// kMapVa is still empty; a window page makes that L1 table writable
// through virtual memory.
StateConfig map_fixture() {
    const Mapping neighbour{kMapVa + kPageSize, 0x20000, true};
    auto t = synth_tables(std::span(&neighbour, 1), kRoot >> 12);
    StateConfig c;
    c.state.mem = t->mem;
    const std::uint64_t l1_slot = walk(t->root, t->mem, kMapVa).levels[3].slot.bytes();
    std::uint64_t next = t->table_frames.back() + 1;
    install(c.state.mem, t->root, kPteWindow, l1_slot & ~0xFFFull, next);
    c.state.set_reg(RegId::cr3, t->root);
    c.state.set_reg(RegId::rdi, kMapVa);
    c.registry.create_space(t->root);
    c.registry.find(t->root)->insert(kPteWindow + (l1_slot & 0xFFF), l1_slot);
    c.free_frames = {kFreeFrame, kFreeFrame + 1};
    return c;
}

// The walk-map entry that lies in the pte window.
std::pair<std::uint64_t, std::uint64_t> window_entry(const StateConfig& c) {
    for (const auto& [va, pa] : *c.registry.find(kRoot)) {
        if (va >= kPteWindow && va < kPteWindow + kPageSize) return {va, pa};
    }
    throw std::logic_error("fixture has no pte window");
}
std::uint64_t pte_addr_of(const StateConfig& c) { return window_entry(c).first; }
std::uint64_t l1_slot_of(const StateConfig& c) { return window_entry(c).second; }

const char* const kMapProgram =
    "call ensure_L1_page\n"
    "mov r14, rax\n"
    "call alloc_phys_page_or_panic\n"
    "mov [r14], rax\n"
    "@ghost insert_walk va=rdi pa=rax-3\n"
    "@ghost pte_to_virt va=rdi\n";

CaseStudy map_new_page() {
    CaseStudy c;
    c.name = "map_new_page";
    c.root = kRoot;
    c.fixture = map_fixture();
    c.stubs = builtin_stubs();
    const std::uint64_t entry = (kFreeFrame << 12) | 3;
    c.pre = must_parse("rdi |->r " + hex(kMapVa) + " * rax |->r 0x0 * r14 |->r 0x0 * iaspace * pure(unmapped " +
                       hex(kRoot) + " " + hex(kMapVa) + ")");
    c.script = must_parse_program(kMapProgram);
    c.expected_post = must_parse(hex(kMapVa) + " |->v 0x0 * " + hex(pte_addr_of(c.fixture)) + " |->vpte {511/512} " +
                                 hex(l1_slot_of(c.fixture)) + " " + hex(entry) + " * rdi |->r " + hex(kMapVa) +
                                 " * r14 |->r " + hex(pte_addr_of(c.fixture)) + " * rax |->r " + hex(entry) +
                                 " * iaspace");
    return c;
}

// Every word of the new page, one ghost insertion per word.
CaseStudy map_new_page_full() {
    CaseStudy c = map_new_page();
    c.name = "map_new_page_full";
    std::string program =
        "call ensure_L1_page\n"
        "mov r14, rax\n"
        "call alloc_zeroed_page\n"
        "mov [r14], rax\n"
        "@ghost insert_walk va=rdi pa=rax-3\n";
    std::vector<std::string> post{hex(kMapVa) + " |->v 0x0", "iaspace"};
    for (std::uint64_t off = 8; off < kPageSize; off += 8) {
        program += "@ghost insert_walk va=rdi+" + hex(off) + " pa=rax+" + hex(off - 3) + "\n";
        post.push_back(hex(kMapVa + off) + " |->v 0x0");
    }
    c.script = must_parse_program(program);
    c.expected_post = must_parse(join(post));
    return c;
}

// ---------------------------------------------------------------------------
// unmap_page: starts where map_new_page ends.

CaseStudy unmap_page() {
    const CaseStudy map = map_new_page();
    const Report r = check_double(map.pre, map.root, map.script, map.stubs, map.setup(), map.expected_post);
    if (!r.ok()) throw std::logic_error("map_new_page fixture failed: " + r.violation->describe());

    CaseStudy c;
    c.name = "unmap_page";
    c.root = kRoot;
    c.stubs = builtin_stubs();
    c.fixture.state = r.ctx.machine;
    c.fixture.state.pc = 0;
    c.fixture.registry = r.ctx.registry;
    c.fixture.free_frames = r.ctx.free_frames;
    const std::uint64_t pte = pte_addr_of(c.fixture);
    const std::uint64_t slot = l1_slot_of(c.fixture);
    const std::uint64_t entry = (kFreeFrame << 12) | 3;
    c.pre = must_parse("rdi |->r " + hex(kMapVa) + " * r14 |->r " + hex(pte) + " * rax |->r " + hex(entry) + " * " +
                       hex(kMapVa) + " |->v 0x0 * " + hex(pte) + " |->vpte {511/512} " + hex(slot) + " " + hex(entry) +
                       " * iaspace");
    c.script = must_parse_program(
        "@ghost remove_walk va=rdi\n"
        "mov rax, 0x0\n"
        "mov [r14], rax\n");
    c.expected_post = must_parse("pure(unmapped " + hex(kRoot) + " " + hex(kMapVa) + ") * phys " + hex(kFreeFrame) +
                                 ":0x0 |->a 0x0 * " + hex(pte) + " |->vpte {511/512} " + hex(slot) +
                                 " 0x0 * rax |->r 0x0 * iaspace");
    return c;
}

// ---------------------------------------------------------------------------
// swtch

constexpr std::array<RegId, 7> kCalleeSaved = {RegId::rbx, RegId::rsp, RegId::rbp, RegId::r12,
                                               RegId::r13, RegId::r14, RegId::r15};
constexpr std::array<std::uint64_t, 7> kOldValues = {0xa1, 0x7ff000, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7};
constexpr std::array<std::uint64_t, 7> kNewValues = {0xb1, 0x7ff000, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7};
constexpr std::uint64_t kOldReturn = 0xa0a0;
constexpr std::uint64_t kNewReturn = 0xb0b0;

StateConfig swtch_fixture() {
    const std::array<Mapping, 3> first = {
        Mapping{kSaveBlock, 0x21000, true}, Mapping{kLoadBlock, 0x22000, true}, Mapping{kStackSlot, 0x23000, true}};
    const Mapping second{kStackSlot, 0x24000, true};
    auto a = synth_tables(first, kRoot >> 12);
    auto b = synth_tables(std::span(&second, 1), kOtherRoot >> 12);
    StateConfig c;
    c.state.mem = a->mem;
    c.state.mem.merge(b->mem);
    for (std::size_t i = 0; i < kCalleeSaved.size(); ++i) {
        c.state.set_reg(kCalleeSaved[i], kOldValues[i]);
        c.state.mem.write(PhysAddr::from_bytes(0x22000 + 8 * i), kNewValues[i]);
    }
    c.state.mem.write(PhysAddr::from_bytes(0x22000 + 56), kOtherRoot);
    c.state.mem.write(PhysAddr::from_bytes(0x23000), kOldReturn);
    c.state.mem.write(PhysAddr::from_bytes(0x24000), kNewReturn);
    c.state.set_reg(RegId::rdi, kSaveBlock);
    c.state.set_reg(RegId::rsi, kLoadBlock);
    c.state.set_reg(RegId::cr3, kRoot);
    c.registry.create_space(kRoot);
    c.registry.create_space(kOtherRoot);
    WalkMap* theta = c.registry.find(kRoot);
    for (std::uint64_t off = 0; off < 64; off += 8) {
        theta->insert(kSaveBlock + off, 0x21000 + off);
        theta->insert(kLoadBlock + off, 0x22000 + off);
    }
    theta->insert(kStackSlot, 0x23000);
    c.registry.find(kOtherRoot)->insert(kStackSlot, 0x24000);
    return c;
}

const char* const kSwtchProgram =
    "; save callee-saved registers and the current root\n"
    "mov [rdi], rbx\n"
    "mov [rdi+8], rsp\n"
    "mov [rdi+16], rbp\n"
    "mov [rdi+24], r12\n"
    "mov [rdi+32], r13\n"
    "mov [rdi+40], r14\n"
    "mov [rdi+48], r15\n"
    "mov [rdi+56], cr3\n"
    "; load the next context\n"
    "mov rbx, [rsi]\n"
    "mov rsp, [rsi+8]\n"
    "mov rbp, [rsi+16]\n"
    "mov r12, [rsi+24]\n"
    "mov r13, [rsi+32]\n"
    "mov r14, [rsi+40]\n"
    "mov r15, [rsi+48]\n"
    "mov cr3, [rsi+56]\n";

CaseStudy swtch() {
    CaseStudy c;
    c.name = "swtch";
    c.root = kRoot;
    c.fixture = swtch_fixture();
    c.stubs = builtin_stubs();
    c.script = must_parse_program(kSwtchProgram);

    std::vector<std::string> pre{"rdi |->r " + hex(kSaveBlock), "rsi |->r " + hex(kLoadBlock)};
    std::vector<std::string> post = pre;
    std::vector<std::string> old_space;
    for (std::size_t i = 0; i < kCalleeSaved.size(); ++i) {
        const std::string name(reg_name(kCalleeSaved[i]));
        pre.push_back(name + " |->r " + hex(kOldValues[i]));
        post.push_back(name + " |->r " + hex(kNewValues[i]));
    }
    std::vector<std::string> load_block;
    for (std::size_t i = 0; i < 8; ++i) {
        const std::uint64_t off = 8 * i;
        const std::uint64_t loaded = i < 7 ? kNewValues[i] : kOtherRoot;
        const std::uint64_t saved = i < 7 ? kOldValues[i] : kRoot;
        pre.push_back(hex(kSaveBlock + off) + " |->v 0x0");
        load_block.push_back(hex(kLoadBlock + off) + " |->v {1/2} " + hex(loaded));
        old_space.push_back(hex(kSaveBlock + off) + " |->v " + hex(saved));
    }
    pre.insert(pre.end(), load_block.begin(), load_block.end());
    old_space.insert(old_space.end(), load_block.begin(), load_block.end());
    const std::string p_current = hex(kStackSlot) + " |->v " + hex(kOldReturn);
    const std::string p_other = hex(kStackSlot) + " |->v " + hex(kNewReturn);
    pre.push_back("iaspace");
    pre.push_back("[" + hex(kOtherRoot) + "](iaspace)");
    pre.push_back("[" + hex(kRoot) + "](" + p_current + ")");
    pre.push_back("[" + hex(kOtherRoot) + "](" + p_other + ")");
    old_space.push_back(p_current);
    old_space.push_back("iaspace");
    post.push_back("[" + hex(kRoot) + "](" + join(old_space) + ")");
    post.push_back("iaspace");
    post.push_back(p_other);
    c.pre = must_parse(join(pre));
    c.expected_post = must_parse(join(post));
    return c;
}

}  // namespace

std::vector<std::string> case_names() { return {"map_new_page", "map_new_page_full", "unmap_page", "swtch"}; }

Expected<CaseStudy, std::string> case_study(std::string_view name) {
    if (name == "map_new_page") return map_new_page();
    if (name == "map_new_page_full") return map_new_page_full();
    if (name == "unmap_page") return unmap_page();
    if (name == "swtch") return swtch();
    return unexpected("UnknownCase: " + std::string(name));
}

Status<std::string> emit_case(const CaseStudy& c, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return unexpected("cannot create " + dir.string() + ": " + ec.message());
    const std::pair<const char*, std::string> files[] = {
        {"program.vasm", print_program(c.script)},
        {"state.json", print_config(c.fixture)},
        {"pre.txt", c.pre.to_string() + "\n"},
        {"post.txt", c.expected_post.to_string() + "\n"},
    };
    for (const auto& [name, text] : files) {
        std::ofstream out(dir / name, std::ios::binary);
        out << text;
        if (!out) return unexpected("cannot write " + (dir / name).string());
    }
    return {};
}

}  // namespace vmodal
