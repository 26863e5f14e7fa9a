#include <algorithm>
#include <array>
#include <cstdio>
#include <deque>
#include <map>
#include <set>

#include "secured/instrument.hpp"

namespace secured {

namespace {

std::string hex(Addr a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%x", a);
  return buf;
}

constexpr Word kFull = 0xFFFFFFFFu;

// Abstract value of a register across the two cores. For Comp, the Ā core
// holds (A value) XOR mask; `supp` over-approximates the bits that may be set
// in the A value.
struct Tag {
  enum Kind : std::uint8_t { Undef, Plain, Comp, Bad };
  Kind kind = Undef;
  Word mask = 0;
  Word supp = kFull;

  static Tag plain(Word s = kFull) { return {Plain, 0, s}; }
  static Tag comp(Word m, Word s) { return m == 0 ? plain(s) : Tag{Comp, m, s}; }
  static Tag bad() { return {Bad, 0, kFull}; }
  friend bool operator==(const Tag&, const Tag&) = default;
};

Tag join(const Tag& a, const Tag& b) {
  if (a == b) return a;
  if (a.kind == Tag::Bad || b.kind == Tag::Bad) return Tag::bad();
  if (a.kind == Tag::Undef || b.kind == Tag::Undef) return Tag{};
  if (a.kind == Tag::Plain && b.kind == Tag::Plain) return Tag::plain(a.supp | b.supp);
  if (a.kind == Tag::Comp && b.kind == Tag::Comp && a.mask == b.mask) return Tag::comp(a.mask, a.supp | b.supp);
  return Tag::bad();
}

struct State {
  std::array<Tag, kNumRegisters> regs{};
  Tag hi, lo;
  bool reached = false;
  friend bool operator==(const State&, const State&) = default;
};

State join(const State& a, const State& b) {
  if (!a.reached) return b;
  if (!b.reached) return a;
  State s;
  s.reached = true;
  for (std::size_t k = 0; k < kNumRegisters; ++k) s.regs[k] = join(a.regs[k], b.regs[k]);
  s.hi = join(a.hi, b.hi);
  s.lo = join(a.lo, b.lo);
  return s;
}

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

bool byte_table(const Segment& s) {
  return std::all_of(s.words.begin(), s.words.end(), [](Word w) { return w <= 0xFF; });
}

class ClosureChecker {
 public:
  ClosureChecker(const Assembly& a, Addr body, Addr end, const std::vector<unsigned>& comp_regs)
      : asm_(a), body_(body), end_(end), comp_regs_(comp_regs) {}

  ClosureReport run() {
    std::map<Addr, State> in;
    State init;
    init.reached = true;
    init.regs[0] = Tag::plain(0);
    for (unsigned r : comp_regs_)
      if (r != 0 && r < kNumRegisters) init.regs[r] = Tag::comp(kFull, kFull);
    in[body_] = init;

    std::deque<Addr> work{body_};
    std::set<Addr> queued{body_};
    collecting_ = false;
    while (!work.empty()) {
      const Addr pc = work.front();
      work.pop_front();
      queued.erase(pc);
      State out = in[pc];
      std::vector<Addr> succ;
      transfer(pc, out, succ);
      for (Addr s : succ) {
        if (s == end_) continue;
        State merged = join(in[s], out);
        if (!(merged == in[s])) {
          in[s] = merged;
          if (queued.insert(s).second) work.push_back(s);
        }
      }
    }
    collecting_ = true;
    for (auto& [pc, st] : in) {
      if (!st.reached) continue;
      State copy = st;
      std::vector<Addr> succ;
      transfer(pc, copy, succ);
    }
    return std::move(report_);
  }

 private:
  void error(Addr pc, std::string msg) {
    if (collecting_) report_.errors.push_back({pc, std::move(msg)});
  }
  void warn(Addr pc, std::string msg) {
    if (collecting_) report_.warnings.push_back({pc, std::move(msg)});
  }

  Tag read(Addr pc, const State& s, unsigned r) {
    const Tag& t = s.regs[r];
    if (t.kind == Tag::Undef) error(pc, "reads r" + std::to_string(r) + " before it is written inside the region");
    if (t.kind == Tag::Bad) error(pc, "operand r" + std::to_string(r) + " has an indeterminate complement tag");
    return t;
  }

  void write(Addr pc, State& s, unsigned r, Tag t) {
    if (r == 0) return;
    if (t.kind == Tag::Comp && (t.supp & ~t.mask) != 0)
      warn(pc, "r" + std::to_string(r) + " write is only partially balanced");
    s.regs[r] = t;
  }

  static bool usable(const Tag& t) { return t.kind == Tag::Plain || t.kind == Tag::Comp; }

  void transfer(Addr pc, State& s, std::vector<Addr>& succ) {
    if (pc < body_ || pc >= end_) {
      error(pc, "control leaves the balanced region");
      return;
    }
    const auto w = asm_.image.read(Space::Instruction, pc);
    const auto ins = w ? decode(*w) : std::nullopt;
    if (!ins) {
      error(pc, "undecodable word in balanced region");
      return;
    }
    const Instruction& i = *ins;
    const Word imm_z = i.imm;
    auto fail_dst = [&](unsigned rd, const std::string& msg) {
      error(pc, msg);
      if (rd != 0) s.regs[rd] = Tag::bad();
    };
    bool falls = true;

    switch (i.op) {
      case Op::Chk:
        break;
      case Op::Add: case Op::Or: {
        const Tag a = read(pc, s, i.rs), b = read(pc, s, i.rt);
        if (!usable(a) || !usable(b)) { fail_dst(i.rd, "indeterminate operand"); break; }
        if (a.kind == Tag::Plain && b.kind == Tag::Plain) {
          write(pc, s, i.rd, Tag::plain(i.op == Op::Or ? (a.supp | b.supp) : kFull));
          break;
        }
        // Disjoint bit footprints: add and or coincide and commute with the masks.
        const Word fa = a.supp | a.mask, fb = b.supp | b.mask;
        if ((fa & fb) != 0) {
          fail_dst(i.rd, std::string(info(i.op).mnemonic) + " of overlapping complemented values is not complement-closed");
          break;
        }
        write(pc, s, i.rd, Tag::comp(a.mask | b.mask, a.supp | b.supp));
        break;
      }
      case Op::Addi: {
        const Tag a = read(pc, s, i.rs);
        if (!usable(a)) { fail_dst(i.rt, "indeterminate operand"); break; }
        if (a.kind == Tag::Comp && i.imm != 0) {
          fail_dst(i.rt, "addi on a complemented value is not complement-closed");
          break;
        }
        write(pc, s, i.rt, a.kind == Tag::Comp ? a : Tag::plain());
        break;
      }
      case Op::Sub: case Op::Slt: {
        const Tag a = read(pc, s, i.rs), b = read(pc, s, i.rt);
        if (a.kind != Tag::Plain || b.kind != Tag::Plain) {
          fail_dst(i.rd, std::string(info(i.op).mnemonic) + " on a complemented value is not complement-closed");
          break;
        }
        write(pc, s, i.rd, Tag::plain(i.op == Op::Slt ? 1 : kFull));
        break;
      }
      case Op::Slti: {
        const Tag a = read(pc, s, i.rs);
        if (a.kind != Tag::Plain) { fail_dst(i.rt, "slti on a complemented value is not complement-closed"); break; }
        write(pc, s, i.rt, Tag::plain(1));
        break;
      }
      case Op::And: {
        const Tag a = read(pc, s, i.rs), b = read(pc, s, i.rt);
        if (a.kind == Tag::Plain && b.kind == Tag::Plain) { write(pc, s, i.rd, Tag::plain(a.supp & b.supp)); break; }
        if ((a.kind == Tag::Plain && a.supp == 0) || (b.kind == Tag::Plain && b.supp == 0)) {
          write(pc, s, i.rd, Tag::plain(0));
          break;
        }
        fail_dst(i.rd, "and with a complemented value is not complement-closed");
        break;
      }
      case Op::Andi: {
        const Tag a = read(pc, s, i.rs);
        if (!usable(a)) { fail_dst(i.rt, "indeterminate operand"); break; }
        write(pc, s, i.rt, a.kind == Tag::Plain ? Tag::plain(a.supp & imm_z) : Tag::comp(a.mask & imm_z, a.supp & imm_z));
        break;
      }
      case Op::Ori: {
        const Tag a = read(pc, s, i.rs);
        if (!usable(a)) { fail_dst(i.rt, "indeterminate operand"); break; }
        write(pc, s, i.rt, a.kind == Tag::Plain ? Tag::plain(a.supp | imm_z) : Tag::comp(a.mask & ~imm_z, a.supp | imm_z));
        break;
      }
      case Op::Xor: {
        const Tag a = read(pc, s, i.rs), b = read(pc, s, i.rt);
        if (!usable(a) || !usable(b)) { fail_dst(i.rd, "indeterminate operand"); break; }
        write(pc, s, i.rd, Tag::comp(a.mask ^ b.mask, a.supp | b.supp));
        break;
      }
      case Op::Xori: {
        const Tag a = read(pc, s, i.rs);
        if (!usable(a)) { fail_dst(i.rt, "indeterminate operand"); break; }
        write(pc, s, i.rt, Tag::comp(a.mask, a.supp | imm_z));
        break;
      }
      case Op::Nor: {
        const Tag a = read(pc, s, i.rs), b = read(pc, s, i.rt);
        if (!usable(a) || !usable(b)) { fail_dst(i.rd, "indeterminate operand"); break; }
        if (a.kind == Tag::Plain && b.kind == Tag::Plain) { write(pc, s, i.rd, Tag::plain()); break; }
        const Word fa = a.supp | a.mask, fb = b.supp | b.mask;
        if ((fa & fb) != 0) { fail_dst(i.rd, "nor of overlapping complemented values is not complement-closed"); break; }
        write(pc, s, i.rd, Tag::comp(a.mask | b.mask, kFull));
        break;
      }
      case Op::Sll: case Op::Srl: {
        const Tag a = read(pc, s, i.rt);
        if (!usable(a)) { fail_dst(i.rd, "indeterminate operand"); break; }
        auto sh = [&](Word v) { return i.op == Op::Sll ? v << i.shamt : v >> i.shamt; };
        write(pc, s, i.rd, a.kind == Tag::Plain ? Tag::plain(sh(a.supp)) : Tag::comp(sh(a.mask), sh(a.supp)));
        break;
      }
      case Op::Lui:
        write(pc, s, i.rt, Tag::plain(imm_z << 16));
        break;
      case Op::Lw: case Op::Sw:
        memory(pc, i, s);
        break;
      case Op::Beq: case Op::Bne: {
        const Tag a = read(pc, s, i.rs), b = read(pc, s, i.rt);
        if (a.kind != Tag::Plain || b.kind != Tag::Plain)
          error(pc, "branch on a complemented value would desynchronise the cores");
        succ.push_back(branch_target(pc, i.imm));
        break;
      }
      case Op::J:
        succ.push_back(jump_target(pc, i.target));
        falls = false;
        break;
      case Op::Mult: {
        const Tag a = read(pc, s, i.rs), b = read(pc, s, i.rt);
        if (a.kind != Tag::Plain || b.kind != Tag::Plain) {
          error(pc, "mult on a complemented value is not complement-closed");
          s.hi = s.lo = Tag::bad();
        } else {
          s.hi = s.lo = Tag::plain();
        }
        break;
      }
      case Op::Mfhi: case Op::Mflo: {
        const Tag t = i.op == Op::Mfhi ? s.hi : s.lo;
        if (t.kind == Tag::Undef) error(pc, "reads HI/LO before it is written inside the region");
        write(pc, s, i.rd, t);
        break;
      }
      case Op::Jal: case Op::Jr: case Op::Syscall: case Op::Halt:
      case Op::Iret: case Op::StartBal: case Op::EndBal:
        error(pc, std::string(info(i.op).mnemonic) + " is not allowed inside a balanced region");
        falls = false;
        break;
    }
    if (falls) succ.push_back(pc + 4);
  }

  void memory(Addr pc, const Instruction& i, State& s) {
    const Addr base = static_cast<Addr>(static_cast<std::int32_t>(static_cast<std::int16_t>(i.imm)));
    const Segment* seg = asm_.image.find(Space::Data, base);
    const Tag addr = read(pc, s, i.rs);
    const bool load = i.op == Op::Lw;
    auto fail = [&](const std::string& msg) {
      error(pc, msg);
      if (load && i.rt != 0) s.regs[i.rt] = Tag::bad();
    };
    if (!seg) {
      fail("memory operand " + hex(base) + " does not resolve to a data section");
      return;
    }
    switch (seg->section) {
      case Section::BalTable: {
        if (!load) { fail("store into a balanced table"); return; }
        const Word want = static_cast<Word>(seg->words.size() - 1) << 2;
        if (base != seg->start || addr.kind != Tag::Comp || addr.mask != want || addr.supp != want) {
          fail("table index must be a complemented, masked, word-scaled value");
          return;
        }
        write(pc, s, i.rt, byte_table(*seg) ? Tag::comp(0xFF, 0xFF) : Tag::comp(kFull, kFull));
        return;
      }
      case Section::BalData:
        if (addr.kind != Tag::Plain) { fail("balanced data address must be identical on both cores"); return; }
        if (load) {
          write(pc, s, i.rt, Tag::comp(kFull, kFull));
        } else {
          const Tag v = read(pc, s, i.rt);
          if (v.kind != Tag::Comp) error(pc, "store of a non-complemented value into balanced data");
        }
        return;
      case Section::Data:
      case Section::Stack:
        if (addr.kind != Tag::Plain) { fail("plain data address must be identical on both cores"); return; }
        if (load) {
          warn(pc, "plain data load leaks identically on both cores");
          write(pc, s, i.rt, Tag::plain());
        } else {
          const Tag v = read(pc, s, i.rt);
          if (v.kind != Tag::Plain) error(pc, "store of a complemented value into plain data");
        }
        return;
      case Section::Text:
        fail("memory operand in code");
        return;
    }
  }

  const Assembly& asm_;
  Addr body_;
  Addr end_;
  std::vector<unsigned> comp_regs_;
  bool collecting_ = false;
  ClosureReport report_;
};

}  // namespace

ClosureReport verify_complement_closure(const Assembly& marked, const BalancedRegion& region) {
  auto start = marked.symbols.address_of(region.start_label);
  auto end = marked.symbols.address_of(region.end_label);
  if (!start || !end) throw InstrumentError("balanced region labels not defined");
  auto op_at = [&](Addr a) -> std::optional<Op> {
    auto w = marked.image.read(Space::Instruction, a);
    if (!w) return std::nullopt;
    auto i = decode(*w);
    return i ? std::optional<Op>(i->op) : std::nullopt;
  };
  if (op_at(*start) != Op::StartBal || op_at(*end) != Op::EndBal)
    throw InstrumentError("region " + region.start_label + ".." + region.end_label + " is not marked");
  return ClosureChecker(marked, *start + 4, *end, region.complement_regs).run();
}

MemoryImage complement_image(const MemoryImage& img) {
  MemoryImage out = img;
  for (auto& seg : out.segments()) {
    if (seg.section == Section::BalData) {
      for (auto& w : seg.words) w = ~w;
    } else if (seg.section == Section::BalTable) {
      const std::size_t n = seg.words.size();
      if (!is_pow2(n))
        throw InstrumentError("balanced table at " + hex(seg.start) + " has " + std::to_string(n) +
                              " entries, not a power of two");
      const Word mask = byte_table(seg) ? 0xFFu : kFull;
      std::vector<Word> t(n);
      for (std::size_t j = 0; j < n; ++j) t[j] = ~seg.words[(n - 1) ^ j] & mask;
      seg.words = std::move(t);
    }
  }
  return out;
}

MemoryImage generate_complement_image(const Assembly& marked, const std::vector<BalancedRegion>& regions) {
  for (const auto& r : regions) {
    const auto rep = verify_complement_closure(marked, r);
    if (!rep.ok()) {
      std::string msg = "region " + r.start_label + " is not complement-closed:";
      for (const auto& f : rep.errors) msg += "\n  " + hex(f.address) + ": " + f.message;
      throw InstrumentError(msg);
    }
  }
  return complement_image(marked.image);
}

}  // namespace secured
