#include "secured/instrument.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace secured {

namespace {

std::string hex(Addr a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%x", a);
  return buf;
}

}  // namespace

Word checksum_accumulator(std::span<const Word> words) {
  Word acc = 0;
  for (Word w : words) acc = accumulate(acc, w);
  return acc;
}

ChecksumValue compute_checksum(std::span<const Word> words) {
  if (words.empty()) throw InstrumentError("checksum of an empty block");
  return {fold26(checksum_accumulator(words))};
}

bool BasicBlock::ends_in_cfi() const {
  if (words.empty()) return false;
  auto i = decode(words.back());
  return i && is_cfi(i->op);
}

std::optional<std::size_t> ControlFlowGraph::block_starting_at(Addr a) const {
  auto it = std::lower_bound(blocks.begin(), blocks.end(), a,
                             [](const BasicBlock& b, Addr x) { return b.start < x; });
  if (it == blocks.end() || it->start != a) return std::nullopt;
  return static_cast<std::size_t>(it - blocks.begin());
}

std::optional<std::size_t> ControlFlowGraph::block_containing(Addr a) const {
  auto it = std::upper_bound(blocks.begin(), blocks.end(), a,
                             [](Addr x, const BasicBlock& b) { return x < b.start; });
  if (it == blocks.begin()) return std::nullopt;
  --it;
  if (!it->contains(a)) return std::nullopt;
  return static_cast<std::size_t>(it - blocks.begin());
}

// ---------------------------------------------------------------------------

ControlFlowGraph build_cfg(const MemoryImage& img, const SymbolTable& symbols) {
  std::map<Addr, Instruction> code;
  for (const auto& [a, w] : img.code_words()) {
    auto i = decode(w);
    if (!i) throw InstrumentError("undecodable word at " + hex(a));
    code.emplace(a, *i);
  }
  if (code.empty()) throw InstrumentError("image has no code");

  auto in_code = [&](Addr a) { return code.count(a) != 0; };
  auto same_segment_next = [&](Addr a) -> std::optional<Addr> {
    const Segment* s = img.find(Space::Instruction, a);
    if (s && s->contains(a + 4)) return a + 4;
    return std::nullopt;
  };

  std::set<Addr> leaders{img.entry()};
  for (const auto& s : img.segments())
    if (s.section == Section::Text && !s.words.empty()) leaders.insert(s.start);

  auto need_target = [&](Addr from, Addr t) {
    if (!in_code(t)) throw InstrumentError("control transfer at " + hex(from) + " leaves code: " + hex(t));
    leaders.insert(t);
  };

  for (const auto& [a, i] : code) {
    if (i.op == Op::Chk) leaders.insert(a);
    if (!is_cfi(i.op)) continue;
    if (auto n = same_segment_next(a)) leaders.insert(*n);
    switch (i.op) {
      case Op::Beq: case Op::Bne: need_target(a, branch_target(a, i.imm)); break;
      case Op::J: case Op::Jal: need_target(a, jump_target(a, i.target)); break;
      case Op::Jr: {
        auto it = symbols.jump_targets.find(a);
        if (it == symbols.jump_targets.end())
          throw InstrumentError("indirect jump at " + hex(a) + " has no .jtargets annotation");
        for (Addr t : it->second) need_target(a, t);
        break;
      }
      default: break;
    }
  }

  ControlFlowGraph cfg;
  for (auto it = code.begin(); it != code.end();) {
    BasicBlock b;
    b.start = it->first;
    if (it->second.op == Op::Chk) {
      b.chk = it->second.target;
      ++it;
    }
    while (it != code.end()) {
      const Addr a = it->first;
      if (a != b.body_start() + 4 * b.words.size()) break;  // segment gap
      if (!b.words.empty() && leaders.count(a)) break;
      if (b.words.empty() && a != b.start && leaders.count(a)) break;  // chk followed by leader
      b.words.push_back(encode(it->second));
      ++it;
      if (is_cfi(decode(b.words.back())->op)) break;
    }
    if (b.words.empty()) throw InstrumentError("empty basic block at " + hex(b.start));
    b.checksum = compute_checksum(b.words);
    cfg.blocks.push_back(std::move(b));
  }

  auto block_at = [&](Addr a) {
    auto k = cfg.block_starting_at(a);
    if (!k) throw InstrumentError("internal: no block at " + hex(a));
    return *k;
  };

  for (std::size_t k = 0; k < cfg.blocks.size(); ++k) {
    const auto& b = cfg.blocks[k];
    const Addr last = b.last_address();
    const Instruction i = *decode(b.words.back());
    auto next = same_segment_next(last);
    auto fall = [&](EdgeKind kind) {
      if (!next) throw InstrumentError("control falls off the end of code at " + hex(last));
      cfg.edges.push_back({k, block_at(*next), kind});
    };
    if (!is_cfi(i.op)) {
      fall(EdgeKind::FallThrough);
      continue;
    }
    switch (i.op) {
      case Op::Beq: case Op::Bne:
        cfg.edges.push_back({k, block_at(branch_target(last, i.imm)), EdgeKind::Taken});
        fall(EdgeKind::FallThrough);
        break;
      case Op::J:
        cfg.edges.push_back({k, block_at(jump_target(last, i.target)), EdgeKind::Taken});
        break;
      case Op::Jal:
        cfg.edges.push_back({k, block_at(jump_target(last, i.target)), EdgeKind::Taken});
        if (next) cfg.edges.push_back({k, block_at(*next), EdgeKind::CallReturn});
        break;
      case Op::Jr:
        for (Addr t : symbols.jump_targets.at(last)) cfg.edges.push_back({k, block_at(t), EdgeKind::Indirect});
        break;
      case Op::StartBal: case Op::EndBal:
        fall(EdgeKind::FallThrough);
        break;
      default:  // halt, iret
        break;
    }
  }
  cfg.entry = block_at(img.entry());
  return cfg;
}

// ---------------------------------------------------------------------------

namespace {

std::string chk_operand(Word v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%07x", v);
  return buf;
}

Statement make_statement(std::string mnemonic, std::vector<std::string> operands, int line) {
  Statement s;
  s.mnemonic = std::move(mnemonic);
  s.operands = std::move(operands);
  s.line = line;
  return s;
}

}  // namespace

InstrumentedProgram insert_chk(const Program& program) {
  const Assembly base = assemble(program);
  for (const auto& [a, w] : base.image.code_words()) {
    auto i = decode(w);
    if (i && i->op == Op::Chk) throw InstrumentError("program is already instrumented (chk at " + hex(a) + ")");
  }
  const ControlFlowGraph cfg = build_cfg(base.image, base.symbols);

  std::set<Addr> starts;
  std::map<Addr, Addr> fallthrough_to;  // last address of a fall-through block -> next block start
  for (const auto& b : cfg.blocks) {
    starts.insert(b.start);
    if (!b.ends_in_cfi()) fallthrough_to[b.last_address()] = b.end();
  }
  std::map<Addr, std::string> synthetic;  // block start -> generated label
  for (const auto& [last, next] : fallthrough_to) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "__bb_%x", next);
    synthetic[next] = buf;
  }

  InstrumentedProgram out;
  auto& stmts = out.program.statements;
  for (std::size_t idx = 0; idx < program.statements.size(); ++idx) {
    Statement st = program.statements[idx];
    const auto addr = base.statement_address[idx];
    if (st.is_instruction() && addr && starts.count(*addr)) {
      Statement chk = make_statement("chk", {chk_operand(0)}, st.line);
      chk.labels = std::move(st.labels);
      st.labels.clear();
      if (auto it = synthetic.find(*addr); it != synthetic.end()) chk.labels.push_back(it->second);
      stmts.push_back(std::move(chk));
    }
    stmts.push_back(std::move(st));
    if (addr && program.statements[idx].is_instruction()) {
      if (auto it = fallthrough_to.find(*addr); it != fallthrough_to.end()) {
        stmts.push_back(make_statement("j", {synthetic.at(it->second)}, program.statements[idx].line));
        ++out.inserted_jumps;
      }
    }
  }

  // Checksums depend on final branch offsets, so lay out first and patch after.
  Assembly laid_out = assemble(out.program);
  const ControlFlowGraph placed = build_cfg(laid_out.image, laid_out.symbols);
  for (std::size_t idx = 0; idx < stmts.size(); ++idx) {
    if (stmts[idx].mnemonic != "chk") continue;
    const Addr a = *laid_out.statement_address[idx];
    auto k = placed.block_starting_at(a);
    if (!k) throw InstrumentError("internal: chk at " + hex(a) + " does not open a block");
    stmts[idx].operands[0] = chk_operand(placed.blocks[*k].checksum.value);
  }

  out.assembly = assemble(out.program);
  out.cfg = build_cfg(out.assembly.image, out.assembly.symbols);
  for (const auto& b : out.cfg.blocks) {
    if (!b.chk || *b.chk != b.checksum.value || !b.ends_in_cfi())
      throw InstrumentError("internal: block at " + hex(b.start) + " failed self-check");
    out.report.push_back({b.start, b.size(), b.checksum,
                          std::string(info(decode(b.words.back())->op).mnemonic)});
  }
  return out;
}

std::string report_jsonl(const std::vector<BlockReport>& report) {
  std::ostringstream os;
  char buf[160];
  for (const auto& r : report) {
    std::snprintf(buf, sizeof buf, "{\"address\":\"0x%08x\",\"size\":%zu,\"checksum\":\"0x%07x\",\"cfi\":\"%s\"}\n",
                  r.address, r.size, r.checksum.value, r.cfi.c_str());
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::size_t> statement_with_label(const Program& p, const std::string& label) {
  for (std::size_t k = 0; k < p.statements.size(); ++k)
    for (const auto& l : p.statements[k].labels)
      if (l == label) return k;
  return std::nullopt;
}

// Index of the first instruction statement at or after `k`.
std::optional<std::size_t> next_instruction(const Program& p, std::size_t k) {
  for (; k < p.statements.size(); ++k) {
    if (p.statements[k].is_instruction()) return k;
    if (p.statements[k].is_directive() && p.statements[k].mnemonic != ".jtargets" &&
        p.statements[k].mnemonic != ".balance")
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

Program mark_balancing(const Program& program, const BalancedRegion& region) {
  const Assembly base = assemble(program);
  auto start = base.symbols.address_of(region.start_label);
  auto end = base.symbols.address_of(region.end_label);
  if (!start || !end) throw InstrumentError("balanced region labels not defined");
  if (base.symbols.labels.at(region.start_label).space != Space::Instruction ||
      base.symbols.labels.at(region.end_label).space != Space::Instruction)
    throw InstrumentError("balanced region labels must be code labels");
  if (*start >= *end) throw InstrumentError("balanced region start must precede its end");
  if (base.image.find(Space::Instruction, *start) != base.image.find(Space::Instruction, *end))
    throw InstrumentError("balanced region must lie in one code segment");

  for (const auto& [a, w] : base.image.code_words()) {
    auto i = decode(w);
    if (i && (i->op == Op::StartBal || i->op == Op::EndBal) && a >= *start && a <= *end)
      throw InstrumentError("nested or overlapping balanced region at " + hex(a));
  }

  const ControlFlowGraph cfg = build_cfg(base.image, base.symbols);
  auto inside = [&](Addr a) { return a >= *start && a < *end; };
  for (const auto& e : cfg.edges) {
    const auto& from = cfg.blocks[e.from];
    const auto& to = cfg.blocks[e.to];
    const Addr src = from.last_address();
    const bool src_in = inside(src);
    const bool dst_in = inside(to.start);
    if (!src_in && dst_in && to.start != *start)
      throw InstrumentError("balanced region is not single-entry: " + hex(src) + " -> " + hex(to.start));
    if (src_in && !dst_in && to.start != *end)
      throw InstrumentError("balanced region exits at " + hex(src) + " other than through its end");
    if (!src_in && to.start == *end)
      throw InstrumentError("region end reachable from " + hex(src) + " without passing its start");
    if (e.kind == EdgeKind::CallReturn && src_in)
      throw InstrumentError("call inside balanced region at " + hex(src));
  }
  const auto si = statement_with_label(program, region.start_label);
  const auto ei = statement_with_label(program, region.end_label);
  const auto s_ins = next_instruction(program, *si);
  const auto e_ins = next_instruction(program, *ei);
  if (!s_ins || !e_ins) throw InstrumentError("balanced region labels must precede instructions");

  Program out;
  for (std::size_t k = 0; k < program.statements.size(); ++k) {
    Statement st = program.statements[k];
    if (k == *s_ins || k == *e_ins) {
      Statement marker = make_statement(k == *s_ins ? "startBal" : "endBal", {}, st.line);
      marker.labels = std::move(st.labels);
      st.labels.clear();
      out.statements.push_back(std::move(marker));
    }
    out.statements.push_back(std::move(st));
  }
  return out;
}

std::vector<BalancedRegion> annotated_regions(const SymbolTable& symbols) {
  std::vector<BalancedRegion> out;
  for (const auto& b : symbols.balance) out.push_back({b.start_label, b.end_label, {}});
  return out;
}

Program mark_annotated_regions(const Program& program) {
  Program p = program;
  const Assembly base = assemble(program);
  for (const auto& region : annotated_regions(base.symbols)) {
    const Assembly cur = assemble(p);
    const auto w = cur.image.read(Space::Instruction, *cur.symbols.address_of(region.start_label));
    if (w) {
      auto i = decode(*w);
      if (i && i->op == Op::StartBal) continue;  // already marked
    }
    p = mark_balancing(p, region);
  }
  return p;
}

InstrumentedProgram instrument(const Program& program) { return insert_chk(mark_annotated_regions(program)); }

}  // namespace secured
