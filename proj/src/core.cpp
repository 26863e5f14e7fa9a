#include "secured/core.hpp"

#include <algorithm>
#include <cstdio>

#include "secured/instrument.hpp"

namespace secured {

Word Memory::read(Addr a) const {
  auto it = pages_.find(a / (4 * kPageWords));
  if (it == pages_.end()) return 0;
  return it->second[(a / 4) % kPageWords];
}

void Memory::write(Addr a, Word w) {
  auto [it, inserted] = pages_.try_emplace(a / (4 * kPageWords));
  if (inserted) it->second.fill(0);
  it->second[(a / 4) % kPageWords] = w;
}

void Memory::load(const MemoryImage& img, Space space) {
  for (const auto& seg : img.segments()) {
    if (space_of(seg.section) != space) continue;
    for (std::size_t k = 0; k < seg.words.size(); ++k) write(seg.start + static_cast<Addr>(4 * k), seg.words[k]);
  }
}

void InstructionMemory::load(const MemoryImage& img) {
  words_.load(img, Space::Instruction);
  for (const auto& seg : img.segments())
    if (seg.section == Section::Text && !seg.words.empty()) ranges_.emplace_back(seg.start, seg.end());
}

bool InstructionMemory::mapped(Addr a) const {
  if (a % 4 != 0) return false;
  return std::any_of(ranges_.begin(), ranges_.end(), [a](const auto& r) { return a >= r.first && a < r.second; });
}

std::optional<Word> InstructionMemory::fetch(Addr a) const {
  if (!mapped(a)) return std::nullopt;
  return words_.read(a);
}

void InstructionMemory::poke(Addr a, Word w) {
  if (!mapped(a)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "address 0x%x is not in a code section", a);
    throw ImageError(buf);
  }
  words_.write(a, w);
}

std::string_view event_name(EventKind k) {
  switch (k) {
    case EventKind::Fetch: return "fetch";
    case EventKind::Retire: return "retire";
    case EventKind::RegWrite: return "reg-write";
    case EventKind::MemRead: return "mem-read";
    case EventKind::MemWrite: return "mem-write";
    case EventKind::IntegrityException: return "integrity-exception";
    case EventKind::IllegalInstruction: return "illegal-instruction";
    case EventKind::AlignmentFault: return "alignment-fault";
    case EventKind::StartBalRetired: return "startBal-retired";
    case EventKind::EndBalRetired: return "endBal-retired";
    case EventKind::NmiSent: return "nmi-sent";
    case EventKind::Halted: return "halted";
    case EventKind::PcWrite: return "pc-write";
    case EventKind::InterruptEntry: return "interrupt-entry";
    case EventKind::ChecksumCompare: return "checksum-compare";
  }
  return "?";
}

std::array<Word, 37> SavedContext::words() const {
  std::array<Word, 37> w{};
  std::copy(regs.begin(), regs.end(), w.begin());
  w[32] = pc;
  w[33] = hi;
  w[34] = lo;
  w[35] = inc_hashed;
  w[36] = hashed | (block_open ? 0x80000000u : 0u);
  return w;
}

SavedContext SavedContext::from_words(const std::array<Word, 37>& w, bool halted) {
  SavedContext c;
  std::copy(w.begin(), w.begin() + 32, c.regs.begin());
  c.pc = w[32];
  c.hi = w[33];
  c.lo = w[34];
  c.inc_hashed = w[35];
  c.hashed = w[36] & kChecksumMask;
  c.block_open = (w[36] >> 31) != 0;
  c.halted = halted;
  return c;
}

// ---------------------------------------------------------------------------

Core::Core(unsigned id, bool integrity, bool balancing) : id_(id) {
  s_.integrity_enabled = integrity;
  s_.balancing_enabled = balancing;
}

void Core::reset(Addr entry) {
  const bool integrity = s_.integrity_enabled;
  const bool balancing = s_.balancing_enabled;
  s_ = CoreState{};
  s_.integrity_enabled = integrity;
  s_.balancing_enabled = balancing;
  s_.pc = entry;
}

bool Core::pipeline_empty() const {
  return std::none_of(s_.pipeline.begin(), s_.pipeline.end(), [](const auto& p) { return p.has_value(); });
}

bool Core::in_flight(Op op) const {
  for (const auto& p : s_.pipeline) {
    if (!p || p->fetch_fault) continue;
    auto i = decode(p->word);
    if (i && i->op == op) return true;
  }
  return false;
}

SavedContext Core::context() const {
  SavedContext c;
  c.regs = s_.regs;
  c.pc = s_.pc;
  c.hi = s_.hi;
  c.lo = s_.lo;
  c.inc_hashed = s_.inc_hashed;
  c.hashed = s_.hashed;
  c.block_open = s_.block_open;
  c.halted = s_.halted;
  return c;
}

void Core::restore(const SavedContext& c) {
  s_.regs = c.regs;
  s_.regs[0] = 0;
  s_.pc = c.pc;
  s_.hi = c.hi;
  s_.lo = c.lo;
  s_.inc_hashed = c.inc_hashed;
  s_.hashed = c.hashed;
  s_.block_open = c.block_open;
  s_.halted = c.halted;
}

void Core::emit(std::vector<CoreEvent>& out, EventKind k, Addr pc, Addr addr, Word value, Word expected) {
  out.push_back(CoreEvent{s_.cycle, id_, k, pc, addr, value, expected});
}

void Core::write_reg(unsigned r, Word v, Addr pc, std::vector<CoreEvent>& out) {
  if (r == 0) return;
  s_.regs[r] = v;
  emit(out, EventKind::RegWrite, pc, r, v);
}

void Core::squash_younger() {
  for (auto& p : s_.pipeline) p.reset();
}

void Core::redirect(Addr from_pc, Addr target) {
  // Fetch runs sequentially, so the in-flight instructions are already the
  // correct path when the target is the next word.
  if (target == from_pc + 4) return;
  squash_younger();
  s_.pc = target;
}

void Core::trap(std::vector<CoreEvent>& out) {
  squash_younger();
  s_.trapped = true;
  s_.halted = true;
  s_.halt_cycle = s_.cycle;
  emit(out, EventKind::Halted, s_.pc);
}

void Core::step(Cycle cycle, const ControlLines& lines, const InstructionMemory& imem, Memory& dmem,
                std::vector<CoreEvent>& out) {
  s_.cycle = cycle;
  s_.on_hold = lines.hold;
  if (lines.hold) return;

  if (lines.interrupt_vector) {
    s_.in_interrupt = true;
    s_.shadow_pc = s_.pc;
    s_.shadow_hashed = s_.hashed;
    s_.shadow_inc = s_.inc_hashed;
    s_.shadow_block_open = s_.block_open;
    s_.block_open = false;
    s_.pc = *lines.interrupt_vector;
    s_.fetch_blocked = false;
    emit(out, EventKind::InterruptEntry, s_.pc, *lines.interrupt_vector);
  } else if (lines.interrupt_return) {
    s_.pc = s_.shadow_pc;
    s_.hashed = s_.shadow_hashed;
    s_.inc_hashed = s_.shadow_inc;
    s_.block_open = s_.shadow_block_open;
    s_.fetch_blocked = false;
    emit(out, EventKind::PcWrite, s_.pc, s_.pc);
  } else if (lines.pc_write) {
    s_.pc = *lines.pc_write;
    s_.fetch_blocked = false;
    if (!s_.trapped) s_.halted = false;
    if (lines.disarm) s_.block_open = false;
    emit(out, EventKind::PcWrite, s_.pc, s_.pc);
  }
  if (s_.halted) return;

  for (std::size_t k = kPipelineDepth - 1; k > 0; --k) s_.pipeline[k] = s_.pipeline[k - 1];
  s_.pipeline[0].reset();
  if (!s_.fetch_blocked && !lines.stall_fetch) {
    PipelineSlot slot{s_.pc, 0, false};
    if (auto w = imem.fetch(s_.pc))
      slot.word = *w;
    else
      slot.fetch_fault = true;
    emit(out, EventKind::Fetch, s_.pc, s_.pc, slot.word);
    s_.pipeline[0] = slot;
    s_.pc += 4;
  }
  // The instruction fetched five cycles ago now occupies the last stage.
  std::optional<PipelineSlot> retiring = s_.pipeline[kPipelineDepth - 1];
  s_.pipeline[kPipelineDepth - 1].reset();
  if (retiring) retire(*retiring, dmem, out);
  s_.regs[0] = 0;
}

void Core::retire(const PipelineSlot& slot, Memory& dmem, std::vector<CoreEvent>& out) {
  const Addr pc = slot.pc;
  ++s_.retired;
  emit(out, EventKind::Retire, pc, pc, slot.word);
  if (slot.fetch_fault) {
    emit(out, EventKind::IllegalInstruction, pc, pc, 0);
    trap(out);
    return;
  }
  const auto decoded = decode(slot.word);
  if (!decoded) {
    emit(out, EventKind::IllegalInstruction, pc, pc, slot.word);
    trap(out);
    return;
  }
  const Instruction& i = *decoded;

  if (s_.integrity_enabled) {
    if (i.op == Op::Chk) {
      if (s_.block_open) {
        // The previous block never reached its CFI.
        emit(out, EventKind::IntegrityException, pc, pc, fold26(s_.inc_hashed), s_.hashed);
        trap(out);
        return;
      }
      s_.block_open = true;
      s_.hashed = i.target;
      s_.inc_hashed = 0;
      ++s_.chk_retired;
      return;
    }
    s_.inc_hashed = accumulate(s_.inc_hashed, slot.word);
    if (is_cfi(i.op)) {
      const Word got = fold26(s_.inc_hashed);
      emit(out, EventKind::ChecksumCompare, pc, pc, got, s_.hashed);
      s_.block_open = false;
      if (got != s_.hashed) {
        emit(out, EventKind::IntegrityException, pc, pc, got, s_.hashed);
        trap(out);
        return;
      }
    }
  } else if (i.op == Op::Chk) {
    ++s_.chk_retired;
    return;
  }

  auto& r = s_.regs;
  const Word a = r[i.rs];
  const Word b = r[i.rt];
  const Word simm = static_cast<Word>(static_cast<std::int32_t>(static_cast<std::int16_t>(i.imm)));
  const Word zimm = i.imm;

  switch (i.op) {
    case Op::Add: write_reg(i.rd, a + b, pc, out); break;
    case Op::Sub: write_reg(i.rd, a - b, pc, out); break;
    case Op::And: write_reg(i.rd, a & b, pc, out); break;
    case Op::Or: write_reg(i.rd, a | b, pc, out); break;
    case Op::Xor: write_reg(i.rd, a ^ b, pc, out); break;
    case Op::Nor: write_reg(i.rd, ~(a | b), pc, out); break;
    case Op::Slt:
      write_reg(i.rd, static_cast<std::int32_t>(a) < static_cast<std::int32_t>(b) ? 1 : 0, pc, out);
      break;
    case Op::Sll:
      if (i.rd != 0) write_reg(i.rd, b << i.shamt, pc, out);
      break;
    case Op::Srl: write_reg(i.rd, b >> i.shamt, pc, out); break;
    case Op::Addi: write_reg(i.rt, a + simm, pc, out); break;
    case Op::Andi: write_reg(i.rt, a & zimm, pc, out); break;
    case Op::Ori: write_reg(i.rt, a | zimm, pc, out); break;
    case Op::Xori: write_reg(i.rt, a ^ zimm, pc, out); break;
    case Op::Slti:
      write_reg(i.rt, static_cast<std::int32_t>(a) < static_cast<std::int32_t>(simm) ? 1 : 0, pc, out);
      break;
    case Op::Lui: write_reg(i.rt, zimm << 16, pc, out); break;
    case Op::Lw: {
      const Addr ea = a + simm;
      if (ea % 4 != 0) {
        emit(out, EventKind::AlignmentFault, pc, ea);
        trap(out);
        return;
      }
      const Word v = dmem.read(ea);
      emit(out, EventKind::MemRead, pc, ea, v);
      write_reg(i.rt, v, pc, out);
      break;
    }
    case Op::Sw: {
      const Addr ea = a + simm;
      if (ea % 4 != 0) {
        emit(out, EventKind::AlignmentFault, pc, ea);
        trap(out);
        return;
      }
      dmem.write(ea, b);
      emit(out, EventKind::MemWrite, pc, ea, b);
      break;
    }
    case Op::Mult: {
      const auto p = static_cast<std::int64_t>(static_cast<std::int32_t>(a)) *
                     static_cast<std::int64_t>(static_cast<std::int32_t>(b));
      s_.hi = static_cast<Word>(static_cast<std::uint64_t>(p) >> 32);
      s_.lo = static_cast<Word>(static_cast<std::uint64_t>(p));
      break;
    }
    case Op::Mfhi: write_reg(i.rd, s_.hi, pc, out); break;
    case Op::Mflo: write_reg(i.rd, s_.lo, pc, out); break;
    case Op::Beq:
      if (a == b) redirect(pc, branch_target(pc, i.imm));
      break;
    case Op::Bne:
      if (a != b) redirect(pc, branch_target(pc, i.imm));
      break;
    case Op::J: redirect(pc, jump_target(pc, i.target)); break;
    case Op::Jal:
      write_reg(kRegRa, pc + 4, pc, out);
      redirect(pc, jump_target(pc, i.target));
      break;
    case Op::Jr: redirect(pc, a); break;
    case Op::Syscall: break;
    case Op::Halt:
      squash_younger();
      s_.halted = true;
      s_.halt_cycle = s_.cycle;
      emit(out, EventKind::Halted, pc);
      break;
    case Op::StartBal:
    case Op::EndBal:
      if (s_.balancing_enabled) {
        squash_younger();
        s_.pc = pc + 4;
        s_.fetch_blocked = true;
        emit(out, i.op == Op::StartBal ? EventKind::StartBalRetired : EventKind::EndBalRetired, pc);
      }
      break;
    case Op::Iret:
      if (!s_.in_interrupt) {
        emit(out, EventKind::IllegalInstruction, pc, pc, slot.word);
        trap(out);
        return;
      }
      s_.in_interrupt = false;
      squash_younger();
      s_.fetch_blocked = true;
      emit(out, EventKind::NmiSent, pc);
      break;
    case Op::Chk:
      break;
  }
}

}  // namespace secured
