#include "secured/isa.hpp"

#include <cstdio>

namespace secured {

namespace {

using F = Format;

// clang-format off
constexpr std::array<OpInfo, kNumOps> kOps = {{
    //  op            mnem       fmt   opcode               funct            rs     rt     rd     shamt
    {Op::Add,      "add",      F::R, opcode::kSpecial,  funct::kAdd,     true,  true,  true,  false},
    {Op::Addi,     "addi",     F::I, opcode::kAddi,     0,               true,  true,  false, false},
    {Op::Sub,      "sub",      F::R, opcode::kSpecial,  funct::kSub,     true,  true,  true,  false},
    {Op::And,      "and",      F::R, opcode::kSpecial,  funct::kAnd,     true,  true,  true,  false},
    {Op::Andi,     "andi",     F::I, opcode::kAndi,     0,               true,  true,  false, false},
    {Op::Or,       "or",       F::R, opcode::kSpecial,  funct::kOr,      true,  true,  true,  false},
    {Op::Ori,      "ori",      F::I, opcode::kOri,      0,               true,  true,  false, false},
    {Op::Xor,      "xor",      F::R, opcode::kSpecial,  funct::kXor,     true,  true,  true,  false},
    {Op::Xori,     "xori",     F::I, opcode::kXori,     0,               true,  true,  false, false},
    {Op::Nor,      "nor",      F::R, opcode::kSpecial,  funct::kNor,     true,  true,  true,  false},
    {Op::Sll,      "sll",      F::R, opcode::kSpecial,  funct::kSll,     false, true,  true,  true},
    {Op::Srl,      "srl",      F::R, opcode::kSpecial,  funct::kSrl,     false, true,  true,  true},
    {Op::Slt,      "slt",      F::R, opcode::kSpecial,  funct::kSlt,     true,  true,  true,  false},
    {Op::Slti,     "slti",     F::I, opcode::kSlti,     0,               true,  true,  false, false},
    {Op::Lui,      "lui",      F::I, opcode::kLui,      0,               false, true,  false, false},
    {Op::Lw,       "lw",       F::I, opcode::kLw,       0,               true,  true,  false, false},
    {Op::Sw,       "sw",       F::I, opcode::kSw,       0,               true,  true,  false, false},
    {Op::Beq,      "beq",      F::I, opcode::kBeq,      0,               true,  true,  false, false},
    {Op::Bne,      "bne",      F::I, opcode::kBne,      0,               true,  true,  false, false},
    {Op::J,        "j",        F::J, opcode::kJ,        0,               false, false, false, false},
    {Op::Jal,      "jal",      F::J, opcode::kJal,      0,               false, false, false, false},
    {Op::Jr,       "jr",       F::R, opcode::kSpecial,  funct::kJr,      true,  false, false, false},
    {Op::Mult,     "mult",     F::R, opcode::kSpecial,  funct::kMult,    true,  true,  false, false},
    {Op::Mfhi,     "mfhi",     F::R, opcode::kSpecial,  funct::kMfhi,    false, false, true,  false},
    {Op::Mflo,     "mflo",     F::R, opcode::kSpecial,  funct::kMflo,    false, false, true,  false},
    {Op::Syscall,  "syscall",  F::R, opcode::kSpecial,  funct::kSyscall, false, false, false, false},
    {Op::Halt,     "halt",     F::J, opcode::kHalt,     0,               false, false, false, false},
    {Op::Chk,      "chk",      F::J, opcode::kChk,      0,               false, false, false, false},
    {Op::StartBal, "startBal", F::J, opcode::kStartBal, 0,               false, false, false, false},
    {Op::EndBal,   "endBal",   F::J, opcode::kEndBal,   0,               false, false, false, false},
    {Op::Iret,     "iret",     F::J, opcode::kIret,     0,               false, false, false, false},
}};
// clang-format on

// Opcodes whose 26-bit payload is meaningful.
bool has_target(Op op) { return op == Op::J || op == Op::Jal || op == Op::Chk; }

struct DecodeTables {
  std::array<std::optional<Op>, 64> by_opcode{};
  std::array<std::optional<Op>, 64> by_funct{};
  DecodeTables() {
    for (const auto& o : kOps) {
      if (o.format == F::R)
        by_funct[o.funct] = o.op;
      else
        by_opcode[o.opcode] = o.op;
    }
  }
};

const DecodeTables& tables() {
  static const DecodeTables t;
  return t;
}

}  // namespace

const OpInfo& info(Op op) { return kOps[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_mnemonic(std::string_view mnemonic) {
  for (const auto& o : kOps) {
    if (o.mnemonic.size() != mnemonic.size()) continue;
    bool same = true;
    for (std::size_t k = 0; k < mnemonic.size() && same; ++k) {
      auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; };
      same = lower(o.mnemonic[k]) == lower(mnemonic[k]);
    }
    if (same) return o.op;
  }
  return std::nullopt;
}

bool is_cfi(Op op) {
  switch (op) {
    case Op::Beq:
    case Op::Bne:
    case Op::J:
    case Op::Jal:
    case Op::Jr:
    case Op::Halt:
    case Op::StartBal:
    case Op::EndBal:
    case Op::Iret:
      return true;
    default:
      return false;
  }
}

bool is_branch(Op op) { return op == Op::Beq || op == Op::Bne; }

bool valid(const Instruction& i) {
  if (static_cast<std::size_t>(i.op) >= kNumOps) return false;
  const auto& o = info(i.op);
  if (i.rs >= 32 || i.rt >= 32 || i.rd >= 32 || i.shamt >= 32) return false;
  if (i.target >= (1u << 26)) return false;
  if (!o.uses_rs && i.rs != 0) return false;
  if (!o.uses_rt && i.rt != 0) return false;
  if (!o.uses_rd && i.rd != 0) return false;
  if (!o.uses_shamt && i.shamt != 0) return false;
  if (o.format != F::I && i.imm != 0) return false;
  if (!has_target(i.op) && i.target != 0) return false;
  return true;
}

Word encode(const Instruction& i) {
  const auto& o = info(i.op);
  switch (o.format) {
    case F::R:
      return (Word{o.opcode} << 26) | (Word{i.rs} << 21) | (Word{i.rt} << 16) |
             (Word{i.rd} << 11) | (Word{i.shamt} << 6) | Word{o.funct};
    case F::I:
      return (Word{o.opcode} << 26) | (Word{i.rs} << 21) | (Word{i.rt} << 16) | Word{i.imm};
    case F::J:
      return (Word{o.opcode} << 26) | (i.target & 0x03FFFFFFu);
  }
  return 0;
}

std::optional<Instruction> decode(Word w) {
  const unsigned opc = w >> 26;
  std::optional<Op> op;
  if (opc == opcode::kSpecial)
    op = tables().by_funct[w & 0x3F];
  else
    op = tables().by_opcode[opc];
  if (!op) return std::nullopt;

  Instruction i;
  i.op = *op;
  switch (info(*op).format) {
    case F::R:
      i.rs = (w >> 21) & 0x1F;
      i.rt = (w >> 16) & 0x1F;
      i.rd = (w >> 11) & 0x1F;
      i.shamt = (w >> 6) & 0x1F;
      break;
    case F::I:
      i.rs = (w >> 21) & 0x1F;
      i.rt = (w >> 16) & 0x1F;
      i.imm = static_cast<std::uint16_t>(w & 0xFFFF);
      break;
    case F::J:
      i.target = w & 0x03FFFFFFu;
      break;
  }
  // Unused fields must be zero, so encode(decode(w)) == w.
  if (!valid(i)) return std::nullopt;
  return i;
}

std::string format_instruction(const Instruction& i, Addr pc) {
  char buf[96];
  const auto& o = info(i.op);
  const char* m = o.mnemonic.data();
  const auto simm = static_cast<int>(static_cast<std::int16_t>(i.imm));
  switch (i.op) {
    case Op::Add: case Op::Sub: case Op::And: case Op::Or:
    case Op::Xor: case Op::Nor: case Op::Slt:
      std::snprintf(buf, sizeof buf, "%s r%u,r%u,r%u", m, i.rd, i.rs, i.rt);
      break;
    case Op::Sll: case Op::Srl:
      if (i.op == Op::Sll && i.rd == 0 && i.rt == 0 && i.shamt == 0) return "nop";
      std::snprintf(buf, sizeof buf, "%s r%u,r%u,%u", m, i.rd, i.rt, i.shamt);
      break;
    case Op::Addi: case Op::Slti:
      std::snprintf(buf, sizeof buf, "%s r%u,r%u,%d", m, i.rt, i.rs, simm);
      break;
    case Op::Andi: case Op::Ori: case Op::Xori:
      std::snprintf(buf, sizeof buf, "%s r%u,r%u,0x%x", m, i.rt, i.rs, unsigned{i.imm});
      break;
    case Op::Lui:
      std::snprintf(buf, sizeof buf, "%s r%u,0x%x", m, i.rt, unsigned{i.imm});
      break;
    case Op::Lw: case Op::Sw:
      std::snprintf(buf, sizeof buf, "%s r%u,%d(r%u)", m, i.rt, simm, i.rs);
      break;
    case Op::Beq: case Op::Bne:
      std::snprintf(buf, sizeof buf, "%s r%u,r%u,0x%x", m, i.rs, i.rt,
                    branch_target(pc, i.imm));
      break;
    case Op::J: case Op::Jal:
      std::snprintf(buf, sizeof buf, "%s 0x%x", m, jump_target(pc, i.target));
      break;
    case Op::Jr:
      std::snprintf(buf, sizeof buf, "%s r%u", m, i.rs);
      break;
    case Op::Mult:
      std::snprintf(buf, sizeof buf, "%s r%u,r%u", m, i.rs, i.rt);
      break;
    case Op::Mfhi: case Op::Mflo:
      std::snprintf(buf, sizeof buf, "%s r%u", m, i.rd);
      break;
    case Op::Chk:
      std::snprintf(buf, sizeof buf, "%s 0x%07x", m, i.target);
      break;
    case Op::Syscall: case Op::Halt: case Op::StartBal: case Op::EndBal: case Op::Iret:
      return std::string(o.mnemonic);
  }
  return buf;
}

}  // namespace secured
