#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace secured {

using Word = std::uint32_t;
using Addr = std::uint32_t;

constexpr std::size_t kNumRegisters = 32;
constexpr unsigned kRegSp = 29;
constexpr unsigned kRegRa = 31;

// Operation kinds. Nop is not a separate kind: it is sll r0,r0,0.
enum class Op : std::uint8_t {
  Add, Addi, Sub, And, Andi, Or, Ori, Xor, Xori, Nor,
  Sll, Srl, Slt, Slti, Lui, Lw, Sw, Beq, Bne, J, Jal, Jr,
  Mult, Mfhi, Mflo, Syscall, Halt, Chk, StartBal, EndBal, Iret,
};

constexpr std::size_t kNumOps = static_cast<std::size_t>(Op::Iret) + 1;

enum class Format : std::uint8_t { R, I, J };

namespace opcode {
constexpr unsigned kSpecial = 0x00;
constexpr unsigned kJ = 0x02;
constexpr unsigned kJal = 0x03;
constexpr unsigned kBeq = 0x04;
constexpr unsigned kBne = 0x05;
constexpr unsigned kAddi = 0x08;
constexpr unsigned kSlti = 0x0A;
constexpr unsigned kAndi = 0x0C;
constexpr unsigned kOri = 0x0D;
constexpr unsigned kXori = 0x0E;
constexpr unsigned kLui = 0x0F;
constexpr unsigned kLw = 0x23;
constexpr unsigned kSw = 0x2B;
constexpr unsigned kChk = 0x3A;
constexpr unsigned kStartBal = 0x3B;
constexpr unsigned kEndBal = 0x3C;
constexpr unsigned kIret = 0x3D;
constexpr unsigned kHalt = 0x3F;
}  // namespace opcode

namespace funct {
constexpr unsigned kSll = 0x00;
constexpr unsigned kSrl = 0x02;
constexpr unsigned kJr = 0x08;
constexpr unsigned kSyscall = 0x0C;
constexpr unsigned kMfhi = 0x10;
constexpr unsigned kMflo = 0x12;
constexpr unsigned kMult = 0x18;
constexpr unsigned kAdd = 0x20;
constexpr unsigned kSub = 0x22;
constexpr unsigned kAnd = 0x24;
constexpr unsigned kOr = 0x25;
constexpr unsigned kXor = 0x26;
constexpr unsigned kNor = 0x27;
constexpr unsigned kSlt = 0x2A;
}  // namespace funct

struct Instruction {
  Op op = Op::Sll;
  std::uint8_t rs = 0;
  std::uint8_t rt = 0;
  std::uint8_t rd = 0;
  std::uint8_t shamt = 0;
  std::uint16_t imm = 0;
  std::uint32_t target = 0;  // 26-bit jump target (word index) or chk payload

  friend bool operator==(const Instruction&, const Instruction&) = default;

  static Instruction nop() { return {}; }
};

/// Static properties of each kind. `fields` lists which operand fields are
/// meaningful; everything else must be zero for the instruction to be valid.
struct OpInfo {
  Op op;
  std::string_view mnemonic;
  Format format;
  unsigned opcode;
  unsigned funct;  // R-format only
  bool uses_rs, uses_rt, uses_rd, uses_shamt;
};

const OpInfo& info(Op op);
std::optional<Op> op_from_mnemonic(std::string_view mnemonic);

/// Control-flow instructions terminate basic blocks and, with integrity
/// checking on, compare the runtime checksum.
bool is_cfi(Op op);
bool is_branch(Op op);  // beq, bne

bool valid(const Instruction& i);

Word encode(const Instruction& i);

/// Total: every word either decodes to a valid instruction whose encoding is
/// the same word, or yields std::nullopt (illegal instruction).
std::optional<Instruction> decode(Word w);

/// Canonical assembly text for one instruction at `pc`. Branch and jump
/// targets are rendered as absolute hex addresses.
std::string format_instruction(const Instruction& i, Addr pc);

/// Branch target of a beq/bne at `pc`.
constexpr Addr branch_target(Addr pc, std::uint16_t imm) {
  const auto offset = static_cast<std::int32_t>(static_cast<std::int16_t>(imm));
  return pc + 4 + static_cast<Addr>(offset * 4);
}

/// Absolute target of j/jal at `pc` (region of pc+4).
constexpr Addr jump_target(Addr pc, std::uint32_t target26) {
  return ((pc + 4) & 0xF0000000u) | (target26 << 2);
}

}  // namespace secured
