#include <doctest.h>

#include <random>

#include "secured/isa.hpp"

using namespace secured;

TEST_CASE("decode is the inverse of encode on every valid word") {
  std::mt19937 rng(3);
  std::size_t valid_seen = 0;
  for (int i = 0; i < 200000; ++i) {
    const Word w = rng();
    if (auto ins = decode(w)) {
      ++valid_seen;
      CHECK(encode(*ins) == w);
    }
  }
  CHECK(valid_seen > 0);
}

TEST_CASE("every operation round-trips through its encoding") {
  for (std::size_t k = 0; k < kNumOps; ++k) {
    const Op op = static_cast<Op>(k);
    const OpInfo& in = info(op);
    Instruction i;
    i.op = op;
    if (in.uses_rs) i.rs = 5;
    if (in.uses_rt) i.rt = 6;
    if (in.uses_rd) i.rd = 7;
    if (in.uses_shamt) i.shamt = 3;
    if (in.format == Format::I) i.imm = 0x1234;
    if (in.format == Format::J && (op == Op::J || op == Op::Jal || op == Op::Chk)) i.target = 0x12345;
    REQUIRE(valid(i));
    const Word w = encode(i);
    CHECK((w >> 26) == in.opcode);
    auto back = decode(w);
    REQUIRE(back);
    CHECK(*back == i);
    CHECK(op_from_mnemonic(in.mnemonic) == op);
  }
}

TEST_CASE("custom opcodes") {
  CHECK(info(Op::Chk).opcode == 0x3A);
  CHECK(info(Op::StartBal).opcode == 0x3B);
  CHECK(info(Op::EndBal).opcode == 0x3C);
  CHECK(info(Op::Iret).opcode == 0x3D);
  CHECK(info(Op::Halt).opcode == 0x3F);
}

TEST_CASE("nop is the zero word") {
  CHECK(encode(Instruction::nop()) == 0u);
  CHECK(decode(0u) == Instruction::nop());
}

TEST_CASE("stray operand bits make a word illegal") {
  // halt with a nonzero payload
  CHECK_FALSE(decode((0x3Fu << 26) | 1u));
  // add with a nonzero shamt
  CHECK_FALSE(decode((1u << 21) | (2u << 16) | (3u << 11) | (4u << 6) | 0x20u));
  // unknown opcode
  CHECK_FALSE(decode(0x3Eu << 26));
}

TEST_CASE("control-flow classification") {
  for (Op op : {Op::Beq, Op::Bne, Op::J, Op::Jal, Op::Jr, Op::Halt, Op::StartBal, Op::EndBal, Op::Iret})
    CHECK(is_cfi(op));
  for (Op op : {Op::Add, Op::Lw, Op::Sw, Op::Chk, Op::Syscall, Op::Mult}) CHECK_FALSE(is_cfi(op));
}

TEST_CASE("branch and jump targets") {
  CHECK(branch_target(0x100, 0xFFFF) == 0x100u);
  CHECK(branch_target(0x100, 2) == 0x10Cu);
  CHECK(jump_target(0x1000, 0x40) == 0x100u);
}
