#include <doctest.h>

#include "secured/workloads.hpp"

using namespace secured;

namespace {

RunResult run_source(const std::string& src, Mode mode = Mode::NonSecured) {
  const Application a = build_application("t", src);
  SystemConfig cfg;
  cfg.mode = mode;
  return run_pair(cfg, &a, nullptr);
}

}  // namespace

TEST_CASE("straight-line code takes n+5 cycles") {
  const RunResult r = run_source(fixture_source("straight"));
  CHECK(r.net_runtime == 8 + 5);
  CHECK(r.apps[0].retired == 8);
  CHECK(r.faults.empty());
}

TEST_CASE("straight-line results") {
  const Application a = load_fixture("straight");
  const RunResult r = run_pair({}, &a, nullptr);
  // ((5+7) ^ 5) << 3 | 7
  CHECK(r.dmem[0].read(0x7000) == ((((5u + 7u) ^ 5u) << 3) | 7u));
}

TEST_CASE("writes to r0 are discarded") {
  const RunResult r = run_source(".text\n.org 0x100\nmain: addi r0, r0, 5\nadd r1, r0, r0\nhalt\n");
  CHECK(r.final_state[0].regs[0] == 0u);
  CHECK(r.final_state[0].regs[1] == 0u);
}

TEST_CASE("a jump to the next word costs nothing") {
  const RunResult r = run_source(".text\n.org 0x100\nmain: j next\nnext: halt\n");
  CHECK(r.net_runtime == 2 + 5);
}

TEST_CASE("a taken jump elsewhere squashes the younger fetches") {
  const RunResult r = run_source(".text\n.org 0x100\nmain: j far\nnop\nnop\nfar: halt\n");
  CHECK(r.apps[0].retired == 2);
  CHECK(r.net_runtime > 2 + 5);
}

TEST_CASE("loads, stores and arithmetic") {
  const RunResult r = run_source(
      ".text\n.org 0x100\nmain: lui r1, 0x1234\nori r1, r1, 0x5678\nsw r1, v(r0)\nlw r2, v(r0)\n"
      "addi r3, r0, -1\nslt r4, r3, r0\nsrl r5, r2, 16\nhalt\n.data\n.org 0x700\nv: .word 0\n");
  const CoreState& s = r.final_state[0];
  CHECK(s.regs[2] == 0x12345678u);
  CHECK(s.regs[3] == 0xFFFFFFFFu);
  CHECK(s.regs[4] == 1u);
  CHECK(s.regs[5] == 0x1234u);
}

TEST_CASE("an illegal word traps") {
  // The instrumenter refuses undecodable code, so load the raw image.
  CoreLoad load;
  load.image = assemble(".text\n.org 0x100\nmain: .word 0xF8000000\nhalt\n").image;
  load.entry = 0x100;
  const RunResult r = run({}, {load, CoreLoad{}});
  REQUIRE_FALSE(r.faults.empty());
  CHECK(r.faults[0].kind == EventKind::IllegalInstruction);
  CHECK(r.apps[0].trapped);
}

TEST_CASE("a misaligned load traps") {
  const RunResult r = run_source(".text\n.org 0x100\nmain: lw r1, 2(r0)\nhalt\n");
  REQUIRE_FALSE(r.faults.empty());
  CHECK(r.faults[0].kind == EventKind::AlignmentFault);
}

TEST_CASE("integrity checking catches a patched word") {
  const Application a = load_fixture("three_block");
  const Addr body = a.instrumented.image.entry() + 4;
  const Word w = *a.instrumented.image.read(Space::Instruction, body);
  SystemConfig cfg;
  cfg.mode = Mode::SecuredI;
  cfg.mutations.push_back({Mutation::Kind::Poke, 0, 0, body, w ^ 0x10u});
  const RunResult r = run_pair(cfg, &a, nullptr);
  REQUIRE_FALSE(r.faults.empty());
  CHECK(r.faults[0].kind == EventKind::IntegrityException);
}

TEST_CASE("a chk reached before the previous block's CFI raises") {
  // The first block is cut short by redirecting into the middle of the
  // program: the next chk retires while the first block is still open.
  const Application a = load_fixture("three_block");
  const ControlFlowGraph cfg = build_cfg(a.instrumented.image, a.instrumented.symbols);
  REQUIRE(cfg.blocks.size() == 3);
  SystemConfig sc;
  sc.mode = Mode::SecuredI;
  sc.mutations.push_back({Mutation::Kind::Redirect, 7, 0, cfg.blocks[1].start, 0});
  const RunResult r = run_pair(sc, &a, nullptr);
  REQUIRE_FALSE(r.faults.empty());
  CHECK(r.faults[0].kind == EventKind::IntegrityException);
}

TEST_CASE("saved context words") {
  SavedContext c;
  for (unsigned i = 0; i < kNumRegisters; ++i) c.regs[i] = i * 3;
  c.pc = 0x400;
  c.hi = 1;
  c.lo = 2;
  c.inc_hashed = 0x155;
  c.hashed = 0x2AA;
  c.block_open = true;
  const auto w = c.words();
  CHECK(w[29] == 87u);
  CHECK(w[32] == 0x400u);
  CHECK(w[35] == 0x155u);
  CHECK(w[36] == (0x2AAu | 0x80000000u));
  CHECK(SavedContext::from_words(w, false) == c);
}
