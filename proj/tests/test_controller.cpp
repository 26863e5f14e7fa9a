#include <doctest.h>

#include "secured/workloads.hpp"

using namespace secured;

namespace {

RunResult des_with_filler(Mode mode, std::vector<ScheduledInterrupt> irqs = {}) {
  const Application des = load_fixture("toy_des");
  const Application filler = load_fixture("adpcm");
  SystemConfig cfg;
  cfg.mode = mode;
  cfg.interrupts = std::move(irqs);
  return run_pair(cfg, &des, &filler);
}

}  // namespace

TEST_CASE("delay table") {
  DelayTable d;
  CHECK(d.regfile() == 320);
  CHECK(d.pc_hi_lo() == 30);
  CHECK(d.checksum_regs() == 20);
  CHECK(d.save() == 370);
}

TEST_CASE("one balanced region costs 748 cycles") {
  const RunResult r = des_with_filler(Mode::SecuredM);
  REQUIRE(r.episodes.size() == 1);
  const BalanceEpisode& ep = r.episodes[0];
  std::vector<Cycle> rows;
  for (const auto& row : ep.rows) rows.push_back(row.cycles);
  CHECK(rows == std::vector<Cycle>{320, 30, 20, 320, 30, 20, 6, 1, 1});
  CHECK(ep.total() == 748);
  // startBal retire s: flush 6, save 370, broadcast 1, pc written the cycle after
  CHECK(ep.broadcast == ep.start_bal + 6 + 370 + 1 + 1);
  CHECK(ep.resume == ep.end_bal + 370 + 1 + 1);
  CHECK(r.audit.ok());
  CHECK(r.audit.cycles_checked > 0);
}

TEST_CASE("phase sequence of one region") {
  const RunResult r = des_with_filler(Mode::SecuredM);
  std::vector<Phase> seen;
  for (const auto& t : r.transitions) seen.push_back(t.to);
  CHECK(seen == std::vector<Phase>{Phase::FlushWait, Phase::Saving, Phase::Broadcast, Phase::Balancing,
                                   Phase::Restoring, Phase::Exit, Phase::Idle});
  for (std::size_t i = 1; i < r.transitions.size(); ++i) {
    CHECK(r.transitions[i].from == r.transitions[i - 1].to);
    CHECK(r.transitions[i].cycle > r.transitions[i - 1].cycle);
  }
}

TEST_CASE("the victim context is saved below its stack pointer in save order") {
  const Application filler = load_fixture("adpcm");
  const RunResult r = des_with_filler(Mode::SecuredM);
  REQUIRE(r.episodes.size() == 1);
  Addr sp = 0;
  for (const auto& s : filler.plain.image.segments())
    if (s.section == Section::Stack) sp = s.end();
  REQUIRE(sp != 0);
  // r29 is saved at sp - 4 * 30 and holds sp itself
  CHECK(r.dmem[1].read(sp - 4 * 30) == sp);
  // r0 first
  CHECK(r.dmem[1].read(sp - 4) == 0u);
  // the PC word points into the victim's code
  const Word pc = r.dmem[1].read(sp - 4 * 33);
  CHECK(filler.plain.image.find(Space::Instruction, pc) != nullptr);
}

TEST_CASE("the victim resumes with its registers intact") {
  const Application filler = load_fixture("adpcm");
  const RunResult alone = run_pair({}, nullptr, &filler);
  const RunResult r = des_with_filler(Mode::SecuredM);
  CHECK(r.final_state[1].regs == alone.final_state[1].regs);
  CHECK(r.apps[1].cycles == alone.apps[1].cycles + r.episodes[0].total() + (r.episodes[0].end_bal - r.episodes[0].broadcast + 1));
}

TEST_CASE("endBal outside a region is a protocol error") {
  const Application a = build_application("t", ".text\n.org 0x100\nmain: endBal\nhalt\n");
  SystemConfig cfg;
  cfg.mode = Mode::SecuredM;
  const RunResult r = run_pair(cfg, &a, nullptr);
  CHECK(r.protocol_error.has_value());
}

TEST_CASE("an interrupt outside balancing") {
  const Application des = load_fixture("toy_des");
  const Addr isr = *des.plain.symbols.address_of("des_isr");
  SystemConfig cfg;
  cfg.interrupts.push_back({3, 0, isr});
  const RunResult r = run_pair(cfg, &des, nullptr);
  REQUIRE(r.interrupts.size() == 1);
  CHECK_FALSE(r.interrupts[0].during_balancing);
  CHECK(r.interrupts[0].entry > r.interrupts[0].raised);
  CHECK(r.faults.empty());
  CHECK(r.dmem[0].read(*des.plain.symbols.address_of("des_irqs")) == 1u);
}

TEST_CASE("an interrupt during balancing keeps the cores in lock step") {
  const RunResult base = des_with_filler(Mode::SecuredM);
  const Application des = load_fixture("toy_des");
  const Addr isr = *des.plain.symbols.address_of("des_isr");
  for (unsigned core = 0; core < 2; ++core) {
    const RunResult r = des_with_filler(Mode::SecuredM, {{base.episodes[0].broadcast + 20, core, isr}});
    REQUIRE(r.interrupts.size() == 1);
    CHECK(r.interrupts[0].during_balancing);
    CHECK(r.audit.ok());
    CHECK(r.faults.empty());
    CHECK_FALSE(r.protocol_error);
    CHECK(r.final_state[1].regs == base.final_state[1].regs);
  }
}

TEST_CASE("a trap during balancing ends the run") {
  const RunResult base = des_with_filler(Mode::Secured);
  const Application des = load_fixture("toy_des");
  // a vector into the middle of a block fails its checksum
  const Addr bad = *des.instrumented.symbols.address_of("des_isr") + 8;
  const RunResult r = des_with_filler(Mode::Secured, {{base.episodes[0].broadcast + 20, 1, bad}});
  CHECK_FALSE(r.timeout);
  REQUIRE_FALSE(r.faults.empty());
  CHECK(r.faults[0].kind == EventKind::IntegrityException);
  CHECK(r.cycles_simulated < base.cycles_simulated);
}
