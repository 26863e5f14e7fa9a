#include <doctest.h>

#include "secured/attack.hpp"
#include "secured/workloads.hpp"

using namespace secured;

TEST_CASE("flipping an executed bit is caught within its block") {
  const Application a = load_fixture("crc");
  const ControlFlowGraph cfg = build_cfg(a.instrumented.image, a.instrumented.symbols);
  const BasicBlock& entry = cfg.blocks[cfg.entry];
  const DetectionReport d = measure_detection(a, Mode::SecuredI, InjectionSpec::bit_flip(entry.body_start(), 0));
  CHECK(d.detected);
  REQUIRE(d.latency_instructions);
  CHECK(*d.latency_instructions <= entry.size());
}

TEST_CASE("replacing a chk word with a nop is caught") {
  const Application a = load_fixture("crc");
  const DetectionReport d = measure_detection(a, Mode::SecuredI, InjectionSpec::word_replace(a.instrumented.image.entry(), 0));
  CHECK(d.detected);
}

TEST_CASE("without checking, a flipped immediate goes unnoticed") {
  const Application a = load_fixture("straight");
  // addi r1, r0, 5 -> addi r1, r0, 4
  const DetectionReport d = measure_detection(a, Mode::NonSecured, InjectionSpec::bit_flip(0x100, 0));
  CHECK(d.outcome == Outcome::Silent);
  CHECK(d.output_corrupted);
  CHECK(d.corrupted_retired);
}

TEST_CASE("injection arguments are checked") {
  const Application a = load_fixture("straight");
  CHECK_THROWS_AS(to_mutation(InjectionSpec::bit_flip(0x100, 32), a.plain.image), std::invalid_argument);
  CHECK_THROWS_AS(to_mutation(InjectionSpec::bit_flip(0x5000, 0), a.plain.image), std::invalid_argument);
  CHECK_THROWS_AS(to_mutation(InjectionSpec::word_replace(0x102, 0), a.plain.image), std::invalid_argument);
}

TEST_CASE("sweep of a small fixture") {
  const Application a = load_fixture("three_block");
  const SweepResult s = sweep_bitflips(a, Mode::SecuredI);
  CHECK(s.summary.runs == 32 * s.code_words);
  CHECK(s.summary.executed_flips > 0);
  CHECK(s.summary.detected_executed == s.summary.executed_flips);
  CHECK(s.summary.silent_executed == 0);
  CHECK(s.summary.latency_violations == 0);
  CHECK(s.summary.detection_rate() == 1.0);
  const std::string csv = sweep_csv(s);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(s.summary.runs) + 1);
}

TEST_CASE("a hijacked pc into the middle of a block is caught") {
  const Application a = load_fixture("adpcm");
  const ControlFlowGraph cfg = build_cfg(a.instrumented.image, a.instrumented.symbols);
  const BasicBlock* big = &cfg.blocks[0];
  for (const auto& b : cfg.blocks)
    if (b.size() > big->size()) big = &b;
  const DetectionReport d = measure_detection(a, Mode::SecuredI, InjectionSpec::pc_redirect(big->body_start() + 8, 20));
  CHECK(d.detected);
}
