#include <doctest.h>

#include "secured/workloads.hpp"

using namespace secured;

TEST_CASE("mode names") {
  for (Mode m : kAllModes) CHECK(mode_from_name(mode_name(m)) == m);
  CHECK_FALSE(mode_from_name("SECURE"));
  CHECK(integrity_enabled(Mode::SecuredI));
  CHECK_FALSE(integrity_enabled(Mode::SecuredM));
  CHECK(balancing_enabled(Mode::Secured));
}

TEST_CASE("an absent application leaves its core halted") {
  const Application a = load_fixture("straight");
  const RunResult r = run_pair({}, nullptr, &a);
  CHECK_FALSE(r.apps[0].present);
  CHECK(r.apps[1].present);
  CHECK(r.net_runtime == 13);
}

TEST_CASE("the stack pointer starts at the top of the stack") {
  const Application a = load_fixture("crc");
  Addr top = 0;
  for (const auto& s : a.plain.image.segments())
    if (s.section == Section::Stack) top = s.end();
  const auto loads = schedule(Mode::NonSecured, &a, nullptr);
  CHECK(loads[0].stack_top == top);
}

TEST_CASE("balancing modes give each core the other's complement") {
  const Application des = load_fixture("toy_des");
  const Application crc = load_fixture("crc");
  const Addr pt = *des.plain.symbols.address_of("des_pt");
  const auto plain = schedule(Mode::SecuredI, &des, &crc);
  CHECK(plain[1].image.find(Space::Data, pt) == nullptr);
  const auto bal = schedule(Mode::SecuredM, &des, &crc);
  REQUIRE(bal[1].image.find(Space::Data, pt) != nullptr);
  CHECK(*bal[1].image.read(Space::Data, pt) == ~*des.plain.image.read(Space::Data, pt));
}

TEST_CASE("timeout") {
  const Application a = build_application("loop", ".text\n.org 0x100\nmain: j main\n");
  SystemConfig cfg;
  cfg.max_cycles = 100;
  const RunResult r = run_pair(cfg, &a, nullptr);
  CHECK(r.timeout);
  CHECK(r.cycles_simulated == 100);
}

TEST_CASE("overhead identity") {
  const Application a = load_fixture("adpcm");
  const Application b = load_fixture("crc");
  const OverheadReport rep = compare_modes({}, &a, &b);
  CHECK(rep.integrity_identity);
  CHECK(rep.rows.size() == 4);
  CHECK(rep.row(Mode::SecuredI).net_runtime == rep.row(Mode::Secured).net_runtime);
  CHECK(rep.row(Mode::NonSecured).overhead_pct == 0.0);
  const std::string csv = overhead_table({rep});
  CHECK(csv.rfind("pair,mode,", 0) == 0);
}

TEST_CASE("run JSON") {
  const Application a = load_fixture("straight");
  const RunResult r = run_pair({}, &a, nullptr);
  const std::string j = run_json(r, {});
  CHECK(j.find("\"net_runtime\": 13") != std::string::npos);
}
