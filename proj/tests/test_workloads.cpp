#include <doctest.h>

#include "secured/workloads.hpp"

using namespace secured;

TEST_CASE("AES S-box entries") {
  const auto& s = aes_sbox();
  CHECK(s[0x00] == 0x63);
  CHECK(s[0x01] == 0x7c);
  CHECK(s[0x53] == 0xed);
  CHECK(s[0x10] == 0xca);
  CHECK(s[0xff] == 0x16);
  std::array<bool, 256> seen{};
  for (auto v : s) seen[v] = true;
  for (bool b : seen) CHECK(b);
}

TEST_CASE("four-bit S-box is a permutation") {
  const auto& s = feistel_sbox();
  CHECK(s[0] == 0xC);
  CHECK(s[1] == 0x5);
  std::array<bool, 16> seen{};
  for (auto v : s) seen[v] = true;
  for (bool b : seen) CHECK(b);
}

TEST_CASE("toy AES matches its reference in every mode") {
  Application a = load_fixture("toy_aes");
  const AesKey key{0x00, 0x11, 0xa5, 0xff};
  const std::array<std::uint8_t, 4> ctr{0x53, 0x00, 0x7f, 0xfe};
  set_aes_key(a, key);
  set_aes_counter(a, ctr);
  const Application filler = load_fixture("crc");
  const auto want = toy_aes_reference(key, ctr);
  for (Mode m : kAllModes) {
    SystemConfig cfg;
    cfg.mode = m;
    const RunResult r = run_pair(cfg, &a, &filler);
    REQUIRE(r.faults.empty());
    const auto ct = read_data(r.dmem[0], a.binary(m), "aes_ct", 4);
    for (int i = 0; i < 4; ++i) CHECK(ct[i] == want[i]);
    if (balancing_enabled(m)) {
      // the twin ran on the other core with complemented data
      const auto twin = read_data(r.dmem[1], a.binary(m), "aes_ct", 4);
      for (int i = 0; i < 4; ++i) CHECK(twin[i] == (~want[i] & 0xFFu));
    }
  }
}

TEST_CASE("toy DES matches its reference") {
  Application d = load_fixture("toy_des");
  const FeistelKeys keys{1, 2, 3, 4};
  std::vector<std::uint8_t> pt;
  for (int i = 0; i < 8; ++i) pt.push_back(static_cast<std::uint8_t>(i * 37));
  set_des_keys(d, keys);
  set_des_plaintext(d, pt);
  for (Mode m : kAllModes) {
    SystemConfig cfg;
    cfg.mode = m;
    const RunResult r = run_pair(cfg, &d, nullptr);
    REQUIRE(r.faults.empty());
    const auto ct = read_data(r.dmem[0], d.binary(m), "des_ct", 8);
    for (int i = 0; i < 8; ++i) CHECK(ct[i] == toy_des_reference(keys, pt[i]));
  }
}

TEST_CASE("every suite workload halts cleanly in every mode") {
  for (const auto& name : suite_names()) {
    const Application a = load_fixture(name);
    for (Mode m : kAllModes) {
      SystemConfig cfg;
      cfg.mode = m;
      const RunResult r = run_pair(cfg, &a, nullptr);
      CHECK_MESSAGE(r.faults.empty(), name);
      CHECK_MESSAGE(r.apps[0].halted, name);
    }
  }
}

TEST_CASE("checking does not change results") {
  for (const auto& name : suite_names()) {
    const Application a = load_fixture(name);
    SystemConfig ns, si;
    si.mode = Mode::SecuredI;
    const RunResult x = run_pair(ns, &a, nullptr), y = run_pair(si, &a, nullptr);
    for (const auto& seg : a.plain.image.segments()) {
      if (seg.section != Section::Data && seg.section != Section::BalData) continue;
      for (Addr p = seg.start; p < seg.end(); p += 4) CHECK_MESSAGE(x.dmem[0].read(p) == y.dmem[0].read(p), name);
    }
    for (unsigned r = 1; r < kNumRegisters; ++r)
      if (r != 31) CHECK_MESSAGE(x.final_state[0].regs[r] == y.final_state[0].regs[r], name);
  }
}
