#include <doctest.h>

#include <bit>
#include <random>

#include "secured/power.hpp"
#include "secured/workloads.hpp"

using namespace secured;

namespace {

CoreEvent reg_write(Cycle c, unsigned core, Word v) { return {c, core, EventKind::RegWrite, 0, 8, v, 0}; }

}  // namespace

TEST_CASE("a value and its complement weigh 32") {
  LeakageConfig cfg;
  std::mt19937 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Word x = rng();
    const CoreEvent a = reg_write(0, 0, x), b = reg_write(0, 1, ~x);
    CHECK(sample_cycle(std::span(&a, 1), cfg) + sample_cycle(std::span(&b, 1), cfg) == 32.0);
  }
}

TEST_CASE("weights") {
  LeakageConfig cfg;
  cfg.alpha = 2;
  cfg.beta = 3;
  cfg.gamma = 0.5;
  const std::vector<CoreEvent> ev = {reg_write(0, 0, 0xF),
                                     {0, 0, EventKind::MemRead, 0, 0x100, 0x3, 0},
                                     {0, 0, EventKind::Fetch, 0, 0, 0xFF, 0},
                                     {0, 0, EventKind::Retire, 0, 0, 0xFFFF, 0}};
  CHECK(sample_cycle(ev, cfg) == 2 * 4 + 3 * 2 + 0.5 * 8);
}

TEST_CASE("transition model") {
  LeakageConfig cfg;
  cfg.hamming_distance = true;
  const std::vector<CoreEvent> ev = {reg_write(0, 0, 0xFF), reg_write(1, 0, 0x0F)};
  const PowerTrace t = record(ev, 2, cfg);
  CHECK(t.core[0][0] == 8.0);
  CHECK(t.core[0][1] == 4.0);
}

TEST_CASE("noise is reproducible from the seed") {
  LeakageConfig cfg;
  cfg.sigma = 1.0;
  cfg.seed = 5;
  const std::vector<CoreEvent> ev = {reg_write(0, 0, 0xFF)};
  const PowerTrace a = record(ev, 50, cfg), b = record(ev, 50, cfg);
  CHECK(a.combined == b.combined);
  cfg.seed = 6;
  CHECK(record(ev, 50, cfg).combined != a.combined);
  for (std::size_t c = 0; c < 50; ++c) CHECK(a.combined[c] == a.core[0][c] + a.core[1][c]);
}

TEST_CASE("bad leakage parameters") {
  LeakageConfig cfg;
  cfg.sigma = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("CPA needs two traces of equal length") {
  PowerTrace t;
  t.combined = {1, 2};
  t.core = {std::vector<double>{1, 2}, std::vector<double>{0, 0}};
  std::vector<PowerTrace> one{t};
  std::vector<std::uint8_t> p{1};
  CHECK_THROWS_AS(cpa_attack(one, p, 0, sbox_hw_predictor()), AttackError);
  PowerTrace u = t;
  u.combined.push_back(3);
  u.core[0].push_back(3);
  std::vector<PowerTrace> two{t, u};
  std::vector<std::uint8_t> q{1, 2};
  CHECK_THROWS_AS(cpa_attack(two, q, 0, sbox_hw_predictor()), AttackError);
  truncate_to_common_length(two);
  CHECK_NOTHROW(cpa_attack(two, q, 0, sbox_hw_predictor()));
}

TEST_CASE("CPA recovers the key from synthetic S-box leakage") {
  std::mt19937 rng(11);
  std::normal_distribution<double> noise(0, 1.0);
  const unsigned key = 0xA7;
  std::vector<PowerTrace> traces;
  std::vector<std::uint8_t> pts;
  for (int i = 0; i < 400; ++i) {
    const auto p = static_cast<std::uint8_t>(rng());
    PowerTrace t;
    const double leak = std::popcount(static_cast<unsigned>(aes_sbox()[p ^ key]));
    t.core[0] = {noise(rng), leak + noise(rng), noise(rng)};
    t.core[1] = {0, 0, 0};
    t.combined = t.core[0];
    traces.push_back(t);
    pts.push_back(p);
  }
  const KeyRanking r = cpa_attack(traces, pts, key, sbox_hw_predictor());
  CHECK(r.true_rank == 1);
  CHECK(r.order.front() == key);
  CHECK(r.order.size() == 256);
}

TEST_CASE("constant traces give no correlation") {
  std::vector<PowerTrace> traces;
  std::vector<std::uint8_t> pts;
  for (int i = 0; i < 20; ++i) {
    PowerTrace t;
    t.core[0] = {5, 5};
    t.core[1] = {5, 5};
    t.combined = {10, 10};
    traces.push_back(t);
    pts.push_back(static_cast<std::uint8_t>(i * 13));
  }
  CpaOptions o;
  o.use = TraceUse::Combined;
  const KeyRanking r = cpa_attack(traces, pts, 200, sbox_hw_predictor(), o);
  for (double p : r.peak) CHECK(p == 0.0);
  // ties keep guess order
  CHECK(r.true_rank == 201);
}

TEST_CASE("trace CSV layout") {
  PowerTrace t;
  t.core = {std::vector<double>{1}, std::vector<double>{2}};
  t.combined = {3};
  t.run_id = "x";
  const std::string csv = trace_csv(t);
  CHECK(csv.find("cycle,core1,core2,combined\n0,1.000000,2.000000,3.000000\n") != std::string::npos);
}
