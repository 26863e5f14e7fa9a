#include "secured/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

namespace secured {

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CriterionResult result(int id, const char* name, bool pass, std::string detail) {
  return {id, name, pass, std::move(detail)};
}

bool clean(const RunResult& r) { return !r.timeout && !r.protocol_error && r.faults.empty(); }

Cycle retire_cycle(const RunResult& r, unsigned opcode, unsigned core) {
  for (const auto& e : r.events)
    if (e.kind == EventKind::Retire && e.core == core && e.value >> 26 == opcode) return e.cycle;
  throw std::runtime_error("no retire of opcode " + std::to_string(opcode));
}

std::vector<std::pair<Addr, Word>> data_of(const Application& app, Mode mode, const Memory& mem) {
  std::vector<std::pair<Addr, Word>> out;
  for (const auto& s : app.binary(mode).image.segments()) {
    if (s.section != Section::Data && s.section != Section::BalData) continue;
    for (Addr a = s.start; a < s.end(); a += 4) out.emplace_back(a, mem.read(a));
  }
  return out;
}

Addr label(const Application& app, Mode mode, const std::string& name) {
  auto a = app.binary(mode).symbols.address_of(name);
  if (!a) throw std::runtime_error(app.name + ": no label " + name);
  return *a;
}

}  // namespace

std::vector<PowerTrace> collect_aes_traces(const Application& aes, const Application* filler, const DpaOptions& opt,
                                           std::vector<std::uint8_t>& first_bytes) {
  Application app = aes;
  set_aes_key(app, opt.key);
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<unsigned> byte(0, 255);
  std::vector<PowerTrace> traces;
  first_bytes.clear();
  for (unsigned n = 0; n < opt.traces; ++n) {
    std::array<std::uint8_t, 4> ctr;
    for (auto& b : ctr) b = static_cast<std::uint8_t>(byte(rng));
    set_aes_counter(app, ctr);
    SystemConfig cfg;
    cfg.mode = opt.mode;
    cfg.record_trace = true;
    cfg.leakage = opt.leakage;
    cfg.leakage.seed = opt.seed * 1'000'003 + n;
    RunResult r = run_pair(cfg, &app, filler);
    if (!clean(r)) throw std::runtime_error("trace run " + std::to_string(n) + " did not complete cleanly");
    r.trace->plaintext.assign(ctr.begin(), ctr.end());
    r.trace->run_id = app.name + "#" + std::to_string(n);
    traces.push_back(std::move(*r.trace));
    first_bytes.push_back(ctr[0]);
  }
  truncate_to_common_length(traces);
  return traces;
}

KeyRanking run_dpa(const Application& aes, const Application* filler, const DpaOptions& opt) {
  std::vector<std::uint8_t> pts;
  const auto traces = collect_aes_traces(aes, filler, opt, pts);
  CpaOptions c;
  c.use = opt.use;
  return cpa_attack(traces, pts, opt.key[0], sbox_hw_predictor(), c);
}

std::vector<int> criterion_ids() { return {1, 2, 3, 4, 5, 6, 7, 8, 9}; }

CriterionResult check_criterion(int id, std::uint64_t seed) {
  switch (id) {
    case 1: return check_switching_overhead();
    case 2: return check_injection_detection();
    case 3: return check_unprotected_silent();
    case 4: return check_balancing_cancellation(seed);
    case 5: return check_cpa_contrast(seed);
    case 6: return check_runtime_composition();
    case 7: return check_mode_ordering();
    case 8: return check_interrupt_during_balancing();
    case 9: return check_checksum_equivalence();
  }
  throw std::invalid_argument("no criterion " + std::to_string(id));
}

CriterionResult check_switching_overhead() {
  const auto t0 = std::chrono::steady_clock::now();
  const Application des = load_fixture("toy_des");
  const Application filler = load_fixture("adpcm");
  SystemConfig cfg;
  cfg.mode = Mode::SecuredM;
  const RunResult r = run_pair(cfg, &des, &filler);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!clean(r) || r.episodes.size() != 1) return result(1, "switching overhead", false, "run did not produce one clean episode");

  const std::vector<Cycle> want = {320, 30, 20, 320, 30, 20, 6, 1, 1};
  const BalanceEpisode& ep = r.episodes[0];
  std::vector<Cycle> got;
  std::string rows;
  for (const auto& row : ep.rows) {
    got.push_back(row.cycles);
    rows += fmt("%s%llu", rows.empty() ? "" : "/", static_cast<unsigned long long>(row.cycles));
  }
  const bool ok = got == want && ep.total() == 748 && secs < 1.0;
  return result(1, "switching overhead", ok, fmt("rows %s total %llu in %.3fs", rows.c_str(),
                                                  static_cast<unsigned long long>(ep.total()), secs));
}

namespace {

struct SweepTotals {
  std::size_t words = 0, runs = 0, executed = 0, detected = 0, silent_executed = 0, silent_total = 0,
              latency = 0, max_words = 0;
};

SweepTotals sweep_suite(Mode mode) {
  SweepTotals t;
  for (const auto& name : suite_names()) {
    const SweepResult r = sweep_bitflips(load_fixture(name), mode);
    t.words += r.code_words;
    t.max_words = std::max(t.max_words, r.code_words);
    t.runs += r.summary.runs;
    t.executed += r.summary.executed_flips;
    t.detected += r.summary.detected_executed;
    t.silent_executed += r.summary.silent_executed;
    t.silent_total += r.summary.silent_total;
    t.latency += r.summary.latency_violations;
  }
  return t;
}

}  // namespace

CriterionResult check_injection_detection() {
  const SweepTotals t = sweep_suite(Mode::SecuredI);
  const bool ok = t.max_words >= 100 && t.executed > 0 && t.detected == t.executed && t.silent_executed == 0 &&
                  t.latency == 0;
  return result(2, "code-injection detection", ok,
                fmt("%zu flips over %zu words (largest %zu), executed %zu detected %zu silent %zu late %zu", t.runs,
                    t.words, t.max_words, t.executed, t.detected, t.silent_executed, t.latency));
}

CriterionResult check_unprotected_silent() {
  const SweepTotals t = sweep_suite(Mode::NonSecured);
  return result(3, "negative control", t.silent_total > 0,
                fmt("%zu flips, silent %zu (executed blocks %zu)", t.runs, t.silent_total, t.silent_executed));
}

CriterionResult check_balancing_cancellation(std::uint64_t seed) {
  const Application base = load_fixture("toy_aes");
  const Application filler = load_fixture("crc");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<unsigned> byte(0, 255);
  constexpr int kPairs = 100;

  std::vector<double> ref;
  std::array<std::vector<double>, 2> core_ref;
  Cycle begin = 0, end = 0;
  std::size_t differing = 0, core_varying = 0;
  for (int n = 0; n < kPairs; ++n) {
    Application app = base;
    AesKey key;
    std::array<std::uint8_t, 4> ctr;
    for (auto& b : key) b = static_cast<std::uint8_t>(byte(rng));
    for (auto& b : ctr) b = static_cast<std::uint8_t>(byte(rng));
    set_aes_key(app, key);
    set_aes_counter(app, ctr);
    SystemConfig cfg;
    cfg.mode = Mode::SecuredM;
    cfg.record_trace = true;
    const RunResult r = run_pair(cfg, &app, &filler);
    if (!clean(r) || r.episodes.size() != 1) return result(4, "balancing cancellation", false, "run failed");
    const BalanceEpisode& ep = r.episodes[0];
    const auto& tr = *r.trace;
    if (n == 0) {
      begin = ep.broadcast;
      end = ep.end_bal;
      ref.assign(tr.combined.begin() + static_cast<long>(begin), tr.combined.begin() + static_cast<long>(end) + 1);
      for (unsigned k = 0; k < 2; ++k)
        core_ref[k].assign(tr.core[k].begin() + static_cast<long>(begin), tr.core[k].begin() + static_cast<long>(end) + 1);
      continue;
    }
    if (ep.broadcast != begin || ep.end_bal != end) return result(4, "balancing cancellation", false, "region moved");
    bool varied = false;
    for (Cycle c = begin; c <= end; ++c) {
      if (tr.combined[c] != ref[c - begin]) ++differing;
      for (unsigned k = 0; k < 2; ++k)
        if (tr.core[k][c] != core_ref[k][c - begin]) varied = true;
    }
    if (varied) ++core_varying;
  }
  const bool ok = differing == 0 && core_varying > 0;
  return result(4, "balancing cancellation", ok,
                fmt("%d pairs, region [%llu,%llu], differing combined samples %zu, runs with per-core variation %zu",
                    kPairs, static_cast<unsigned long long>(begin), static_cast<unsigned long long>(end), differing,
                    core_varying));
}

CriterionResult check_cpa_contrast(std::uint64_t seed) {
  const Application aes = load_fixture("toy_aes");
  const Application filler = load_fixture("crc");
  LeakageConfig leak;
  leak.sigma = 1.0;

  DpaOptions single;
  single.leakage = leak;
  single.seed = seed;
  const KeyRanking s = run_dpa(aes, nullptr, single);

  std::mt19937_64 rng(seed ^ 0x5eedu);
  std::uniform_int_distribution<unsigned> byte(0, 255);
  std::vector<unsigned> ranks;
  for (int rep = 0; rep < 20; ++rep) {
    DpaOptions c;
    c.mode = Mode::SecuredM;
    c.use = TraceUse::Combined;
    c.leakage = leak;
    c.seed = seed * 100 + static_cast<std::uint64_t>(rep) + 1;
    for (auto& b : c.key) b = static_cast<std::uint8_t>(byte(rng));
    ranks.push_back(run_dpa(aes, &filler, c).true_rank);
  }
  std::sort(ranks.begin(), ranks.end());
  const double median = (ranks[9] + ranks[10]) / 2.0;
  const bool ok = s.true_rank == 1 && median >= 64 && median <= 192;
  return result(5, "CPA contrast", ok,
                fmt("single-core rank %u; combined median rank %.1f over 20 keys (range %u..%u)", s.true_rank, median,
                    ranks.front(), ranks.back()));
}

CriterionResult check_runtime_composition() {
  const Application des = load_fixture("toy_des");
  const Application adpcm = load_fixture("adpcm");
  const Application crc = load_fixture("crc");
  std::string detail;
  bool ok = true;

  for (Mode mode : {Mode::SecuredM, Mode::Secured}) {
    // Region length from an unbalanced run of DES alone.
    SystemConfig alone;
    alone.mode = integrity_enabled(mode) ? Mode::SecuredI : Mode::NonSecured;
    alone.keep_events = true;
    const RunResult d = run_pair(alone, &des, nullptr);
    const Cycle t_region = retire_cycle(d, opcode::kEndBal, 0) - retire_cycle(d, opcode::kStartBal, 0) + 5;
    alone.keep_events = false;
    const Cycle t_filler = run_pair(alone, nullptr, &adpcm).net_runtime;

    SystemConfig cfg;
    cfg.mode = mode;
    const RunResult r = run_pair(cfg, &des, &adpcm);
    const bool fine = clean(r) && r.episodes.size() == 1;
    const Cycle predicted = t_region + 748 + t_filler;
    const Cycle measured_region = fine ? r.episodes[0].end_bal - r.episodes[0].broadcast + 1 : 0;
    ok = ok && fine && r.net_runtime == predicted && measured_region == t_region;
    detail += fmt("%s des||adpcm %llu = %llu + 748 + %llu; ", std::string(mode_name(mode)).c_str(),
                  static_cast<unsigned long long>(r.net_runtime), static_cast<unsigned long long>(t_region),
                  static_cast<unsigned long long>(t_filler));
  }

  for (Mode mode : kAllModes) {
    SystemConfig cfg;
    cfg.mode = mode;
    const Cycle a = run_pair(cfg, &adpcm, nullptr).net_runtime;
    const Cycle b = run_pair(cfg, nullptr, &crc).net_runtime;
    const RunResult r = run_pair(cfg, &adpcm, &crc);
    ok = ok && clean(r) && r.net_runtime == std::max(a, b);
    detail += fmt("%s adpcm||crc %llu = max(%llu,%llu)%s", std::string(mode_name(mode)).c_str(),
                  static_cast<unsigned long long>(r.net_runtime), static_cast<unsigned long long>(a),
                  static_cast<unsigned long long>(b), mode == Mode::Secured ? "" : "; ");
  }
  return result(6, "runtime composition", ok, detail);
}

CriterionResult check_mode_ordering() {
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"toy_aes", "crc"}, {"toy_des", "adpcm"}, {"xor_cipher", "crc"}, {"adpcm", "crc"}, {"toy_des", "toy_aes"}};
  bool ok = true;
  std::string detail;
  for (const auto& [x, y] : pairs) {
    const Application a = load_fixture(x);
    const Application b = load_fixture(y);
    const OverheadReport rep = compare_modes({}, &a, &b);
    const Cycle ns = rep.row(Mode::NonSecured).net_runtime;
    const Cycle si = rep.row(Mode::SecuredI).net_runtime;
    const Cycle sm = rep.row(Mode::SecuredM).net_runtime;
    const Cycle s = rep.row(Mode::Secured).net_runtime;
    const bool balanced = a.balanced() || b.balanced();
    const bool order = ns <= si && ns <= sm && sm <= s && (balanced ? s != si : s == si);
    ok = ok && order && rep.integrity_identity;
    detail += fmt("%s %llu/%llu/%llu/%llu%s%s; ", rep.pair.c_str(), static_cast<unsigned long long>(ns),
                  static_cast<unsigned long long>(si), static_cast<unsigned long long>(sm),
                  static_cast<unsigned long long>(s), rep.integrity_identity ? "" : " identity broken",
                  order ? "" : " order broken");
  }
  detail.resize(detail.size() - 2);
  return result(7, "mode ordering", ok, detail);
}

CriterionResult check_interrupt_during_balancing() {
  Application des = load_fixture("toy_des");
  const Application adpcm = load_fixture("adpcm");
  const FeistelKeys keys{0x5, 0xc, 0x9, 0x2};
  const std::vector<std::uint8_t> pt = {0x00, 0x17, 0x2e, 0x45, 0x5c, 0x73, 0x8a, 0xff};
  set_des_keys(des, keys);
  set_des_plaintext(des, pt);

  bool ok = true;
  std::string detail;
  for (Mode mode : {Mode::SecuredM, Mode::Secured}) {
    SystemConfig cfg;
    cfg.mode = mode;
    const RunResult base = run_pair(cfg, &des, &adpcm);
    if (!clean(base) || base.episodes.size() != 1) return result(8, "interrupt during balancing", false, "baseline failed");
    const Addr vector = label(des, mode, "des_isr");
    for (unsigned core = 0; core < 2; ++core) {
      SystemConfig c = cfg;
      c.interrupts.push_back({base.episodes[0].broadcast + 20, core, vector});
      const RunResult r = run_pair(c, &des, &adpcm);
      bool fine = clean(r) && r.episodes.size() == 1 && r.interrupts.size() == 1 && r.interrupts[0].during_balancing;
      fine = fine && r.audit.ok() && r.audit.cycles_checked > 0;
      fine = fine && data_of(adpcm, mode, r.dmem[1]) == data_of(adpcm, mode, base.dmem[1]);
      const auto ct = read_data(r.dmem[0], des.binary(mode), "des_ct", pt.size());
      for (std::size_t i = 0; i < pt.size(); ++i) fine = fine && ct[i] == toy_des_reference(keys, pt[i]);
      ok = ok && fine;
      detail += fmt("%s irq core%u: audited %llu skew %llu%s; ", std::string(mode_name(mode)).c_str(), core + 1,
                    static_cast<unsigned long long>(r.audit.cycles_checked),
                    static_cast<unsigned long long>(r.audit.skew_cycles), fine ? "" : " FAILED");
    }
  }
  detail.resize(detail.size() - 2);
  return result(8, "interrupt during balancing", ok, detail);
}

CriterionResult check_checksum_equivalence() {
  bool ok = true;
  std::size_t blocks = 0, reached = 0, compares = 0, mismatches = 0;
  std::vector<std::string> names = {"straight", "three_block", "beq_forward"};
  for (const auto& n : suite_names()) names.push_back(n);

  for (const auto& name : names) {
    const Application app = load_fixture(name);
    const Assembly& bin = app.instrumented;
    const ControlFlowGraph cfg = build_cfg(bin.image, bin.symbols);

    // Every compare of a normal run.
    SystemConfig sc;
    sc.mode = Mode::SecuredI;
    sc.keep_events = true;
    const RunResult whole = run_pair(sc, &app, nullptr);
    ok = ok && clean(whole);
    for (const auto& e : whole.events) {
      if (e.kind != EventKind::ChecksumCompare) continue;
      ++compares;
      const auto b = cfg.block_containing(e.pc);
      if (!b || e.value != e.expected || e.value != cfg.blocks[*b].checksum.value) ++mismatches;
    }

    // Each block on its own, entered at its chk.
    for (const auto& blk : cfg.blocks) {
      ++blocks;
      SystemConfig one = sc;
      one.max_cycles = 64 + 2 * blk.size();
      one.mutations.push_back({Mutation::Kind::Redirect, 0, 0, blk.start, 0});
      const RunResult r = run_pair(one, &app, nullptr);
      for (const auto& e : r.events) {
        if (e.kind == EventKind::IntegrityException || e.kind == EventKind::AlignmentFault ||
            e.kind == EventKind::IllegalInstruction)
          break;
        if (e.kind != EventKind::ChecksumCompare) continue;
        ++reached;
        if (e.pc != blk.last_address() || e.value != blk.checksum.value || !blk.chk || e.expected != *blk.chk)
          ++mismatches;
        break;
      }
    }
  }

  std::size_t fold_failures = 0;
  std::mt19937_64 rng(9);
  for (int n = 0; n < 64; ++n) {
    const Word c = n == 0 ? 0u : static_cast<Word>(rng());
    for (unsigned bit = 0; bit < 32; ++bit)
      if (fold26(c ^ (Word{1} << bit)) == fold26(c)) ++fold_failures;
  }
  ok = ok && reached == blocks && mismatches == 0 && compares > 0 && fold_failures == 0;
  return result(9, "checksum equivalence", ok,
                fmt("%zu fixtures, %zu blocks, %zu checked in isolation, %zu run-time compares, %zu mismatches, "
                    "fold26 single-bit failures %zu",
                    names.size(), blocks, reached, compares, mismatches, fold_failures));
}

}  // namespace secured
