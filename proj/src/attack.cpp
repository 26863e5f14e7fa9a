#include "secured/attack.hpp"

#include <cstdio>
#include <stdexcept>

namespace secured {

InjectionSpec InjectionSpec::bit_flip(Addr a, unsigned bit, Cycle at) {
  InjectionSpec s;
  s.kind = Kind::BitFlip;
  s.address = a;
  s.bit = bit;
  s.cycle = at;
  return s;
}

InjectionSpec InjectionSpec::word_replace(Addr a, Word w, Cycle at) {
  InjectionSpec s;
  s.kind = Kind::WordReplace;
  s.address = a;
  s.word = w;
  s.cycle = at;
  return s;
}

InjectionSpec InjectionSpec::pc_redirect(Addr pc, Cycle at) {
  InjectionSpec s;
  s.kind = Kind::PcRedirect;
  s.address = pc;
  s.cycle = at;
  return s;
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::IntegrityException: return "integrity-exception";
    case Outcome::IllegalInstruction: return "illegal-instruction";
    case Outcome::Silent: return "silent";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

Mutation to_mutation(const InjectionSpec& spec, const MemoryImage& image) {
  Mutation m;
  m.cycle = spec.cycle;
  m.core = spec.core;
  m.addr = spec.address;
  if (spec.kind == InjectionSpec::Kind::PcRedirect) {
    m.kind = Mutation::Kind::Redirect;
    return m;
  }
  const auto w = image.read(Space::Instruction, spec.address);
  if (!w) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "address 0x%x is outside the code section", spec.address);
    throw std::invalid_argument(buf);
  }
  if (spec.kind == InjectionSpec::Kind::BitFlip) {
    if (spec.bit >= 32) throw std::invalid_argument("bit index must be below 32");
    m.word = *w ^ (Word{1} << spec.bit);
  } else {
    m.word = spec.word;
  }
  return m;
}

namespace {

struct CleanRun {
  Cycle cycles = 0;
  std::vector<std::pair<Addr, Word>> data;
  std::map<Addr, std::uint64_t> retires;
};

std::vector<std::pair<Addr, Word>> data_words(const Application& app, Mode mode, const Memory& mem) {
  std::vector<std::pair<Addr, Word>> out;
  for (const auto& seg : app.binary(mode).image.segments()) {
    if (space_of(seg.section) != Space::Data || seg.section == Section::Stack) continue;
    for (Addr a = seg.start; a < seg.end(); a += 4) out.emplace_back(a, mem.read(a));
  }
  return out;
}

CleanRun clean_run(const Application& app, Mode mode) {
  SystemConfig cfg;
  cfg.mode = mode;
  const RunResult r = run_pair(cfg, &app, nullptr);
  if (r.timeout || !r.faults.empty()) throw std::runtime_error(app.name + ": clean run did not complete");
  return CleanRun{r.cycles_simulated, data_words(app, mode, r.dmem[0]), r.retire_counts[0]};
}

DetectionReport detect(const Application& app, Mode mode, const InjectionSpec& spec, const CleanRun& clean) {
  SystemConfig cfg;
  cfg.mode = mode;
  cfg.keep_events = true;
  cfg.max_cycles = clean.cycles * 20 + 1000;
  const Mutation m = to_mutation(spec, app.binary(mode).image);
  cfg.mutations.push_back(m);
  const RunResult r = run_pair(cfg, &app, nullptr);

  DetectionReport rep;
  std::optional<Cycle> first;
  for (const auto& e : r.events) {
    if (e.core != spec.core || e.kind != EventKind::Retire || e.cycle < spec.cycle) continue;
    if (m.kind == Mutation::Kind::Redirect || (e.pc == m.addr && e.value == m.word)) {
      first = e.cycle;
      break;
    }
  }
  rep.corrupted_retired = first.has_value();

  const CoreEvent* fault = nullptr;
  for (const auto& e : r.faults)
    if (e.core == spec.core) {
      fault = &e;
      break;
    }
  if (fault) {
    rep.detected = true;
    rep.outcome = fault->kind == EventKind::IntegrityException ? Outcome::IntegrityException : Outcome::IllegalInstruction;
    rep.detection_pc = fault->pc;
    rep.detection_cycle = fault->cycle;
    if (first) {
      std::uint64_t n = 0;
      for (const auto& e : r.events)
        if (e.core == spec.core && e.kind == EventKind::Retire && e.cycle > *first && e.cycle <= fault->cycle) ++n;
      rep.latency_instructions = n;
      rep.latency_cycles = fault->cycle - *first;
    }
    return rep;
  }
  if (r.timeout) {
    rep.outcome = Outcome::Timeout;
    return rep;
  }
  rep.outcome = Outcome::Silent;
  rep.output_corrupted = data_words(app, mode, r.dmem[0]) != clean.data;
  return rep;
}

}  // namespace

DetectionReport measure_detection(const Application& app, Mode mode, const InjectionSpec& spec) {
  return detect(app, mode, spec, clean_run(app, mode));
}

double SweepSummary::detection_rate() const {
  return executed_flips == 0 ? 0.0 : static_cast<double>(detected_executed) / static_cast<double>(executed_flips);
}

SweepResult sweep_bitflips(const Application& app, Mode mode) {
  const CleanRun clean = clean_run(app, mode);
  const Assembly& bin = app.binary(mode);
  const ControlFlowGraph cfg = build_cfg(bin.image, bin.symbols);
  SweepResult out;
  const auto code = bin.image.code_words();
  out.code_words = code.size();
  for (const auto& [addr, word] : code) {
    const auto blk = cfg.block_containing(addr);
    const std::size_t block_size = blk ? cfg.blocks[*blk].size() : 0;
    const bool executed = clean.retires.count(addr) != 0;
    for (unsigned bit = 0; bit < 32; ++bit) {
      SweepEntry e;
      e.address = addr;
      e.bit = bit;
      e.executed = executed;
      e.block_size = block_size;
      e.report = detect(app, mode, InjectionSpec::bit_flip(addr, bit), clean);
      SweepSummary& s = out.summary;
      ++s.runs;
      const bool silent = e.report.outcome == Outcome::Silent;
      if (silent) ++s.silent_total;
      if (e.report.outcome == Outcome::Timeout) ++s.timeouts;
      if (executed) {
        ++s.executed_flips;
        if (e.report.detected) ++s.detected_executed;
        if (silent) ++s.silent_executed;
        if (e.report.detected &&
            (!e.report.latency_instructions || *e.report.latency_instructions > block_size))
          ++s.latency_violations;
      } else {
        ++s.unexecuted_flips;
        if (silent) ++s.unexecuted_silent;
      }
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

std::string sweep_csv(const SweepResult& r) {
  std::string s = "address,bit,executed,outcome,output_corrupted,detection_pc,latency_instructions,latency_cycles\n";
  char buf[160];
  for (const auto& e : r.entries) {
    const auto& d = e.report;
    std::snprintf(buf, sizeof buf, "0x%08x,%u,%d,%s,%d,", e.address, e.bit, e.executed ? 1 : 0,
                  std::string(outcome_name(d.outcome)).c_str(), d.output_corrupted ? 1 : 0);
    s += buf;
    if (d.detection_pc) {
      std::snprintf(buf, sizeof buf, "0x%08x", *d.detection_pc);
      s += buf;
    }
    s += ",";
    if (d.latency_instructions) s += std::to_string(*d.latency_instructions);
    s += ",";
    if (d.latency_cycles) s += std::to_string(*d.latency_cycles);
    s += "\n";
  }
  return s;
}

}  // namespace secured
