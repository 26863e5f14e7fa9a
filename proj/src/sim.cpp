#include "secured/sim.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

namespace secured {

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::NonSecured: return "NON_SECURED";
    case Mode::SecuredI: return "SECURED_I";
    case Mode::SecuredM: return "SECURED_M";
    case Mode::Secured: return "SECURED";
  }
  return "?";
}

std::optional<Mode> mode_from_name(std::string_view s) {
  for (Mode m : kAllModes)
    if (s == mode_name(m)) return m;
  return std::nullopt;
}

namespace {

bool leaks(EventKind k) {
  return k == EventKind::RegWrite || k == EventKind::MemRead || k == EventKind::MemWrite || k == EventKind::Fetch;
}

bool is_fault(EventKind k) {
  return k == EventKind::IntegrityException || k == EventKind::IllegalInstruction || k == EventKind::AlignmentFault;
}

struct Lockstep {
  EventKind kind;
  Addr pc;
  Word word;
  friend bool operator==(const Lockstep&, const Lockstep&) = default;
};

std::vector<Lockstep> lockstep_view(const std::vector<CoreEvent>& ev, unsigned core) {
  std::vector<Lockstep> v;
  for (const auto& e : ev)
    if (e.core == core && (e.kind == EventKind::Fetch || e.kind == EventKind::Retire))
      v.push_back({e.kind, e.pc, e.value});
  return v;
}

std::optional<Addr> stack_top(const MemoryImage& img) {
  for (const auto& s : img.segments())
    if (s.section == Section::Stack) return s.end();
  return std::nullopt;
}

}  // namespace

RunResult run(const SystemConfig& cfg, const std::array<CoreLoad, 2>& loads) {
  RunResult res;
  std::array<Core, 2> cores{Core(0, integrity_enabled(cfg.mode), balancing_enabled(cfg.mode)),
                            Core(1, integrity_enabled(cfg.mode), balancing_enabled(cfg.mode))};
  std::array<InstructionMemory, 2> imem;
  for (unsigned k = 0; k < 2; ++k) {
    imem[k].load(loads[k].image);
    res.dmem[k].load(loads[k].image, Space::Data);
    cores[k].reset(loads[k].entry.value_or(0));
    if (!loads[k].entry) cores[k].state().halted = true;
    if (loads[k].stack_top) cores[k].state().regs[kRegSp] = *loads[k].stack_top;
  }
  std::array<Core*, 2> cp{&cores[0], &cores[1]};
  std::array<Memory*, 2> mp{&res.dmem[0], &res.dmem[1]};
  Controller ctrl(cfg.delays);

  auto interrupts = cfg.interrupts;
  std::stable_sort(interrupts.begin(), interrupts.end(), [](auto& a, auto& b) { return a.cycle < b.cycle; });
  auto mutations = cfg.mutations;
  std::stable_sort(mutations.begin(), mutations.end(), [](auto& a, auto& b) { return a.cycle < b.cycle; });
  std::size_t next_irq = 0;
  std::size_t next_mut = 0;

  std::vector<CoreEvent> cycle_events;
  std::vector<CoreEvent> trace_events;
  bool finished = false;
  Cycle t = 0;
  for (; t < cfg.max_cycles; ++t) {
    for (; next_mut < mutations.size() && mutations[next_mut].cycle <= t; ++next_mut) {
      const Mutation& m = mutations[next_mut];
      if (m.kind == Mutation::Kind::Poke) {
        imem.at(m.core).poke(m.addr, m.word);
      } else {
        CoreState& s = cores.at(m.core).state();
        for (auto& slot : s.pipeline) slot.reset();
        s.pc = m.addr;
      }
    }
    for (; next_irq < interrupts.size() && interrupts[next_irq].cycle <= t; ++next_irq)
      ctrl.raise_interrupt(t, interrupts[next_irq].core, interrupts[next_irq].vector);

    const auto lines = ctrl.tick(t, cp, mp);
    const bool audit = ctrl.phase() == Phase::Balancing && !lines[0].hold && !lines[1].hold;
    cycle_events.clear();
    cores[0].step(t, lines[0], imem[0], res.dmem[0], cycle_events);
    cores[1].step(t, lines[1], imem[1], res.dmem[1], cycle_events);
    try {
      ctrl.observe(t, cycle_events, cp);
    } catch (const ProtocolError& e) {
      res.protocol_error = e.what();
      ++t;
      break;
    }

    if (audit) {
      ++res.audit.cycles_checked;
      if (lockstep_view(cycle_events, 0) != lockstep_view(cycle_events, 1)) {
        ++res.audit.skew_cycles;
        if (!res.audit.first_skew) res.audit.first_skew = t;
      }
    }
    for (const auto& e : cycle_events) {
      if (e.kind == EventKind::Retire) ++res.retire_counts[e.core][e.pc];
      if (is_fault(e.kind)) res.faults.push_back(e);
      if (cfg.record_trace && leaks(e.kind)) trace_events.push_back(e);
    }
    if (cfg.keep_events) res.events.insert(res.events.end(), cycle_events.begin(), cycle_events.end());

    // A trap inside a controller episode leaves the partner waiting forever.
    const bool stranded = (cores[0].state().trapped || cores[1].state().trapped) && ctrl.phase() != Phase::Idle;
    if ((cores[0].halted() && cores[1].halted() && ctrl.idle()) || stranded) {
      finished = true;
      ++t;
      break;
    }
  }
  res.cycles_simulated = t;
  res.timeout = !finished && !res.protocol_error;

  for (unsigned k = 0; k < 2; ++k) {
    const CoreState& s = cores[k].state();
    AppResult& a = res.apps[k];
    a.present = loads[k].entry.has_value();
    a.halted = s.halted;
    a.trapped = s.trapped;
    a.retired = s.retired;
    a.chk_retired = s.chk_retired;
    a.cycles = s.halt_cycle ? *s.halt_cycle + 1 : res.cycles_simulated;
    if (a.present) res.net_runtime = std::max(res.net_runtime, a.cycles);
    res.final_state[k] = s;
  }
  res.episodes = ctrl.episodes();
  res.interrupts = ctrl.interrupts();
  res.transitions = ctrl.transitions();
  if (cfg.record_trace) res.trace = record(trace_events, res.cycles_simulated, cfg.leakage);
  return res;
}

// ---------------------------------------------------------------------------

Application build_application(const std::string& name, const Program& source) {
  Application app;
  app.name = name;
  const Program marked = mark_annotated_regions(source);
  app.plain = assemble(marked);
  app.regions = annotated_regions(app.plain.symbols);
  InstrumentedProgram ip = insert_chk(marked);
  app.instrumented = ip.assembly;
  for (std::size_t k = 0; k < ip.program.statements.size(); ++k) {
    const Statement& st = ip.program.statements[k];
    if (st.mnemonic == "j" && st.operands.size() == 1 && st.operands[0].rfind("__bb_", 0) == 0)
      app.inserted_jumps.push_back(*ip.assembly.statement_address[k]);
  }
  return app;
}

Application build_application(const std::string& name, std::string_view source) {
  return build_application(name, parse(source));
}

std::array<CoreLoad, 2> schedule(Mode mode, const Application* app0, const Application* app1) {
  const std::array<const Application*, 2> apps{app0, app1};
  std::array<CoreLoad, 2> loads;
  for (unsigned k = 0; k < 2; ++k) {
    if (!apps[k]) continue;
    loads[k].image = apps[k]->binary(mode).image;
    loads[k].entry = loads[k].image.entry();
    loads[k].stack_top = stack_top(loads[k].image);
  }
  if (balancing_enabled(mode)) {
    for (unsigned k = 0; k < 2; ++k) {
      const Application* other = apps[1 - k];
      if (!other || !other->balanced()) continue;
      // Closure is checked on the marked source; chk words do not touch data.
      generate_complement_image(other->plain, other->regions);
      loads[k].image = MemoryImage::merge(loads[k].image, complement_image(other->binary(mode).image));
    }
  }
  return loads;
}

RunResult run_pair(const SystemConfig& cfg, const Application* app0, const Application* app1) {
  return run(cfg, schedule(cfg.mode, app0, app1));
}

const ModeRow& OverheadReport::row(Mode m) const {
  for (const auto& r : rows)
    if (r.mode == m) return r;
  throw std::out_of_range("mode not in report");
}

OverheadReport compare_modes(const SystemConfig& base, const Application* app0, const Application* app1) {
  OverheadReport rep;
  rep.pair = std::string(app0 ? app0->name : "-") + " || " + (app1 ? app1->name : "-");
  const std::array<const Application*, 2> apps{app0, app1};
  std::array<RunResult, 4> results;
  for (std::size_t i = 0; i < kAllModes.size(); ++i) {
    SystemConfig cfg = base;
    cfg.mode = kAllModes[i];
    cfg.record_trace = false;
    cfg.keep_events = false;
    results[i] = run_pair(cfg, app0, app1);
    const RunResult& r = results[i];
    if (r.timeout || r.protocol_error || !r.faults.empty())
      throw std::runtime_error(rep.pair + ": run in " + std::string(mode_name(cfg.mode)) + " did not complete cleanly");
    ModeRow row;
    row.mode = cfg.mode;
    row.net_runtime = r.net_runtime;
    row.balance_episodes = r.episodes.size();
    for (unsigned k = 0; k < 2; ++k) {
      if (!apps[k]) continue;
      row.retired += r.apps[k].retired;
      row.chk_retired += r.apps[k].chk_retired;
      if (integrity_enabled(cfg.mode))
        for (Addr a : apps[k]->inserted_jumps)
          if (auto it = r.retire_counts[k].find(a); it != r.retire_counts[k].end()) row.jump_retired += it->second;
    }
    rep.rows.push_back(row);
  }
  const double baseline = static_cast<double>(rep.rows[0].net_runtime);
  for (auto& row : rep.rows) row.overhead_pct = 100.0 * (static_cast<double>(row.net_runtime) - baseline) / baseline;

  rep.integrity_identity = true;
  for (unsigned k = 0; k < 2; ++k) {
    if (!apps[k]) continue;
    std::uint64_t jumps = 0;
    for (Addr a : apps[k]->inserted_jumps)
      if (auto it = results[1].retire_counts[k].find(a); it != results[1].retire_counts[k].end()) jumps += it->second;
    const auto delta = static_cast<std::int64_t>(results[1].apps[k].cycles) - static_cast<std::int64_t>(results[0].apps[k].cycles);
    const auto extra = static_cast<std::int64_t>(results[1].apps[k].chk_retired + jumps);
    const auto dretired = static_cast<std::int64_t>(results[1].apps[k].retired) - static_cast<std::int64_t>(results[0].apps[k].retired);
    if (delta != extra || dretired != extra) rep.integrity_identity = false;
  }
  return rep;
}

std::string run_json(const RunResult& r, const SystemConfig& cfg) {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(cfg.mode);
  j["net_runtime"] = r.net_runtime;
  j["cycles_simulated"] = r.cycles_simulated;
  j["timeout"] = r.timeout;
  j["protocol_error"] = r.protocol_error ? nlohmann::ordered_json(*r.protocol_error) : nlohmann::ordered_json();
  auto& apps = j["apps"] = nlohmann::ordered_json::array();
  for (unsigned k = 0; k < 2; ++k) {
    const AppResult& a = r.apps[k];
    apps.push_back({{"core", k + 1},
                    {"present", a.present},
                    {"halted", a.halted},
                    {"trapped", a.trapped},
                    {"cycles", a.cycles},
                    {"retired", a.retired},
                    {"chk_retired", a.chk_retired}});
  }
  auto& faults = j["faults"] = nlohmann::ordered_json::array();
  for (const auto& e : r.faults)
    faults.push_back({{"cycle", e.cycle}, {"core", e.core + 1}, {"kind", event_name(e.kind)}, {"pc", e.pc}});
  auto& eps = j["balance_episodes"] = nlohmann::ordered_json::array();
  for (const auto& e : r.episodes) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::object();
    for (const auto& row : e.rows) rows[row.name] = row.cycles;
    eps.push_back({{"requester", e.requester + 1},
                   {"start_bal", e.start_bal},
                   {"broadcast", e.broadcast},
                   {"end_bal", e.end_bal},
                   {"resume", e.resume},
                   {"rows", rows},
                   {"total", e.total()}});
  }
  auto& irqs = j["interrupts"] = nlohmann::ordered_json::array();
  for (const auto& i : r.interrupts)
    irqs.push_back({{"core", i.core + 1},
                    {"vector", i.vector},
                    {"raised", i.raised},
                    {"entry", i.entry},
                    {"nmi", i.nmi},
                    {"resume", i.resume},
                    {"during_balancing", i.during_balancing}});
  j["lockstep"] = {{"cycles_checked", r.audit.cycles_checked}, {"skew_cycles", r.audit.skew_cycles}};
  return j.dump(2);
}

std::string overhead_table(const std::vector<OverheadReport>& reports) {
  std::string s = "pair,mode,net_runtime,overhead_pct,retired,chk_retired,jump_retired,balance_episodes\n";
  char buf[256];
  for (const auto& rep : reports)
    for (const auto& row : rep.rows) {
      std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.3f,%llu,%llu,%llu,%zu\n", rep.pair.c_str(),
                    std::string(mode_name(row.mode)).c_str(), static_cast<unsigned long long>(row.net_runtime),
                    row.overhead_pct, static_cast<unsigned long long>(row.retired),
                    static_cast<unsigned long long>(row.chk_retired), static_cast<unsigned long long>(row.jump_retired),
                    row.balance_episodes);
      s += buf;
    }
  return s;
}

std::string transitions_jsonl(const std::vector<PhaseTransition>& t) {
  std::string s;
  for (const auto& p : t) {
    nlohmann::ordered_json j;
    j["cycle"] = p.cycle;
    j["from"] = phase_name(p.from);
    j["to"] = phase_name(p.to);
    j["countdown"] = p.countdown;
    s += j.dump() + "\n";
  }
  return s;
}

}  // namespace secured
