// secured: assemble, instrument, complement, run, attack and report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "secured/config.hpp"
#include "secured/experiments.hpp"

using namespace secured;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string config;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

/// A fixture name or a path to an assembly file.
Application load_app(const std::string& ref) {
  const std::filesystem::path p(ref);
  if (!std::filesystem::exists(p) && p.extension().empty()) return load_fixture(ref);
  return build_application(p.stem().string(), slurp(ref));
}

RunConfig effective_config(const Globals& g) {
  RunConfig cfg;
  if (!g.config.empty()) cfg = load_run_config(g.config);
  if (!g.mode.empty()) {
    auto m = mode_from_name(g.mode);
    if (!m) throw std::runtime_error("unknown mode " + g.mode);
    cfg.system.mode = *m;
  }
  if (g.seed) cfg.system.leakage.seed = *g.seed;
  return cfg;
}

std::array<std::optional<Application>, 2> config_apps(const RunConfig& cfg) {
  std::array<std::optional<Application>, 2> apps;
  for (unsigned k = 0; k < 2; ++k)
    if (cfg.apps[k]) apps[k] = load_app(*cfg.apps[k]);
  return apps;
}

Addr parse_addr(const std::string& s) { return static_cast<Addr>(std::stoul(s, nullptr, 0)); }

std::pair<std::string, std::string> split(const std::string& s, char c) {
  const auto i = s.find(c);
  if (i == std::string::npos) throw std::runtime_error("expected A" + std::string(1, c) + "B, got " + s);
  return {s.substr(0, i), s.substr(i + 1)};
}

bool rank_ok(const std::string& expect, unsigned rank) {
  if (auto i = expect.find('-'); i != std::string::npos)
    return rank >= std::stoul(expect.substr(0, i)) && rank <= std::stoul(expect.substr(i + 1));
  return rank <= std::stoul(expect);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SecureD dual-core simulator and toolchain"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for noise and random inputs");
  app.add_option("--mode", g.mode, "NON_SECURED, SECURED_I, SECURED_M or SECURED");
  app.add_option("--config", g.config, "Run configuration file");

  // asm
  auto* c_asm = app.add_subcommand("asm", "Assemble a source file into an image");
  std::string asm_in, asm_out;
  bool asm_instrument = false;
  c_asm->add_option("input", asm_in)->required();
  c_asm->add_option("-o,--output", asm_out, "Image file (default stdout)");
  c_asm->add_flag("--instrument", asm_instrument, "Mark regions and insert chk first");

  // instrument
  auto* c_ins = app.add_subcommand("instrument", "Insert chk instructions and balancing markers");
  std::string ins_in, ins_out, ins_report;
  c_ins->add_option("input", ins_in)->required();
  c_ins->add_option("-o,--output", ins_out, "Instrumented assembly (default stdout)");
  c_ins->add_option("--report", ins_report, "Per-block report, JSON lines");

  // complement
  auto* c_comp = app.add_subcommand("complement", "Build the complementary data image");
  std::string comp_in, comp_out;
  c_comp->add_option("input", comp_in, "Assembly source (closure checked) or .img")->required();
  c_comp->add_option("-o,--output", comp_out);

  // run
  auto* c_run = app.add_subcommand("run", "Simulate one or two applications");
  std::vector<std::string> run_apps;
  std::string run_json_path, run_trace, run_transitions;
  c_run->add_option("apps", run_apps, "Applications for core 1 and core 2 (overrides the config)");
  c_run->add_option("--json", run_json_path, "Result JSON (default stdout)");
  c_run->add_option("--trace", run_trace, "Power trace CSV");
  c_run->add_option("--transitions", run_transitions, "Controller phase transitions, JSON lines");

  // inject
  auto* c_inj = app.add_subcommand("inject", "Fault injection on one application");
  std::string inj_app, inj_flip, inj_replace, inj_redirect, inj_out;
  bool inj_sweep = false, inj_expect = false;
  c_inj->add_option("app", inj_app, "Application (default: app1 of the config)");
  c_inj->add_option("--flip", inj_flip, "ADDR:BIT");
  c_inj->add_option("--replace", inj_replace, "ADDR:WORD");
  c_inj->add_option("--redirect", inj_redirect, "PC@CYCLE");
  c_inj->add_flag("--sweep", inj_sweep, "Every bit of every code word");
  c_inj->add_option("-o,--output", inj_out, "CSV output (default stdout)");
  c_inj->add_flag("--expect-detect", inj_expect, "Fail unless the injection (every executed flip) is detected in time");

  // dpa
  auto* c_dpa = app.add_subcommand("dpa", "Correlation power analysis on the toy-AES workload");
  unsigned dpa_traces = 1000;
  std::string dpa_attack = "single", dpa_key = "2b7e1516", dpa_expect, dpa_out;
  std::string dpa_aes = "toy_aes", dpa_filler = "crc";
  double dpa_sigma = -1;
  c_dpa->add_option("--traces", dpa_traces);
  c_dpa->add_option("--attack", dpa_attack)->check(CLI::IsMember({"single", "combined"}));
  c_dpa->add_option("--key", dpa_key, "Four key bytes, hex");
  c_dpa->add_option("--sigma", dpa_sigma, "Noise (default: config, else 1.0)");
  c_dpa->add_option("--app", dpa_aes, "Attacked application");
  c_dpa->add_option("--filler", dpa_filler, "Application on the other core for combined attacks");
  c_dpa->add_option("--expect-rank", dpa_expect, "N (rank at most N) or LO-HI");
  c_dpa->add_option("-o,--output", dpa_out, "Ranking JSON (default stdout)");

  // report
  auto* c_rep = app.add_subcommand("report", "Runtime overhead of every mode");
  std::vector<std::string> rep_pairs;
  std::string rep_out;
  c_rep->add_option("pairs", rep_pairs, "A or A:B, fixture names or files (default: fixture suite)");
  c_rep->add_option("-o,--output", rep_out, "CSV (default stdout)");

  // check
  auto* c_chk = app.add_subcommand("check", "Run acceptance criteria");
  std::vector<int> chk_ids;
  c_chk->add_option("criteria", chk_ids, "Criterion numbers (default: all)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_asm) {
      const Program p = parse(slurp(asm_in));
      const Assembly a = asm_instrument ? instrument(p).assembly : assemble(mark_annotated_regions(p));
      emit(asm_out, write_image(a.image));
      return 0;
    }
    if (*c_ins) {
      const InstrumentedProgram ip = instrument(parse(slurp(ins_in)));
      emit(ins_out, ip.program.to_source());
      if (!ins_report.empty()) emit(ins_report, report_jsonl(ip.report));
      std::fprintf(stderr, "%zu blocks, %zu inserted jumps\n", ip.report.size(), ip.inserted_jumps);
      return 0;
    }
    if (*c_comp) {
      MemoryImage out;
      if (std::filesystem::path(comp_in).extension() == ".img") {
        out = complement_image(load_image_file(comp_in));
      } else {
        const Application a = load_app(comp_in);
        out = generate_complement_image(a.plain, a.regions);
      }
      emit(comp_out, write_image(out));
      return 0;
    }
    if (*c_run) {
      RunConfig cfg = effective_config(g);
      for (std::size_t k = 0; k < run_apps.size() && k < 2; ++k) cfg.apps[k] = run_apps[k] == "-" ? std::nullopt : std::optional(run_apps[k]);
      if (!run_trace.empty()) cfg.trace_path = run_trace;
      cfg.system.record_trace = !cfg.trace_path.empty();
      const auto apps = config_apps(cfg);
      const RunResult r = run_pair(cfg.system, apps[0] ? &*apps[0] : nullptr, apps[1] ? &*apps[1] : nullptr);
      emit(run_json_path, run_json(r, cfg.system) + "\n");
      if (r.trace) {
        PowerTrace t = *r.trace;
        t.run_id = std::string(mode_name(cfg.system.mode));
        for (const auto& a : apps) t.run_id += " " + (a ? a->name : std::string("-"));
        emit(cfg.trace_path, trace_csv(t));
      }
      if (!run_transitions.empty()) emit(run_transitions, transitions_jsonl(r.transitions));
      std::fprintf(stderr, "%s: %llu cycles\n", std::string(mode_name(cfg.system.mode)).c_str(),
                   static_cast<unsigned long long>(r.net_runtime));
      return r.timeout || r.protocol_error || !r.faults.empty() ? 1 : 0;
    }
    if (*c_inj) {
      const RunConfig cfg = effective_config(g);
      if (inj_app.empty() && cfg.apps[0]) inj_app = *cfg.apps[0];
      if (inj_app.empty()) throw std::runtime_error("no application");
      const Application a = load_app(inj_app);
      const Mode mode = cfg.system.mode;
      if (inj_sweep) {
        const SweepResult r = sweep_bitflips(a, mode);
        emit(inj_out, sweep_csv(r));
        const SweepSummary& s = r.summary;
        std::fprintf(stderr, "%zu flips: executed %zu detected %zu silent %zu late %zu; unexecuted %zu silent %zu\n", s.runs,
                     s.executed_flips, s.detected_executed, s.silent_executed, s.latency_violations, s.unexecuted_flips,
                     s.unexecuted_silent);
        if (inj_expect)
          return s.detected_executed == s.executed_flips && s.silent_executed == 0 && s.latency_violations == 0 ? 0 : 2;
        return 0;
      }
      InjectionSpec spec;
      if (!inj_flip.empty()) {
        auto [x, b] = split(inj_flip, ':');
        spec = InjectionSpec::bit_flip(parse_addr(x), static_cast<unsigned>(std::stoul(b)));
      } else if (!inj_replace.empty()) {
        auto [x, w] = split(inj_replace, ':');
        spec = InjectionSpec::word_replace(parse_addr(x), static_cast<Word>(std::stoul(w, nullptr, 0)));
      } else if (!inj_redirect.empty()) {
        auto [pc, c] = split(inj_redirect, '@');
        spec = InjectionSpec::pc_redirect(parse_addr(pc), std::stoull(c));
      } else {
        throw std::runtime_error("one of --flip, --replace, --redirect or --sweep is required");
      }
      const DetectionReport d = measure_detection(a, mode, spec);
      std::string out = "outcome,detected,detection_pc,latency_instructions,output_corrupted\n";
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s,%d,%s,%s,%d\n", std::string(outcome_name(d.outcome)).c_str(), d.detected,
                    d.detection_pc ? ("0x" + [&] { char h[16]; std::snprintf(h, sizeof h, "%x", *d.detection_pc); return std::string(h); }()).c_str() : "",
                    d.latency_instructions ? std::to_string(*d.latency_instructions).c_str() : "", d.output_corrupted);
      emit(inj_out, out + buf);
      return inj_expect && !d.detected ? 2 : 0;
    }
    if (*c_dpa) {
      const RunConfig cfg = effective_config(g);
      DpaOptions o;
      o.traces = dpa_traces;
      o.leakage = cfg.system.leakage;
      o.leakage.sigma = dpa_sigma >= 0 ? dpa_sigma : (g.config.empty() ? 1.0 : cfg.system.leakage.sigma);
      o.seed = g.seed.value_or(1);
      if (dpa_key.size() != 8) throw std::runtime_error("--key takes 8 hex digits");
      for (int i = 0; i < 4; ++i) o.key[i] = static_cast<std::uint8_t>(std::stoul(dpa_key.substr(2 * i, 2), nullptr, 16));
      if (!g.config.empty() && cfg.apps[0]) dpa_aes = *cfg.apps[0];
      if (!g.config.empty() && cfg.apps[1]) dpa_filler = *cfg.apps[1];
      const Application aes = load_app(dpa_aes);
      std::optional<Application> filler;
      if (dpa_attack == "combined") {
        o.use = TraceUse::Combined;
        o.mode = g.mode.empty() && g.config.empty() ? Mode::SecuredM : cfg.system.mode;
        filler = load_app(dpa_filler);
      } else {
        o.mode = g.mode.empty() && g.config.empty() ? Mode::NonSecured : cfg.system.mode;
      }
      const KeyRanking k = run_dpa(aes, filler ? &*filler : nullptr, o);
      emit(dpa_out, ranking_json(k) + "\n");
      std::fprintf(stderr, "%s attack, %u traces: true key 0x%02x rank %u\n", dpa_attack.c_str(), dpa_traces,
                   k.true_key, k.true_rank);
      return dpa_expect.empty() || rank_ok(dpa_expect, k.true_rank) ? 0 : 2;
    }
    if (*c_rep) {
      if (rep_pairs.empty()) rep_pairs = {"toy_aes:crc", "toy_des:adpcm", "xor_cipher:crc", "adpcm:crc"};
      const RunConfig cfg = effective_config(g);
      std::vector<OverheadReport> reports;
      for (const auto& p : rep_pairs) {
        const auto i = p.find(':');
        const Application a = load_app(p.substr(0, i));
        std::optional<Application> b;
        if (i != std::string::npos) b = load_app(p.substr(i + 1));
        reports.push_back(compare_modes(cfg.system, &a, b ? &*b : nullptr));
      }
      emit(rep_out, overhead_table(reports));
      for (const auto& r : reports)
        if (!r.integrity_identity) return 2;
      return 0;
    }
    if (*c_chk) {
      if (chk_ids.empty()) chk_ids = criterion_ids();
      int failed = 0;
      for (int id : chk_ids) {
        const CriterionResult r = check_criterion(id, g.seed.value_or(1));
        std::printf("%s criterion %d (%s): %s\n", r.pass ? "PASS" : "FAIL", id, r.name.c_str(), r.detail.c_str());
        std::fflush(stdout);
        failed += r.pass ? 0 : 1;
      }
      return failed == 0 ? 0 : 2;
    }
  } catch (const AssemblyError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
