#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "secured/controller.hpp"
#include "secured/instrument.hpp"
#include "secured/power.hpp"

namespace secured {

enum class Mode : std::uint8_t { NonSecured, SecuredI, SecuredM, Secured };

std::string_view mode_name(Mode m);
std::optional<Mode> mode_from_name(std::string_view s);
constexpr bool integrity_enabled(Mode m) { return m == Mode::SecuredI || m == Mode::Secured; }
constexpr bool balancing_enabled(Mode m) { return m == Mode::SecuredM || m == Mode::Secured; }
inline constexpr std::array<Mode, 4> kAllModes = {Mode::NonSecured, Mode::SecuredI, Mode::SecuredM, Mode::Secured};

struct ScheduledInterrupt {
  Cycle cycle = 0;
  unsigned core = 0;
  Addr vector = 0;
};

/// Instruction-memory mutation or control-flow hijack applied before the
/// given cycle's fetch.
struct Mutation {
  enum class Kind : std::uint8_t { Poke, Redirect } kind = Kind::Poke;
  Cycle cycle = 0;
  unsigned core = 0;
  Addr addr = 0;  // code address (Poke) or new pc (Redirect)
  Word word = 0;
};

struct SystemConfig {
  Mode mode = Mode::NonSecured;
  LeakageConfig leakage;
  bool record_trace = false;
  bool keep_events = false;
  std::vector<ScheduledInterrupt> interrupts;
  std::vector<Mutation> mutations;
  Cycle max_cycles = 5'000'000;
  DelayTable delays;
};

/// What one core's private memories hold, and where its own program starts.
struct CoreLoad {
  MemoryImage image;
  std::optional<Addr> entry;  // nullopt: no application, core idles halted
  std::optional<Addr> stack_top;
};

struct AppResult {
  bool present = false;
  bool halted = false;
  bool trapped = false;
  Cycle cycles = 0;  // halt cycle + 1
  std::uint64_t retired = 0;
  std::uint64_t chk_retired = 0;
};

struct LockstepAudit {
  Cycle cycles_checked = 0;
  Cycle skew_cycles = 0;
  std::optional<Cycle> first_skew;
  bool ok() const { return skew_cycles == 0; }
};

struct RunResult {
  std::array<AppResult, 2> apps;
  Cycle net_runtime = 0;
  Cycle cycles_simulated = 0;
  bool timeout = false;
  std::optional<std::string> protocol_error;
  std::vector<CoreEvent> faults;  // integrity, illegal, alignment
  std::vector<BalanceEpisode> episodes;
  std::vector<InterruptRecord> interrupts;
  std::vector<PhaseTransition> transitions;
  LockstepAudit audit;
  std::optional<PowerTrace> trace;
  std::vector<CoreEvent> events;  // when keep_events
  std::array<CoreState, 2> final_state;
  std::array<Memory, 2> dmem;
  std::array<std::map<Addr, std::uint64_t>, 2> retire_counts;
};

/// Steps controller and both cores in one clock loop until every application
/// has halted and the controller is idle, or until max_cycles.
RunResult run(const SystemConfig& cfg, const std::array<CoreLoad, 2>& loads);

// ---------------------------------------------------------------------------
// Applications and static scheduling

struct Application {
  std::string name;
  Assembly plain;         // balance-marked, no chk
  Assembly instrumented;  // balance-marked and chk-instrumented
  std::vector<BalancedRegion> regions;
  std::vector<Addr> inserted_jumps;  // addresses in `instrumented`

  bool balanced() const { return !regions.empty(); }
  const Assembly& binary(Mode m) const { return integrity_enabled(m) ? instrumented : plain; }
};

Application build_application(const std::string& name, const Program& source);
Application build_application(const std::string& name, std::string_view source);

/// Memories for running `apps` (either may be absent) in `mode`. In balancing
/// modes each core also receives the complementary image of the other core's
/// balanced application.
std::array<CoreLoad, 2> schedule(Mode mode, const Application* app0, const Application* app1);

RunResult run_pair(const SystemConfig& cfg, const Application* app0, const Application* app1);

struct ModeRow {
  Mode mode = Mode::NonSecured;
  Cycle net_runtime = 0;
  double overhead_pct = 0;
  std::uint64_t retired = 0;
  std::uint64_t chk_retired = 0;
  std::uint64_t jump_retired = 0;  // retirements of inserted fall-through jumps
  std::size_t balance_episodes = 0;
};

struct OverheadReport {
  std::string pair;
  std::vector<ModeRow> rows;
  /// SECURED_I minus NON_SECURED cycles equals chk plus inserted-jump
  /// retirements, per application.
  bool integrity_identity = false;
  const ModeRow& row(Mode m) const;
};

OverheadReport compare_modes(const SystemConfig& base, const Application* app0, const Application* app1);

std::string run_json(const RunResult& r, const SystemConfig& cfg);
std::string overhead_table(const std::vector<OverheadReport>& reports);
std::string transitions_jsonl(const std::vector<PhaseTransition>& t);

}  // namespace secured
