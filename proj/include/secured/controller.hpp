#pragma once

#include <array>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "secured/core.hpp"

namespace secured {

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(Cycle cycle, const std::string& what);
  Cycle cycle;
};

enum class Phase : std::uint8_t { Idle, FlushWait, Saving, Broadcast, Balancing, IntService, Restoring, Exit };

std::string_view phase_name(Phase p);

struct DelayTable {
  unsigned per_register = 10;
  unsigned flush = 6;
  unsigned interrupt_to_switch = 1;
  unsigned exit = 1;

  unsigned regfile() const { return 32 * per_register; }
  unsigned pc_hi_lo() const { return 3 * per_register; }
  unsigned checksum_regs() const { return 2 * per_register; }
  unsigned save() const { return regfile() + pc_hi_lo() + checksum_regs(); }
};

/// One row of the switching-delay breakdown.
struct DelayRow {
  std::string name;
  Cycle cycles = 0;
};

/// Controller-accounted cycles of one balanced region, entry plus exit.
struct BalanceEpisode {
  unsigned requester = 0;
  Cycle start_bal = 0;  // retire cycle of startBal
  Cycle broadcast = 0;  // cycle both cores received the balance pc
  Cycle end_bal = 0;    // retire cycle of endBal
  Cycle resume = 0;     // cycle both cores resumed their own programs
  Addr balance_pc = 0;
  std::vector<DelayRow> rows;
  Cycle total() const;
};

struct PhaseTransition {
  Cycle cycle = 0;
  Phase from = Phase::Idle;
  Phase to = Phase::Idle;
  unsigned countdown = 0;
};

/// Interrupt servicing record for one core.
struct InterruptRecord {
  unsigned core = 0;
  Addr vector = 0;
  Cycle raised = 0;
  Cycle entry = 0;   // cycle of the vector fetch
  Cycle nmi = 0;     // cycle the iret retired
  Cycle resume = 0;  // cycle of the return fetch
  bool during_balancing = false;
};

class Controller {
 public:
  explicit Controller(DelayTable delays = {});

  /// Control lines for this cycle. Called before either core steps. Saving and
  /// restoring access the victim's data memory directly.
  std::array<ControlLines, 2> tick(Cycle cycle, std::array<Core*, 2> cores, std::array<Memory*, 2> dmem);

  /// Feeds the events the cores produced in the cycle just stepped.
  void observe(Cycle cycle, const std::vector<CoreEvent>& events, std::array<Core*, 2> cores);

  /// Maskable external interrupt; serviced once the target can be drained.
  void raise_interrupt(Cycle cycle, unsigned core, Addr vector);

  Phase phase() const { return phase_; }
  unsigned countdown() const { return countdown_; }
  bool has_saved_context() const { return saved_.has_value(); }
  bool idle() const;

  const DelayTable& delays() const { return delays_; }
  const std::vector<BalanceEpisode>& episodes() const { return episodes_; }
  const std::vector<PhaseTransition>& transitions() const { return transitions_; }
  const std::vector<InterruptRecord>& interrupts() const { return interrupt_log_; }

 private:
  struct Request {
    unsigned core = 0;
    Addr resume_pc = 0;
    Cycle retired = 0;
  };
  struct Irq {
    Addr vector = 0;
    Cycle raised = 0;
  };
  enum class IrqStage : std::uint8_t { None, Drain, Switch, Vector, Service, Exit, Return };
  struct IrqState {
    IrqStage stage = IrqStage::None;
    unsigned countdown = 0;
    std::deque<Irq> pending;
    std::optional<InterruptRecord> active;
  };

  void enter(Cycle cycle, Phase p, unsigned countdown);
  bool can_start_balance(const std::array<Core*, 2>& cores) const;
  bool can_take_irq(unsigned core, const std::array<Core*, 2>& cores) const;

  DelayTable delays_;
  Phase phase_ = Phase::Idle;
  unsigned countdown_ = 0;
  std::deque<Request> requests_;
  std::optional<Request> active_;
  std::optional<SavedContext> saved_;
  bool saved_halted_ = false;
  Addr saved_sp_ = 0;
  unsigned saved_words_ = 0;
  std::array<Word, 37> restore_words_{};
  std::array<IrqState, 2> irq_{};
  std::optional<unsigned> balance_irq_core_;
  bool exit_pending_ = false;
  std::vector<BalanceEpisode> episodes_;
  std::vector<PhaseTransition> transitions_;
  std::vector<InterruptRecord> interrupt_log_;
};

}  // namespace secured
