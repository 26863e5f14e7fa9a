#include "secured/controller.hpp"

#include <algorithm>

namespace secured {

namespace {

const char* const kRowNames[9] = {
    "Store Register-file",   "Store PC,HI,LO registers",   "Store incHashed, hashed",
    "Restore Register-file", "Restore PC,HI,LO registers", "Restore incHashed, hashed",
    "Flush Pipelines",       "Interrupt to switch",        "Exit the interrupt",
};

std::size_t group_of(unsigned word) { return word < 32 ? 0 : word < 35 ? 1 : 2; }

}  // namespace

ProtocolError::ProtocolError(Cycle c, const std::string& what)
    : std::runtime_error("cycle " + std::to_string(c) + ": " + what), cycle(c) {}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Idle: return "IDLE";
    case Phase::FlushWait: return "FLUSH_WAIT";
    case Phase::Saving: return "SAVING";
    case Phase::Broadcast: return "BROADCAST";
    case Phase::Balancing: return "BALANCING";
    case Phase::IntService: return "INT_SERVICE";
    case Phase::Restoring: return "RESTORING";
    case Phase::Exit: return "EXIT";
  }
  return "?";
}

Cycle BalanceEpisode::total() const {
  Cycle t = 0;
  for (const auto& r : rows) t += r.cycles;
  return t;
}

Controller::Controller(DelayTable delays) : delays_(delays) {}

bool Controller::idle() const {
  return phase_ == Phase::Idle && requests_.empty() && !active_ &&
         std::all_of(irq_.begin(), irq_.end(), [](const IrqState& s) { return s.stage == IrqStage::None && s.pending.empty(); });
}

void Controller::enter(Cycle cycle, Phase p, unsigned countdown) {
  transitions_.push_back(PhaseTransition{cycle, phase_, p, countdown});
  phase_ = p;
  countdown_ = countdown;
}

void Controller::raise_interrupt(Cycle cycle, unsigned core, Addr vector) {
  irq_.at(core).pending.push_back(Irq{vector, cycle});
}

bool Controller::can_start_balance(const std::array<Core*, 2>& cores) const {
  const unsigned victim = 1 - requests_.front().core;
  if (cores[victim]->state().in_interrupt) return false;
  return irq_[0].stage == IrqStage::None && irq_[1].stage == IrqStage::None;
}

bool Controller::can_take_irq(unsigned core, const std::array<Core*, 2>& cores) const {
  const Core& c = *cores[core];
  if (c.state().in_interrupt || c.state().fetch_blocked) return false;
  auto control_in_flight = [](const Core& k) {
    return k.in_flight(Op::StartBal) || k.in_flight(Op::EndBal) || k.in_flight(Op::Iret);
  };
  if (control_in_flight(c)) return false;
  if (phase_ == Phase::Idle) return requests_.empty() && !active_ && !exit_pending_;
  if (phase_ == Phase::Balancing) {
    const Core& other = *cores[1 - core];
    return !exit_pending_ && !balance_irq_core_ && !control_in_flight(other) &&
           irq_[1 - core].stage == IrqStage::None;
  }
  return false;
}

std::array<ControlLines, 2> Controller::tick(Cycle cycle, std::array<Core*, 2> cores, std::array<Memory*, 2> dmem) {
  std::array<ControlLines, 2> lines{};

  // Balance resume after EXIT: both cores get their pc in this cycle.
  if (active_ && phase_ == Phase::Idle) {
    const unsigned r = active_->core;
    const unsigned v = 1 - r;
    lines[r].pc_write = cores[r]->state().pc;
    const bool victim_waiting = std::any_of(requests_.begin(), requests_.end(), [v](const Request& q) { return q.core == v; });
    if (!saved_halted_ && !victim_waiting) lines[v].pc_write = cores[v]->state().pc;
    episodes_.back().resume = cycle;
    active_.reset();
    saved_.reset();
    return lines;
  }

  switch (phase_) {
    case Phase::Idle:
      if (!requests_.empty() && can_start_balance(cores)) {
        active_ = requests_.front();
        requests_.pop_front();
        BalanceEpisode ep;
        ep.requester = active_->core;
        ep.start_bal = active_->retired;
        ep.balance_pc = active_->resume_pc;
        for (const char* n : kRowNames) ep.rows.push_back(DelayRow{n, 0});
        episodes_.push_back(std::move(ep));
        enter(cycle, Phase::FlushWait, delays_.flush);
      }
      break;
    case Phase::Balancing:
      if (exit_pending_) {
        exit_pending_ = false;
        enter(cycle, Phase::Restoring, delays_.save());
        saved_words_ = 0;
      }
      break;
    default:
      break;
  }

  if (active_) {
    const unsigned r = active_->core;
    const unsigned v = 1 - r;
    BalanceEpisode& ep = episodes_.back();
    switch (phase_) {
      case Phase::FlushWait:
        lines[0].stall_fetch = lines[1].stall_fetch = true;
        ++ep.rows[6].cycles;
        if (--countdown_ == 0) {
          enter(cycle + 1, Phase::Saving, delays_.save());
          saved_words_ = 0;
        }
        break;
      case Phase::Saving: {
        if (countdown_ == delays_.save()) {
          saved_ = cores[v]->context();
          saved_halted_ = saved_->halted;
          saved_sp_ = cores[v]->state().regs[kRegSp];
        }
        lines[r].stall_fetch = true;
        lines[v].hold = true;
        ++ep.rows[group_of(saved_words_)].cycles;
        const unsigned elapsed = delays_.save() - countdown_ + 1;
        if (elapsed % delays_.per_register == 0) {
          const auto words = saved_->words();
          dmem[v]->write(saved_sp_ - 4 * (saved_words_ + 1), words[saved_words_]);
          ++saved_words_;
        }
        if (--countdown_ == 0) enter(cycle + 1, Phase::Broadcast, delays_.interrupt_to_switch);
        break;
      }
      case Phase::Broadcast:
        lines[r].stall_fetch = true;
        lines[v].hold = true;
        ++ep.rows[7].cycles;
        if (--countdown_ == 0) enter(cycle + 1, Phase::Balancing, 0);
        return lines;
      case Phase::Balancing:
        if (ep.broadcast == 0) {
          lines[0].pc_write = lines[1].pc_write = active_->resume_pc;
          lines[0].disarm = lines[1].disarm = true;
          ep.broadcast = cycle;
          return lines;
        }
        break;
      case Phase::Restoring: {
        lines[0].stall_fetch = lines[1].stall_fetch = true;
        ++ep.rows[3 + group_of(saved_words_)].cycles;
        const unsigned elapsed = delays_.save() - countdown_ + 1;
        if (elapsed % delays_.per_register == 0) {
          restore_words_[saved_words_] = dmem[v]->read(saved_sp_ - 4 * (saved_words_ + 1));
          ++saved_words_;
        }
        if (--countdown_ == 0) {
          cores[v]->restore(SavedContext::from_words(restore_words_, saved_halted_));
          enter(cycle + 1, Phase::Exit, delays_.exit);
        }
        break;
      }
      case Phase::Exit:
        lines[0].stall_fetch = lines[1].stall_fetch = true;
        ++ep.rows[8].cycles;
        if (--countdown_ == 0) enter(cycle + 1, Phase::Idle, 0);
        return lines;
      default:
        break;
    }
  }

  // Interrupt routing.
  for (unsigned k = 0; k < 2; ++k) {
    IrqState& st = irq_[k];
    const unsigned o = 1 - k;
    if (st.stage == IrqStage::None) {
      while (!st.pending.empty() && cores[k]->halted()) st.pending.pop_front();
      if (st.pending.empty() || !can_take_irq(k, cores)) continue;
      const Irq irq = st.pending.front();
      st.pending.pop_front();
      InterruptRecord rec;
      rec.core = k;
      rec.vector = irq.vector;
      rec.raised = irq.raised;
      rec.during_balancing = phase_ == Phase::Balancing;
      st.active = rec;
      st.stage = IrqStage::Drain;
      st.countdown = delays_.flush;
      if (rec.during_balancing) {
        balance_irq_core_ = k;
        enter(cycle, Phase::IntService, 0);
      }
    }
    const bool balancing = st.active && st.active->during_balancing;
    switch (st.stage) {
      case IrqStage::None:
        break;
      case IrqStage::Drain:
        lines[k].stall_fetch = true;
        if (balancing) lines[o].stall_fetch = true;
        if (--st.countdown == 0) {
          st.stage = IrqStage::Switch;
          st.countdown = delays_.interrupt_to_switch;
        }
        break;
      case IrqStage::Switch:
        lines[k].stall_fetch = true;
        if (balancing) lines[o].hold = true;
        if (--st.countdown == 0) st.stage = IrqStage::Vector;
        break;
      case IrqStage::Vector:
        lines[k].interrupt_vector = st.active->vector;
        if (balancing) lines[o].hold = true;
        st.active->entry = cycle;
        st.stage = IrqStage::Service;
        break;
      case IrqStage::Service:
        if (balancing) lines[o].hold = true;
        break;
      case IrqStage::Exit:
        lines[k].stall_fetch = true;
        if (balancing) lines[o].hold = true;
        if (--st.countdown == 0) st.stage = IrqStage::Return;
        break;
      case IrqStage::Return:
        lines[k].interrupt_return = true;
        if (balancing) {
          lines[o].pc_write = cores[o]->state().pc;
          balance_irq_core_.reset();
          enter(cycle, Phase::Balancing, 0);
        }
        st.active->resume = cycle;
        interrupt_log_.push_back(*st.active);
        st.active.reset();
        st.stage = IrqStage::None;
        break;
    }
  }
  return lines;
}

void Controller::observe(Cycle cycle, const std::vector<CoreEvent>& events, std::array<Core*, 2> cores) {
  (void)cores;
  for (const CoreEvent& e : events) {
    if (e.cycle != cycle) continue;
    switch (e.kind) {
      case EventKind::StartBalRetired:
        if (phase_ == Phase::Balancing || phase_ == Phase::IntService)
          throw ProtocolError(cycle, "startBal inside a balanced region on core " + std::to_string(e.core));
        requests_.push_back(Request{e.core, e.pc + 4, cycle});
        break;
      case EventKind::EndBalRetired:
        if (phase_ == Phase::Balancing && active_) {
          if (e.core == active_->core) {
            episodes_.back().end_bal = cycle;
            exit_pending_ = true;
          }
          break;
        }
        throw ProtocolError(cycle, "endBal outside balancing on core " + std::to_string(e.core));
      case EventKind::NmiSent: {
        IrqState& st = irq_.at(e.core);
        if (st.stage != IrqStage::Service) throw ProtocolError(cycle, "nmi without an active interrupt");
        st.active->nmi = cycle;
        st.stage = IrqStage::Exit;
        st.countdown = delays_.exit;
        break;
      }
      default:
        break;
    }
  }
}

}  // namespace secured
