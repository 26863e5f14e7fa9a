#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "secured/memory_image.hpp"

namespace secured {

using Cycle = std::uint64_t;

constexpr std::size_t kPipelineDepth = 6;

/// Word-addressed sparse memory in 4 KiB pages. Unwritten words read as 0.
class Memory {
 public:
  Word read(Addr a) const;
  void write(Addr a, Word w);
  /// Loads every segment of `img` that lives in `space`.
  void load(const MemoryImage& img, Space space);

 private:
  static constexpr unsigned kPageWords = 1024;
  std::unordered_map<Addr, std::array<Word, kPageWords>> pages_;
};

/// Instruction memory: fetches outside the loaded code ranges fail.
class InstructionMemory {
 public:
  InstructionMemory() = default;
  explicit InstructionMemory(const MemoryImage& img) { load(img); }
  void load(const MemoryImage& img);
  std::optional<Word> fetch(Addr a) const;
  bool mapped(Addr a) const;
  /// Fault-injection access; throws if `a` is not code.
  void poke(Addr a, Word w);

 private:
  std::vector<std::pair<Addr, Addr>> ranges_;
  Memory words_;
};

enum class EventKind : std::uint8_t {
  Fetch,               // value = fetched word
  Retire,              // value = retired word
  RegWrite,            // addr = register index, value
  MemRead,             // addr, value
  MemWrite,            // addr, value
  IntegrityException,  // expected = hashedReg, value = folded runtime checksum
  IllegalInstruction,  // value = word (or 0 for a fetch outside code)
  AlignmentFault,      // addr = effective address
  StartBalRetired,
  EndBalRetired,
  NmiSent,
  Halted,
  PcWrite,             // controller wrote pc (addr)
  InterruptEntry,      // addr = vector
  ChecksumCompare,     // at a CFI: value = folded runtime checksum, expected = hashedReg
};

std::string_view event_name(EventKind k);

struct CoreEvent {
  Cycle cycle = 0;
  unsigned core = 0;
  EventKind kind = EventKind::Fetch;
  Addr pc = 0;
  Addr addr = 0;
  Word value = 0;
  Word expected = 0;
};

/// Per-cycle inputs from the controller.
struct ControlLines {
  bool hold = false;         // freeze the core entirely
  bool stall_fetch = false;  // no fetch; in-flight instructions drain
  std::optional<Addr> pc_write;
  std::optional<Addr> interrupt_vector;  // enter an interrupt at this vector
  bool interrupt_return = false;         // resume from the interrupt shadow
  bool disarm = false;                   // forget the open block (balance entry)
};

struct PipelineSlot {
  Addr pc = 0;
  Word word = 0;
  bool fetch_fault = false;
};

/// Everything the controller saves when it preempts a core.
struct SavedContext {
  std::array<Word, kNumRegisters> regs{};
  Addr pc = 0;
  Word hi = 0;
  Word lo = 0;
  Word inc_hashed = 0;
  Word hashed = 0;
  bool block_open = false;
  bool halted = false;

  /// The 37 saved words in save order: r0..r31, PC, HI, LO, incHashed, hashed.
  /// The open-block flag travels in bit 31 of the hashed word.
  std::array<Word, 37> words() const;
  static SavedContext from_words(const std::array<Word, 37>& w, bool halted);
  friend bool operator==(const SavedContext&, const SavedContext&) = default;
};

struct CoreState {
  Addr pc = 0;
  std::array<Word, kNumRegisters> regs{};
  Word hi = 0;
  Word lo = 0;
  Word hashed = 0;      // 26-bit static checksum loaded by chk
  Word inc_hashed = 0;  // runtime accumulator
  bool block_open = false;  // a chk retired and its CFI has not
  std::array<std::optional<PipelineSlot>, kPipelineDepth> pipeline{};
  bool integrity_enabled = false;
  bool balancing_enabled = false;
  bool in_interrupt = false;
  bool halted = false;
  bool trapped = false;
  bool on_hold = false;
  bool fetch_blocked = false;  // waiting for the controller to write pc
  Cycle cycle = 0;
  std::uint64_t retired = 0;
  std::uint64_t chk_retired = 0;
  std::optional<Cycle> halt_cycle;

  // Interrupt shadow: return pc and checksum registers.
  Addr shadow_pc = 0;
  Word shadow_hashed = 0;
  Word shadow_inc = 0;
  bool shadow_block_open = false;
};

class Core {
 public:
  Core(unsigned id, bool integrity, bool balancing);

  unsigned id() const { return id_; }
  const CoreState& state() const { return s_; }
  CoreState& state() { return s_; }

  void reset(Addr entry);

  /// Advances one clock. Events are appended to `out` in retire order.
  void step(Cycle cycle, const ControlLines& lines, const InstructionMemory& imem, Memory& dmem,
            std::vector<CoreEvent>& out);

  bool halted() const { return s_.halted; }
  bool pipeline_empty() const;
  bool in_flight(Op op) const;

  SavedContext context() const;
  void restore(const SavedContext& c);

 private:
  void retire(const PipelineSlot& slot, Memory& dmem, std::vector<CoreEvent>& out);
  void redirect(Addr from_pc, Addr target);
  void squash_younger();
  void trap(std::vector<CoreEvent>& out);
  void emit(std::vector<CoreEvent>& out, EventKind k, Addr pc, Addr addr = 0, Word value = 0, Word expected = 0);
  void write_reg(unsigned r, Word v, Addr pc, std::vector<CoreEvent>& out);

  unsigned id_;
  CoreState s_;
};

}  // namespace secured
