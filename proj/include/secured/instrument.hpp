#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "secured/assembler.hpp"

namespace secured {

class InstrumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Block checksums

constexpr Word kChecksumMask = 0x03FFFFFFu;

/// One step of the runtime accumulator: rotate left by one, then XOR.
constexpr Word accumulate(Word acc, Word w) { return std::rotl(acc, 1) ^ w; }

/// Folds a 32-bit accumulator to 26 bits. Each accumulator bit lands on
/// exactly one result bit, so a single flipped bit always survives.
constexpr Word fold26(Word c) { return (c & kChecksumMask) ^ (c >> 26); }

struct ChecksumValue {
  Word value = 0;  // < 2^26
  friend bool operator==(const ChecksumValue&, const ChecksumValue&) = default;
};

/// Pre-fold accumulator over `words` starting from zero.
Word checksum_accumulator(std::span<const Word> words);

/// Throws InstrumentError on an empty sequence.
ChecksumValue compute_checksum(std::span<const Word> words);

// ---------------------------------------------------------------------------
// Control-flow graph

enum class EdgeKind : std::uint8_t { Taken, FallThrough, CallReturn, Indirect };

struct BasicBlock {
  Addr start = 0;                 // address of the chk word when present
  std::optional<Word> chk;        // chk payload, for instrumented code
  std::vector<Word> words;        // block body, excluding chk, including the CFI
  ChecksumValue checksum;         // compute_checksum(words)

  Addr body_start() const { return start + (chk ? 4u : 0u); }
  Addr end() const { return body_start() + static_cast<Addr>(4 * words.size()); }
  Addr last_address() const { return end() - 4; }
  bool ends_in_cfi() const;
  bool contains(Addr a) const { return a >= start && a < end(); }
  /// Instruction count including the chk word.
  std::size_t size() const { return words.size() + (chk ? 1 : 0); }
};

struct CfgEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  EdgeKind kind = EdgeKind::Taken;
};

struct ControlFlowGraph {
  std::vector<BasicBlock> blocks;  // sorted by start address
  std::vector<CfgEdge> edges;
  std::size_t entry = 0;

  std::optional<std::size_t> block_starting_at(Addr a) const;
  std::optional<std::size_t> block_containing(Addr a) const;
};

/// Partitions the code of `img` into basic blocks. A chk word always opens a
/// block and is kept out of the block body. Throws InstrumentError for
/// undecodable words, unannotated `jr`, targets outside code, or code that
/// runs off the end of a segment.
ControlFlowGraph build_cfg(const MemoryImage& img, const SymbolTable& symbols);

// ---------------------------------------------------------------------------
// Instrumentation passes

struct BlockReport {
  Addr address = 0;
  std::size_t size = 0;  // instructions including chk
  ChecksumValue checksum;
  std::string cfi;  // mnemonic of the terminating instruction
};

struct InstrumentedProgram {
  Program program;
  Assembly assembly;
  ControlFlowGraph cfg;
  std::vector<BlockReport> report;
  std::size_t inserted_jumps = 0;
};

/// Inserts a chk at the head of every block, closes fall-through blocks with
/// an explicit jump, and fills in checksums from the final encoding.
InstrumentedProgram insert_chk(const Program& program);

/// JSON-lines rendering of the per-block report.
std::string report_jsonl(const std::vector<BlockReport>& report);

struct BalancedRegion {
  std::string start_label;
  std::string end_label;
  /// Registers that hold complemented values on region entry.
  std::vector<unsigned> complement_regs;
};

/// Places startBal at `region.start_label` and endBal at `region.end_label`
/// (both labels move onto the marker). Rejects regions with other entries,
/// exits other than the end label, or overlap with an existing region.
Program mark_balancing(const Program& program, const BalancedRegion& region);

/// Applies every `.balance` annotation in the source.
Program mark_annotated_regions(const Program& program);

/// mark_annotated_regions followed by insert_chk.
InstrumentedProgram instrument(const Program& program);

struct ClosureFinding {
  Addr address = 0;
  std::string message;
};

struct ClosureReport {
  std::vector<ClosureFinding> errors;    // indeterminate complement tags
  std::vector<ClosureFinding> warnings;  // determinate but not fully balanced
  bool ok() const { return errors.empty(); }
};

/// Tag dataflow over the marked region: every value is either identical on
/// both cores or a known XOR-mask of its counterpart.
ClosureReport verify_complement_closure(const Assembly& marked, const BalancedRegion& region);

/// Data-section transform only: `.baldata` words complemented, each
/// `.baltable` T'[j] = NOT T[(n-1) XOR j], masked to 8 bits for byte tables.
MemoryImage complement_image(const MemoryImage& img);

/// Verifies closure of every region, then returns complement_image. Throws
/// InstrumentError with the offending addresses on a failing report.
MemoryImage generate_complement_image(const Assembly& marked,
                                      const std::vector<BalancedRegion>& regions);

/// Regions of an assembly, from its `.balance` annotations.
std::vector<BalancedRegion> annotated_regions(const SymbolTable& symbols);

}  // namespace secured
