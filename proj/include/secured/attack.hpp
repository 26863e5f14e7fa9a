#pragma once

#include <optional>
#include <string>
#include <vector>

#include "secured/sim.hpp"

namespace secured {

struct InjectionSpec {
  enum class Kind : std::uint8_t { BitFlip, WordReplace, PcRedirect } kind = Kind::BitFlip;
  Addr address = 0;   // code address, or the new pc for PcRedirect
  unsigned bit = 0;   // BitFlip
  Word word = 0;      // WordReplace
  Cycle cycle = 0;    // applied before this cycle's fetch
  unsigned core = 0;

  static InjectionSpec bit_flip(Addr a, unsigned bit, Cycle at = 0);
  static InjectionSpec word_replace(Addr a, Word w, Cycle at = 0);
  static InjectionSpec pc_redirect(Addr pc, Cycle at);
};

enum class Outcome : std::uint8_t { IntegrityException, IllegalInstruction, Silent, Timeout };

std::string_view outcome_name(Outcome o);

struct DetectionReport {
  Outcome outcome = Outcome::Silent;
  bool detected = false;
  std::optional<Addr> detection_pc;
  std::optional<Cycle> detection_cycle;
  std::optional<std::uint64_t> latency_instructions;
  std::optional<Cycle> latency_cycles;
  bool corrupted_retired = false;  // the mutated word or hijacked path retired
  bool output_corrupted = false;   // silent, but data memory differs from a clean run
};

/// Checks the spec against the code of `image`; throws std::invalid_argument.
Mutation to_mutation(const InjectionSpec& spec, const MemoryImage& image);

/// Runs `app` alone on core 1 in `mode` with the injection applied.
DetectionReport measure_detection(const Application& app, Mode mode, const InjectionSpec& spec);

struct SweepEntry {
  Addr address = 0;
  unsigned bit = 0;
  bool executed = false;  // the word lies in a block the clean run executes
  std::size_t block_size = 0;
  DetectionReport report;
};

struct SweepSummary {
  std::size_t runs = 0;
  std::size_t executed_flips = 0;
  std::size_t detected_executed = 0;
  std::size_t silent_executed = 0;
  std::size_t silent_total = 0;
  std::size_t timeouts = 0;
  std::size_t latency_violations = 0;  // detection after the block's CFI
  std::size_t unexecuted_silent = 0;
  std::size_t unexecuted_flips = 0;
  double detection_rate() const;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  SweepSummary summary;
  std::size_t code_words = 0;
};

/// Every bit of every code word, flipped before the first fetch.
SweepResult sweep_bitflips(const Application& app, Mode mode);

std::string sweep_csv(const SweepResult& r);

}  // namespace secured
