#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "secured/attack.hpp"
#include "secured/workloads.hpp"

namespace secured {

struct DpaOptions {
  Mode mode = Mode::NonSecured;
  TraceUse use = TraceUse::SingleCore;
  unsigned traces = 1000;
  LeakageConfig leakage;
  std::uint64_t seed = 1;  // counters and per-trace noise
  AesKey key{0x2b, 0x7e, 0x15, 0x16};
};

/// Runs the toy-AES application once per trace with a fresh random counter
/// and returns the traces with the first counter byte of each run.
std::vector<PowerTrace> collect_aes_traces(const Application& aes, const Application* filler, const DpaOptions& opt,
                                           std::vector<std::uint8_t>& first_bytes);

/// CPA on the first key byte.
KeyRanking run_dpa(const Application& aes, const Application* filler, const DpaOptions& opt);

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<int> criterion_ids();
CriterionResult check_criterion(int id, std::uint64_t seed = 1);

CriterionResult check_switching_overhead();
CriterionResult check_injection_detection();
CriterionResult check_unprotected_silent();
CriterionResult check_balancing_cancellation(std::uint64_t seed);
CriterionResult check_cpa_contrast(std::uint64_t seed);
CriterionResult check_runtime_composition();
CriterionResult check_mode_ordering();
CriterionResult check_interrupt_during_balancing();
CriterionResult check_checksum_equivalence();

}  // namespace secured
