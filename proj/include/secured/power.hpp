#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "secured/core.hpp"

namespace secured {

struct LeakageConfig {
  double alpha = 1.0;  // register-write weight
  double beta = 1.0;   // memory data bus weight
  double gamma = 0.5;  // instruction fetch weight
  double sigma = 0.0;  // Gaussian noise
  std::uint64_t seed = 1;
  /// Transition (Hamming distance) leakage instead of value leakage.
  bool hamming_distance = false;

  void validate() const;
};

struct PowerTrace {
  std::array<std::vector<double>, 2> core;
  std::vector<double> combined;
  std::string run_id;
  std::vector<std::uint8_t> plaintext;
  LeakageConfig config;

  std::size_t size() const { return combined.size(); }
};

/// Noise-free sample of one core for one cycle under the value model.
double sample_cycle(std::span<const CoreEvent> events, const LeakageConfig& cfg);

/// Builds per-core and combined traces of `cycles` samples from a run's event
/// stream. Noise is drawn per core and cycle from `cfg.seed`.
PowerTrace record(std::span<const CoreEvent> events, Cycle cycles, const LeakageConfig& cfg);

enum class TraceUse : std::uint8_t { SingleCore, Combined };

/// Predicted leakage for a plaintext byte under a key guess.
using LeakagePredictor = std::function<double(std::uint8_t plaintext, unsigned guess)>;

/// HW(Sbox(p XOR k)).
LeakagePredictor sbox_hw_predictor();

struct KeyRanking {
  std::vector<double> peak;    // per guess, max |r| over cycles
  std::vector<unsigned> order; // guesses, best first
  unsigned true_key = 0;
  unsigned true_rank = 0;      // 1-based

  unsigned rank_of(unsigned guess) const;
};

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CpaOptions {
  TraceUse use = TraceUse::SingleCore;
  unsigned core = 0;  // for SingleCore
  unsigned guesses = 256;
  std::size_t window_begin = 0;
  std::optional<std::size_t> window_end;
};

/// Correlation power analysis. Throws AttackError with fewer than two traces
/// or traces of different lengths.
KeyRanking cpa_attack(std::span<const PowerTrace> traces, std::span<const std::uint8_t> plaintexts,
                      unsigned true_key, const LeakagePredictor& predictor, const CpaOptions& opt = {});

/// Cuts every trace to the shortest one. Data-dependent timing after the
/// attacked region leaves the earlier cycles aligned.
void truncate_to_common_length(std::vector<PowerTrace>& traces);

std::string trace_csv(const PowerTrace& t);
std::string ranking_json(const KeyRanking& r);

}  // namespace secured
