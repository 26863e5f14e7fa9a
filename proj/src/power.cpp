#include "secured/power.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <json.hpp>

#include "secured/workloads.hpp"

namespace secured {

namespace {

double hw(Word w) { return static_cast<double>(std::popcount(w)); }

}  // namespace

void LeakageConfig::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0) throw std::invalid_argument("leakage weights must be non-negative");
  if (sigma < 0) throw std::invalid_argument("sigma must be non-negative");
}

double sample_cycle(std::span<const CoreEvent> events, const LeakageConfig& cfg) {
  double s = 0;
  for (const CoreEvent& e : events) {
    switch (e.kind) {
      case EventKind::RegWrite: s += cfg.alpha * hw(e.value); break;
      case EventKind::MemRead:
      case EventKind::MemWrite: s += cfg.beta * hw(e.value); break;
      case EventKind::Fetch: s += cfg.gamma * hw(e.value); break;
      default: break;
    }
  }
  return s;
}

PowerTrace record(std::span<const CoreEvent> events, Cycle cycles, const LeakageConfig& cfg) {
  cfg.validate();
  PowerTrace t;
  t.config = cfg;
  for (auto& c : t.core) c.assign(cycles, 0.0);

  // Previous values for the transition model.
  std::array<std::array<Word, kNumRegisters>, 2> regs{};
  std::array<Word, 2> bus{};
  std::array<Word, 2> fetch{};

  for (const CoreEvent& e : events) {
    if (e.cycle >= cycles || e.core > 1) continue;
    double& s = t.core[e.core][e.cycle];
    if (!cfg.hamming_distance) {
      s += sample_cycle(std::span(&e, 1), cfg);
      continue;
    }
    switch (e.kind) {
      case EventKind::RegWrite: {
        Word& old = regs[e.core][e.addr % kNumRegisters];
        s += cfg.alpha * hw(old ^ e.value);
        old = e.value;
        break;
      }
      case EventKind::MemRead:
      case EventKind::MemWrite:
        s += cfg.beta * hw(bus[e.core] ^ e.value);
        bus[e.core] = e.value;
        break;
      case EventKind::Fetch:
        s += cfg.gamma * hw(fetch[e.core] ^ e.value);
        fetch[e.core] = e.value;
        break;
      default:
        break;
    }
  }

  if (cfg.sigma > 0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    for (Cycle c = 0; c < cycles; ++c)
      for (auto& core : t.core) core[c] += noise(rng);
  }
  t.combined.resize(cycles);
  for (Cycle c = 0; c < cycles; ++c) t.combined[c] = t.core[0][c] + t.core[1][c];
  return t;
}

LeakagePredictor sbox_hw_predictor() {
  return [](std::uint8_t p, unsigned k) {
    return static_cast<double>(std::popcount(static_cast<unsigned>(aes_sbox()[(p ^ k) & 0xFF])));
  };
}

unsigned KeyRanking::rank_of(unsigned guess) const {
  auto it = std::find(order.begin(), order.end(), guess);
  return static_cast<unsigned>(it - order.begin()) + 1;
}

KeyRanking cpa_attack(std::span<const PowerTrace> traces, std::span<const std::uint8_t> plaintexts,
                      unsigned true_key, const LeakagePredictor& predictor, const CpaOptions& opt) {
  if (traces.size() < 2) throw AttackError("cpa needs at least two traces");
  if (plaintexts.size() != traces.size()) throw AttackError("one plaintext byte per trace required");
  const std::size_t len = traces[0].size();
  for (const auto& t : traces)
    if (t.size() != len) throw AttackError("traces differ in length");
  const std::size_t end = std::min(opt.window_end.value_or(len), len);
  if (opt.window_begin >= end) throw AttackError("empty attack window");

  const auto n = static_cast<Eigen::Index>(traces.size());
  const auto cols = static_cast<Eigen::Index>(end - opt.window_begin);
  const auto g = static_cast<Eigen::Index>(opt.guesses);

  Eigen::MatrixXd samples(n, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PowerTrace& t = traces[static_cast<std::size_t>(i)];
    const auto& seq = opt.use == TraceUse::Combined ? t.combined : t.core.at(opt.core);
    for (Eigen::Index c = 0; c < cols; ++c) samples(i, c) = seq[opt.window_begin + static_cast<std::size_t>(c)];
  }
  Eigen::MatrixXd hyp(n, g);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < g; ++k)
      hyp(i, k) = predictor(plaintexts[static_cast<std::size_t>(i)], static_cast<unsigned>(k));

  auto standardize = [](Eigen::MatrixXd& m) {
    m.rowwise() -= m.colwise().mean();
    const Eigen::RowVectorXd norms = m.colwise().norm();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      // Relative threshold: constant columns leave only rounding residue.
      if (norms(c) <= 1e-9 * std::sqrt(static_cast<double>(m.rows())))
        m.col(c).setZero();
      else
        m.col(c) /= norms(c);
    }
  };
  standardize(samples);
  standardize(hyp);
  const Eigen::MatrixXd r = hyp.transpose() * samples;

  KeyRanking out;
  out.true_key = true_key;
  out.peak.resize(opt.guesses);
  for (Eigen::Index k = 0; k < g; ++k) out.peak[static_cast<std::size_t>(k)] = r.row(k).cwiseAbs().maxCoeff();
  out.order.resize(opt.guesses);
  std::iota(out.order.begin(), out.order.end(), 0u);
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](unsigned a, unsigned b) { return out.peak[a] > out.peak[b]; });
  out.true_rank = out.rank_of(true_key);
  return out;
}

void truncate_to_common_length(std::vector<PowerTrace>& traces) {
  if (traces.empty()) return;
  std::size_t n = traces[0].size();
  for (const auto& t : traces) n = std::min(n, t.size());
  for (auto& t : traces) {
    for (auto& c : t.core) c.resize(n);
    t.combined.resize(n);
  }
}

std::string trace_csv(const PowerTrace& t) {
  std::string s = "# run " + t.run_id + "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "# alpha=%g beta=%g gamma=%g sigma=%g seed=%llu model=%s\n", t.config.alpha,
                t.config.beta, t.config.gamma, t.config.sigma, static_cast<unsigned long long>(t.config.seed),
                t.config.hamming_distance ? "hd" : "hw");
  s += buf;
  if (!t.plaintext.empty()) {
    s += "# plaintext ";
    for (auto b : t.plaintext) {
      std::snprintf(buf, sizeof buf, "%02x", b);
      s += buf;
    }
    s += "\n";
  }
  s += "cycle,core1,core2,combined\n";
  for (std::size_t c = 0; c < t.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", c, t.core[0][c], t.core[1][c], t.combined[c]);
    s += buf;
  }
  return s;
}

std::string ranking_json(const KeyRanking& r) {
  nlohmann::ordered_json j;
  j["true_key"] = r.true_key;
  j["true_rank"] = r.true_rank;
  j["order"] = r.order;
  j["peak"] = r.peak;
  return j.dump();
}

}  // namespace secured
