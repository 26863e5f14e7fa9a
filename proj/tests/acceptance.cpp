// Runs every acceptance criterion and prints one line per criterion.
// Exit status is the number of failing criteria.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "secured/experiments.hpp"

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty()) ids = secured::criterion_ids();

  int failed = 0;
  for (int id : ids) {
    const auto t0 = std::chrono::steady_clock::now();
    secured::CriterionResult r;
    try {
      r = secured::check_criterion(id);
    } catch (const std::exception& e) {
      r = {id, "error", false, e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", r.pass ? "PASS" : "FAIL", id, r.name.c_str(), r.detail.c_str(), secs);
    std::fflush(stdout);
    if (!r.pass) ++failed;
  }
  return failed;
}
