#include <doctest.h>

#include "secured/config.hpp"

using namespace secured;

TEST_CASE("parse a run configuration") {
  const RunConfig c = parse_run_config(
      "# comment\n"
      "secured-config 1\n"
      "mode = SECURED_M\n"
      "app1 = a.s\n"
      "app2 = /abs/b.s\n"
      "interrupt = 100 2 0x3044\n"
      "sigma = 0.5\n"
      "seed = 9\n"
      "leakage = hd\n"
      "trace = out.csv\n",
      "/base");
  CHECK(c.system.mode == Mode::SecuredM);
  CHECK(*c.apps[0] == "/base/a.s");
  CHECK(*c.apps[1] == "/abs/b.s");
  REQUIRE(c.system.interrupts.size() == 1);
  CHECK(c.system.interrupts[0].cycle == 100);
  CHECK(c.system.interrupts[0].core == 1);
  CHECK(c.system.interrupts[0].vector == 0x3044u);
  CHECK(c.system.leakage.sigma == 0.5);
  CHECK(c.system.leakage.seed == 9);
  CHECK(c.system.leakage.hamming_distance);
  CHECK(c.system.record_trace);
  CHECK(c.trace_path == "/base/out.csv");
}

TEST_CASE("configuration errors carry the line") {
  auto line_of = [](const char* text) {
    try {
      parse_run_config(text);
    } catch (const ConfigError& e) {
      return e.line;
    }
    return -1;
  };
  CHECK(line_of("mode = SECURED\n") == 1);
  CHECK(line_of("secured-config 1\nmode = FAST\n") == 2);
  CHECK(line_of("secured-config 1\n\nbogus = 1\n") == 3);
  CHECK(line_of("secured-config 1\ninterrupt = 1 3 0x10\n") == 2);
  CHECK(line_of("secured-config 1\nsigma = -2\n") == 2);
  CHECK(line_of("") == 0);
}

TEST_CASE("format and parse agree") {
  RunConfig c;
  c.system.mode = Mode::Secured;
  c.apps[0] = "/x/a.s";
  c.system.interrupts.push_back({7, 0, 0x200});
  c.system.leakage.gamma = 0.25;
  const RunConfig back = parse_run_config(format_run_config(c));
  CHECK(back.system.mode == Mode::Secured);
  CHECK(*back.apps[0] == "/x/a.s");
  CHECK_FALSE(back.apps[1]);
  CHECK(back.system.interrupts.size() == 1);
  CHECK(back.system.leakage.gamma == 0.25);
}
