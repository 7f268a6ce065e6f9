// stagnation vs adaptive watchdog on short windows
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cospec/ir.hpp"
#include "cospec/machine.hpp"
#include "cospec/regionizer.hpp"

using namespace cospec;

static Program load(const char* path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  Program p = parse_program(ss.str());
  validate(p, true);
  return p;
}

static std::vector<CycleWindow> short_windows(int n, uint64_t on, uint64_t gap) {
  std::vector<CycleWindow> ws;
  uint64_t t = 0;
  for (int i = 0; i < n; i++) {
    ws.push_back({t, t + on});
    t += on + gap;
  }
  ws.push_back({t, kNoCut});
  return ws;
}

int main() {
  Program p = load("tests/corpus/long_region.ir");
  SimConfig cfg;

  {
    SimConfig c = cfg;
    c.arm_threshold = 1 << 30;  // never arm: expect stagnation
    CompiledProgram cp = compile_program(p, c);
    Machine m(cp, c, short_windows(30, 500, 100));
    Outcome o = m.run();
    std::printf("[no-watchdog] outcome=%s outages=%lld committed=%lld\n", outcome_name(o),
                (long long)m.outages(), (long long)m.committed_regions());
    int flat = 0;
    int64_t prev = -1;
    for (auto& e : m.events())
      if (e.type == "cut") {
        int64_t c2 = e.ints.at("committed");
        if (c2 == prev) flat++;
        prev = c2;
      }
    std::printf("[no-watchdog] flat-committed cuts=%d\n", flat);
  }

  {
    CompiledProgram cp = compile_program(p, cfg);
    Machine m(cp, cfg, short_windows(30, 500, 100));
    Outcome o = m.run();
    std::printf("[watchdog] outcome=%s outages=%lld committed=%lld fires=%lld\n",
                outcome_name(o), (long long)m.outages(), (long long)m.committed_regions(),
                (long long)m.watchdog_fires());
    int halves = 0;
    int64_t armed_period = -1;
    for (auto& e : m.events()) {
      if (e.type == "watchdog") {
        auto act = e.strs.at("action");
        if (act == "halve") halves++;
        if (act == "arm") armed_period = e.ints.at("period");
        std::printf("  wd %s period=%lld cycle=%lld\n", act.c_str(),
                    (long long)(e.ints.count("period") ? e.ints.at("period") : -1),
                    (long long)e.ints.at("cycle"));
      }
    }
    std::printf("[watchdog] halves=%d arm_period=%lld\n", halves, (long long)armed_period);
    // committed strictly increasing across cuts once period below the window
    int64_t prev = -1;
    bool strict = true, seen = false;
    int64_t period_now = 1 << 30;
    for (auto& e : m.events()) {
      if (e.type == "watchdog" && e.ints.count("period")) period_now = e.ints.at("period");
      if (e.type == "cut" && period_now < 500) {
        int64_t c2 = e.ints.at("committed");
        if (prev >= 0 && c2 <= prev) strict = false;
        prev = c2;
        seen = true;
      }
    }
    std::printf("[watchdog] strict-progress=%s (seen=%d)\n", strict ? "yes" : "NO", (int)seen);
  }
  return 0;
}
