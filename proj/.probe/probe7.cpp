// full acceptance-gate cost: verify matrix at depth 2 across the corpus
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cospec/ir.hpp"
#include "cospec/verify.hpp"

using namespace cospec;

static Program load(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  Program p = parse_program(ss.str());
  validate(p, true);
  return p;
}

int main() {
  const char* names[] = {"increment", "loop_sum",     "loop_call",  "war_loop",
                         "nested_calls", "dense_stores", "diamond",    "bypass_bench",
                         "memcpy_like",  "cond_war",     "selfloop",   "two_fn_args"};
  SimConfig cfg;
  double total = 0;
  long long sc = 0, mm = 0;
  for (const char* n : names) {
    Program p = load(std::string("tests/corpus/") + n + ".ir");
    auto t0 = std::chrono::steady_clock::now();
    VerifyReport r = verify_matrix(p, cfg, 2);
    VerifyReport w = verify_watchdog(p, cfg, 2);
    auto t1 = std::chrono::steady_clock::now();
    double dt = std::chrono::duration<double>(t1 - t0).count();
    total += dt;
    sc += r.scenarios + w.scenarios;
    mm += r.mismatches + w.mismatches;
    std::printf("%-14s %9lld scenarios %2lld mismatches %6.2fs\n", n,
                (long long)(r.scenarios + w.scenarios), (long long)(r.mismatches + w.mismatches),
                dt);
    if (!r.ok()) std::printf("  FIRST: %s\n", r.first_failure.c_str());
    if (!w.ok()) std::printf("  FIRST(wd): %s\n", w.first_failure.c_str());
  }
  std::printf("TOTAL %lld scenarios %lld mismatches %.1fs\n", sc, mm, total);
  return mm == 0 ? 0 : 1;
}
