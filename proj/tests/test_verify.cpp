// The failure-injection sweep itself: scenario counting, clean passes on the
// corpus, and a negative control proving the sweep catches real corruption.

#include <catch2/catch_amalgamated.hpp>

#include <cospec/verify.hpp>

#include "oracles.hpp"

using namespace cospec;

TEST_CASE("a cut after every step of a tiny program leaves state intact") {
  Program src = oracle::load_corpus("increment");
  SimConfig cfg;
  VerifyReport rep;
  verify_config(src, cfg, 1, rep);
  CHECK(rep.ok());
  CHECK(rep.mismatches == 0);
  CHECK(rep.first_failure.empty());
  // clean run + one cut per step: 1 boot + 5 instructions + 8 release ops
  CHECK(rep.ref_steps == 14);
  CHECK(rep.scenarios == 15);

  SECTION("the one-bit protocol saves its status-start step") {
    SimConfig one = cfg;
    one.protocol = Protocol::one_bit;
    VerifyReport r1;
    verify_config(src, one, 1, r1);
    CHECK(r1.ok());
    CHECK(r1.ref_steps == 13);
    CHECK(r1.scenarios == 14);
  }
}

TEST_CASE("depth two re-cuts inside every recovery window") {
  Program src = oracle::load_corpus("increment");
  SimConfig cfg;
  VerifyReport rep;
  verify_config(src, cfg, 2, rep);
  CHECK(rep.ok());
  // 1 clean + S single cuts + S * (sb_size + 8) double cuts, S = 14
  CHECK(rep.scenarios == 1 + 14 + 14 * (cfg.sb_size + 8));
}

TEST_CASE("the protocol/ilp/dma matrix holds at depth one") {
  SimConfig cfg;
  Program inc = oracle::load_corpus("increment");
  VerifyReport rep = verify_matrix(inc, cfg, 1);
  CHECK(rep.ok());
  // four two-bit configs at 14 steps, four one-bit configs at 13
  CHECK(rep.scenarios == 4 * 15 + 4 * 14);
  CHECK(rep.ref_steps == 13);  // the last swept variant is one-bit

  for (const char* name : {"war_loop", "loop_sum", "cond_war", "diamond"}) {
    INFO("program " << name);
    VerifyReport r = verify_matrix(oracle::load_corpus(name), cfg, 1);
    CHECK(r.ok());
    INFO(r.first_failure);
    CHECK(r.mismatches == 0);
  }
}

TEST_CASE("the armed-watchdog sweep commits mid-region without corruption") {
  SimConfig cfg;
  VerifyReport inc = verify_watchdog(oracle::load_corpus("increment"), cfg, 1);
  CHECK(inc.ok());
  // the program retires 5 cycles of work, far under the 256-cycle period,
  // so arming changes nothing about the step count
  CHECK(inc.scenarios == 15);

  // this one actually fires: the single region outlasts the period many times
  VerifyReport lr = verify_watchdog(oracle::load_corpus("long_region"), cfg, 1);
  CHECK(lr.ok());
  INFO(lr.first_failure);
  CHECK(lr.mismatches == 0);
  CHECK(lr.ref_steps > 700);  // fires add snapshot pushes on top of the instructions
}

TEST_CASE("a deliberately broken recovery is caught by the sweep") {
  SimConfig cfg;
  cfg.debug_skip_phase2_redo = true;

  VerifyReport inc;
  verify_config(oracle::load_corpus("increment"), cfg, 1, inc);
  CHECK_FALSE(inc.ok());
  CHECK(inc.mismatches > 0);
  CHECK_FALSE(inc.first_failure.empty());
  CHECK(inc.scenarios == 15);  // the sweep still covers everything

  VerifyReport war;
  verify_config(oracle::load_corpus("war_loop"), cfg, 1, war);
  CHECK(war.mismatches > 0);
}
