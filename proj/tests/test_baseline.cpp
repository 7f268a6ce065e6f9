// Behavior of the two comparison machines: the nonvolatile-flip-flop model
// that freezes in place across outages, and the checkpoint-and-replay model
// whose replay can double-apply read-modify-write updates.

#include <catch2/catch_amalgamated.hpp>

#include <cospec/baseline.hpp>
#include <cospec/report.hpp>
#include <cospec/verify.hpp>

#include "oracles.hpp"

using namespace cospec;

namespace {

struct Fixture {
  Program prog;       // validated + finalized, as the baselines expect
  SimConfig cfg;
  Layout lay;
  GoldenState gold;

  explicit Fixture(const std::string& name, SimConfig c = SimConfig{})
      : prog(oracle::load_corpus(name)), cfg(c), lay{} {
    validate(prog, true);
    finalize(prog);
    lay = build_layout(prog, cfg);
    gold = run_reference(prog, lay, cfg);
  }

  uint32_t word(const NvmImage& img, const std::string& sym, uint32_t off = 0) const {
    return img.primary[lay.addr_of(sym, off) / kWordBytes];
  }

  template <class M>
  void check_golden(const M& m) const {
    std::string why;
    bool ok = states_match(m.nvm(), gold, observable_words(lay, cfg), why);
    INFO(why);
    CHECK(ok);
  }
};

}  // namespace

TEST_CASE("the flip-flop machine runs without any checkpoint overhead") {
  Fixture f("increment");
  NvffMachine m(f.prog, f.cfg, always_on());
  REQUIRE(m.run() == Outcome::halted);
  // load 1 + add 1 + store 3 + halt 1, no restore and no checkpoint
  CHECK(m.now() == 6);
  CHECK(m.instr_count() == 4);
  CHECK(m.outages() == 0);
  CHECK(f.word(m.nvm(), "i") == 1);
  f.check_golden(m);
}

TEST_CASE("the flip-flop machine freezes mid-stream and resumes in place") {
  Fixture f("increment");
  // the 3-cycle store does not fit the first window; it waits for the second
  std::vector<CycleWindow> win = {{0, 3}, {10, kNoCut}};
  NvffMachine m(f.prog, f.cfg, win);
  REQUIRE(m.run() == Outcome::halted);
  CHECK(m.now() == 14);  // store spans 10..13, halt retires at 14
  CHECK(m.instr_count() == 4);
  CHECK(m.outages() == 1);
  CHECK(f.word(m.nvm(), "i") == 1);
  f.check_golden(m);
}

TEST_CASE("the flip-flop machine never re-executes across chopped power") {
  Fixture f("loop_sum");

  NvffMachine clean(f.prog, f.cfg, always_on());
  REQUIRE(clean.run() == Outcome::halted);
  CHECK(clean.instr_count() == f.gold.instr_count);

  std::vector<CycleWindow> win;
  for (uint64_t k = 0; k < 200; k++) win.push_back({k * 250, k * 250 + 200});
  win.push_back({50000, kNoCut});
  NvffMachine m(f.prog, f.cfg, win);
  REQUIRE(m.run() == Outcome::halted);
  CHECK(m.outages() > 0);
  CHECK(m.instr_count() == f.gold.instr_count);  // paused, never rolled back
  f.check_golden(m);
}

TEST_CASE("a supply that dies for good strands the flip-flop machine") {
  Fixture f("increment");
  std::vector<CycleWindow> win = {{0, 3}};
  NvffMachine m(f.prog, f.cfg, win);
  CHECK(m.run() == Outcome::supply_exhausted);
  CHECK(f.word(m.nvm(), "i") == 0);  // the store never got power to finish
}

TEST_CASE("the checkpoint machine pays a full register spill per region") {
  Fixture f("increment");
  NaiveMachine m(f.prog, f.cfg, always_on());
  REQUIRE(m.run() == Outcome::halted);
  // restore 18, 17-word checkpoint at 3 cycles each, then the 4 instructions
  CHECK(m.now() == 75);
  CHECK(m.steps() == 22);  // 1 restore + 17 spill writes + 4 instructions
  CHECK(m.instr_count() == 4);
  CHECK(m.outages() == 0);
  CHECK(f.word(m.nvm(), "i") == 1);
  f.check_golden(m);
}

TEST_CASE("checkpoint replay double-applies an unguarded increment") {
  Fixture f("increment");

  // cut right after the store-through retires: the replay re-reads i = 1
  NaiveMachine bad(f.prog, f.cfg, always_on());
  bad.set_step_cut(21);
  REQUIRE(bad.run() == Outcome::step_cut);
  CHECK(f.word(bad.nvm(), "i") == 1);  // store-through already visible
  REQUIRE(bad.run() == Outcome::halted);
  CHECK(f.word(bad.nvm(), "i") == 2);  // incremented twice
  std::string why;
  CHECK_FALSE(states_match(bad.nvm(), f.gold, observable_words(f.lay, f.cfg), why));

  // one step earlier the store had not landed yet, so the replay is benign
  NaiveMachine ok(f.prog, f.cfg, always_on());
  ok.set_step_cut(20);
  REQUIRE(ok.run() == Outcome::step_cut);
  CHECK(f.word(ok.nvm(), "i") == 0);
  REQUIRE(ok.run() == Outcome::halted);
  CHECK(f.word(ok.nvm(), "i") == 1);
  f.check_golden(ok);
}

TEST_CASE("both baselines agree with the reference on clean runs") {
  for (const char* name :
       {"increment", "loop_sum", "dense_stores", "loop_call", "nested_calls", "war_loop"}) {
    INFO("program " << name);
    Fixture f(name);

    NvffMachine ff(f.prog, f.cfg, always_on());
    REQUIRE(ff.run() == Outcome::halted);
    CHECK(ff.instr_count() == f.gold.instr_count);
    f.check_golden(ff);

    NaiveMachine nv(f.prog, f.cfg, always_on());
    REQUIRE(nv.run() == Outcome::halted);
    f.check_golden(nv);
  }
}
