// Exhaustive failure-injection verifier.
//
// Ground truth comes from the plain interpreter on the uncompiled program.
// The sweep then runs the speculative machine with a power cut injected after
// every global micro-step (instruction retires, release ops, recovery ops,
// watchdog commits), recovers, runs to completion and compares the observable
// NVM state: user data words, the out range, and the output log. Return-slot
// words hold code-layout-dependent pcs and are excluded on purpose.
//
// Depth 2 re-cuts inside the recovery triggered by the first cut, step by
// step, to cover failures during redo and restore.

#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "interp.hpp"
#include "machine.hpp"
#include "regionizer.hpp"

namespace cospec {

struct VerifyReport {
  int64_t scenarios = 0;
  int64_t mismatches = 0;
  int64_t ref_steps = 0;     // steps of the clean run (last variant verified)
  std::string first_failure;

  bool ok() const { return mismatches == 0 && scenarios > 0; }
  void fail(const std::string& why) {
    mismatches++;
    if (first_failure.empty()) first_failure = why;
  }
};

// words of primary memory that are program-observable: user data + out range
inline size_t observable_words(const Layout& lay, const SimConfig& cfg) {
  return lay.addr_of("out", 0) / kWordBytes + (size_t)cfg.out_words;
}

inline bool states_match(const NvmImage& m, const GoldenState& g, size_t obs_words,
                         std::string& why) {
  for (size_t i = 0; i < obs_words; i++)
    if (m.primary[i] != g.primary[i]) {
      why = "primary word " + std::to_string(i) + ": got " +
            std::to_string(m.primary[i]) + " want " + std::to_string(g.primary[i]);
      return false;
    }
  if (m.outlog != g.outlog) {
    why = "outlog: got " + std::to_string(m.outlog.size()) + " entries, want " +
          std::to_string(g.outlog.size());
    if (m.outlog.size() == g.outlog.size())
      for (size_t i = 0; i < m.outlog.size(); i++)
        if (m.outlog[i] != g.outlog[i]) {
          why = "outlog entry " + std::to_string(i) + ": got " +
                std::to_string(m.outlog[i]) + " want " + std::to_string(g.outlog[i]);
          break;
        }
    return false;
  }
  return true;
}

namespace detail {

// one injection scenario: cut at each target step in order, then finish
inline bool run_scenario(const CompiledProgram& cp, const SimConfig& cfg,
                         const GoldenState& g, size_t obs, const std::vector<int64_t>& cuts,
                         std::string& why) {
  Machine m(cp, cfg, always_on());
  Outcome o = Outcome::step_cut;
  for (int64_t target : cuts) {
    m.set_step_cut(target);
    o = m.run();
    if (o == Outcome::halted) break;  // finished before this cut could land
    if (o != Outcome::step_cut) {
      why = std::string("run stopped: ") + outcome_name(o);
      return false;
    }
  }
  if (o != Outcome::halted) {
    o = m.run();
    if (o != Outcome::halted) {
      why = std::string("final run stopped: ") + outcome_name(o);
      return false;
    }
  }
  return states_match(m.nvm(), g, obs, why);
}

}  // namespace detail

// golden state for a source program under a given config
inline GoldenState golden_of(const Program& src, const SimConfig& cfg) {
  Program ref = src;
  validate(ref, true);
  finalize(ref);
  return run_reference(ref, build_layout(ref, cfg), cfg);
}

// sweeps one configuration. depth 1: a cut after every step of the clean run.
// depth 2: additionally, for every first cut, a second cut at each of the
// following recovery_window steps, which spans the longest possible recovery
// tail (proxy redo + commit + restore) plus the first resumed steps.
inline void verify_config(const Program& src, const SimConfig& cfg, int depth,
                          VerifyReport& rep) {
  GoldenState g = golden_of(src, cfg);
  CompiledProgram cp = compile_program(src, cfg);
  size_t obs = observable_words(build_layout(cp.prog, cfg), cfg);

  // clean run first: the machine must halt and match without any injection
  std::string why;
  rep.scenarios++;
  if (!detail::run_scenario(cp, cfg, g, obs, {}, why))
    rep.fail("clean run: " + why);

  Machine probe(cp, cfg, always_on());
  if (probe.run() != Outcome::halted) {
    rep.fail("probe run did not halt");
    return;
  }
  int64_t S = probe.steps();
  rep.ref_steps = S;

  for (int64_t k = 1; k <= S; k++) {
    rep.scenarios++;
    if (!detail::run_scenario(cp, cfg, g, obs, {k}, why))
      rep.fail("cut@" + std::to_string(k) + ": " + why);
  }
  if (depth >= 2) {
    int64_t window = cfg.sb_size + 8;
    for (int64_t k = 1; k <= S; k++) {
      for (int64_t j = 1; j <= window; j++) {
        rep.scenarios++;
        if (!detail::run_scenario(cp, cfg, g, obs, {k, k + j}, why))
          rep.fail("cut@" + std::to_string(k) + "+" + std::to_string(j) + ": " + why);
      }
    }
  }
}

// the full matrix: both protocols, ilp on/off, dma on/off
inline VerifyReport verify_matrix(const Program& src, const SimConfig& base, int depth) {
  VerifyReport rep;
  for (Protocol proto : {Protocol::two_bit, Protocol::one_bit})
    for (bool ilp : {true, false})
      for (bool dma : {false, true}) {
        SimConfig cfg = base;
        cfg.protocol = proto;
        cfg.ilp = ilp;
        cfg.dma = dma;
        verify_config(src, cfg, depth, rep);
        if (!rep.first_failure.empty() && rep.mismatches > 64) return rep;  // enough evidence
      }
  return rep;
}

// watchdog-heavy variant: armed from boot with a tiny period so the sweep
// exercises mid-region snapshot commits and their recovery paths
inline VerifyReport verify_watchdog(const Program& src, const SimConfig& base, int depth) {
  SimConfig cfg = base;
  cfg.watchdog_armed_at_boot = true;
  cfg.watchdog_period_us = 256.0 / cfg.clock_mhz;  // 256 cycles
  VerifyReport rep;
  verify_config(src, cfg, depth, rep);
  return rep;
}

}  // namespace cospec
