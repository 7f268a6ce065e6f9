// verify matrix + watchdog sweep + mutation detectability + baselines
#include <cstdio>
#include <chrono>

#include "cospec/ir.hpp"
#include "cospec/verify.hpp"
#include "cospec/baseline.hpp"

using namespace cospec;

static const char* kLoopCall = R"(
fn main {
entry:
  mov r4, 10
  mov r2, 0
  mov r3, 0
  jump loop
loop:
  blt r2, r4, body
loopf:
  jump done
body:
  mov r0, r3
  mov r1, r2
  jump callb
callb:
  call add2
cont:
  mov r3, r0
  add r2, r2, 1
  store r2, idx, 0
  store r3, acc, 0
  jump loop
done:
  load r5, acc, 0
  store r5, out, 0
  halt
}
fn add2 {
entry:
  add r0, r0, r1
  store r0, scratch, 0
  ret
}
data idx = [0]
data acc = [0]
data scratch = [0]
)";

static const char* kIncrement = R"(
fn main {
entry:
  load r0, i, 0
  add r0, r0, 1
  store r0, i, 0
  halt
}
data i = [0]
)";

int main() {
  SimConfig cfg;
  Program p = parse_program(kLoopCall);
  validate(p, true);

  auto t0 = std::chrono::steady_clock::now();
  VerifyReport rep = verify_matrix(p, cfg, 1);
  auto t1 = std::chrono::steady_clock::now();
  std::printf("[matrix d1] scenarios=%lld mismatches=%lld steps=%lld (%.2fs) %s\n",
              (long long)rep.scenarios, (long long)rep.mismatches, (long long)rep.ref_steps,
              std::chrono::duration<double>(t1 - t0).count(),
              rep.ok() ? "OK" : rep.first_failure.c_str());

  VerifyReport wd = verify_watchdog(p, cfg, 1);
  std::printf("[watchdog d1] scenarios=%lld mismatches=%lld steps=%lld %s\n",
              (long long)wd.scenarios, (long long)wd.mismatches, (long long)wd.ref_steps,
              wd.ok() ? "OK" : wd.first_failure.c_str());

  // depth-2 on the default config only
  t0 = std::chrono::steady_clock::now();
  VerifyReport d2;
  verify_config(p, cfg, 2, d2);
  t1 = std::chrono::steady_clock::now();
  std::printf("[default d2] scenarios=%lld mismatches=%lld (%.2fs) %s\n",
              (long long)d2.scenarios, (long long)d2.mismatches,
              std::chrono::duration<double>(t1 - t0).count(),
              d2.ok() ? "OK" : d2.first_failure.c_str());

  // sabotaged recovery must be caught
  SimConfig bad = cfg;
  bad.debug_skip_phase2_redo = true;
  VerifyReport mrep;
  verify_config(p, bad, 1, mrep);
  std::printf("[mutation] mismatches=%lld (want > 0): %s\n", (long long)mrep.mismatches,
              mrep.mismatches > 0 ? "DETECTED" : "NOT DETECTED");

  // naive increment-twice artifact
  {
    Program ip = parse_program(kIncrement);
    validate(ip, true);
    Program fin = ip;
    finalize(fin);
    SimConfig c = cfg;
    // cut right after the store retires: steps = restore(1)+ckpt(17)+load+add+store = 21
    NaiveMachine nm(fin, c, always_on());
    nm.set_step_cut(21);
    Outcome o = nm.run();
    if (o == Outcome::step_cut) o = nm.run();
    Layout lay = build_layout(fin, c);
    uint32_t i_val = nm.nvm().read_word(lay.addr_of("i", 0));
    std::printf("[naive] outcome=%s i=%u (want 2)\n", outcome_name(o), i_val);

    // same cut point in the speculative machine leaves i == 1
    CompiledProgram icp = compile_program(ip, c);
    GoldenState ig = golden_of(ip, c);
    // find the analogous point: sweep all cuts; i must always end 1
    Machine probe(icp, c, always_on());
    probe.run();
    bool all_one = true;
    for (int64_t k = 1; k <= probe.steps(); k++) {
      Machine m(icp, c, always_on());
      m.set_step_cut(k);
      Outcome oo = m.run();
      if (oo == Outcome::step_cut) oo = m.run();
      uint32_t v = m.nvm().read_word(build_layout(icp.prog, c).addr_of("i", 0));
      if (oo != Outcome::halted || v != 1) { all_one = false; break; }
    }
    std::printf("[cospec] increment always ends i=1 under any single cut: %s\n",
                all_one ? "YES" : "NO");
    (void)ig;
  }

  // NVFF baseline across chopped windows: never re-executes, state matches golden
  {
    Program fin = p;
    validate(fin, true);
    finalize(fin);
    GoldenState g = golden_of(p, cfg);
    std::vector<CycleWindow> ws;
    for (uint64_t t = 0; t < 100000; t += 250) ws.push_back({t, t + 180});
    ws.push_back({100000, kNoCut});
    NvffMachine nv(fin, cfg, ws);
    Outcome o = nv.run();
    size_t obs = observable_words(build_layout(fin, cfg), cfg);
    std::string why;
    bool ok = states_match(nv.nvm(), g, obs, why);
    std::printf("[nvff] %s instrs=%lld (golden %llu) outages=%lld %s %s\n",
                outcome_name(o), (long long)nv.instr_count(),
                (unsigned long long)g.instr_count, (long long)nv.outages(),
                ok ? "MATCH" : "MISMATCH", why.c_str());
  }
  return 0;
}
