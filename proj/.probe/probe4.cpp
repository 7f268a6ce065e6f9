// machine vs reference interpreter: always-on, finite windows, injected cuts
#include <cstdio>
#include <string>

#include "cospec/ir.hpp"
#include "cospec/regionizer.hpp"
#include "cospec/machine.hpp"
#include "cospec/interp.hpp"

using namespace cospec;

static const char* kSrc = R"(
fn main {
entry:
  mov r2, 0          # i
  mov r3, 0          # acc
  jump loop
loop:
  blt r2, r4, body    # bound preset in r4
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

static Program parse_fixed() {
  // bound must live in r4 before the loop; patch source: load bound at entry
  std::string s(kSrc);
  auto pos = s.find("mov r2, 0");
  s.insert(pos, "mov r4, 10\n  ");
  return parse_program(s);
}

// observable state: user data + out range; __ret slots hold layout-dependent pcs
static size_t g_obs_words = 0;

static bool same(const NvmImage& m, const GoldenState& g, std::string& why) {
  for (size_t i = 0; i < g_obs_words; i++)
    if (m.primary[i] != g.primary[i]) {
      why = "primary differs at word " + std::to_string(i);
      return false;
    }
  if (m.outlog != g.outlog) {
    why = "outlog differs: got " + std::to_string(m.outlog.size()) + " want " +
          std::to_string(g.outlog.size());
    return false;
  }
  return true;
}

int main() {
  SimConfig cfg;
  Program p = parse_fixed();
  validate(p, true);

  Program ref = p;
  validate(ref, true);
  finalize(ref);
  Layout rlay = build_layout(ref, cfg);
  GoldenState g = run_reference(ref, rlay, cfg);
  std::printf("golden: %llu instrs, outlog %zu, acc=%d\n",
              (unsigned long long)g.instr_count, g.outlog.size(),
              (int)g.primary[rlay.addr_of("acc", 0) / 4]);

  CompiledProgram cp = compile_program(p, cfg);
  std::printf("compiled: %zu insns, %zu regions\n", cp.prog.code.size(), cp.regions.size());
  g_obs_words = rlay.addr_of("out", 0) / 4 + (size_t)cfg.out_words;

  // 1. always-on
  {
    Machine m(cp, cfg, always_on());
    Outcome o = m.run();
    std::string why;
    bool ok = same(m.nvm(), g, why);
    std::printf("[always-on] %s steps=%lld instrs=%lld commits=%lld stalls=%lld eff=%.3f %s %s\n",
                outcome_name(o), (long long)m.steps(), (long long)m.instr_count(),
                (long long)m.committed_regions(), (long long)m.stall_cycles(),
                m.ilp_efficiency(), ok ? "MATCH" : "MISMATCH", why.c_str());
    std::printf("  energy total %.6g nJ, buckets:", m.meter().total() * 1e9);
    for (auto& [k, v] : m.meter().as_map()) if (v > 0) std::printf(" %s=%.4g", k.c_str(), v * 1e9);
    std::printf("\n");
    // ilp off run for comparison
    SimConfig c2 = cfg; c2.ilp = false;
    Machine m2(cp, c2, always_on());
    m2.run();
    std::string w2; bool ok2 = same(m2.nvm(), g, w2);
    std::printf("[ilp-off]  cycles=%llu vs ilp-on %llu  %s\n",
                (unsigned long long)m2.now(), (unsigned long long)m.now(),
                ok2 ? "MATCH" : w2.c_str());
  }

  // 2. chopped windows: power every 300 cycles, 120-cycle gaps
  {
    std::vector<CycleWindow> ws;
    for (uint64_t t = 0; t < 2000000; t += 420) ws.push_back({t, t + 300});
    ws.push_back({2000000, kNoCut});
    Machine m(cp, cfg, ws);
    Outcome o = m.run();
    std::string why;
    bool ok = same(m.nvm(), g, why);
    std::printf("[chopped]  %s outages=%lld commits=%lld wd_fires=%lld %s %s\n",
                outcome_name(o), (long long)m.outages(), (long long)m.committed_regions(),
                (long long)m.watchdog_fires(), ok ? "MATCH" : "MISMATCH", why.c_str());
  }

  // 3. injected step cuts at every K for a shortened run (exhaustive-lite)
  {
    Machine probe(cp, cfg, always_on());
    Outcome po = probe.run();
    int64_t S = probe.steps();
    if (po != Outcome::halted) { std::printf("probe run did not halt\n"); return 1; }
    int bad = 0;
    for (int64_t k = 1; k <= S; k++) {
      Machine m(cp, cfg, always_on());
      m.set_step_cut(k);
      Outcome o = m.run();
      if (o == Outcome::halted) {
        // cut target beyond natural halt; fine
      } else if (o == Outcome::step_cut) {
        o = m.run();  // recover and finish
        if (o != Outcome::halted) { std::printf("k=%lld second run: %s\n", (long long)k, outcome_name(o)); bad++; continue; }
      } else { std::printf("k=%lld first run: %s\n", (long long)k, outcome_name(o)); bad++; continue; }
      std::string why;
      if (!same(m.nvm(), g, why)) {
        std::printf("k=%lld MISMATCH %s\n", (long long)k, why.c_str());
        bad++;
        if (bad > 5) break;
      }
    }
    std::printf("[inject singles] S=%lld bad=%d\n", (long long)S, bad);
  }
  return 0;
}
