// Command-line front end. dispatch() is the real entry point so tests can
// drive the tool in-process; the binary's main() just forwards argv.
//
// Exit codes: 0 success / verified, 1 usage or input error,
// 2 a correctness counterexample was found (verify mismatch, --check
// mismatch, or a consistency assertion firing inside the model).

#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "baseline.hpp"
#include "config.hpp"
#include "interp.hpp"
#include "ir.hpp"
#include "machine.hpp"
#include "nvm.hpp"
#include "regionizer.hpp"
#include "report.hpp"
#include "trace.hpp"
#include "verify.hpp"

namespace cospec {

namespace detail {

inline std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void spew(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
}

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;   // key=value overrides, applied after the file
  std::vector<std::string> named;  // sugar flags, applied last

  SimConfig build() const {
    SimConfig cfg;
    if (!config_file.empty()) load_config_file(cfg, config_file);
    auto apply = [&](const std::string& kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key=value, got " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    };
    for (const std::string& kv : sets) apply(kv);
    for (const std::string& kv : named) apply(kv);
    cfg.validate();
    return cfg;
  }
};

inline void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_file, "config file of key = value lines");
  cmd->add_option("--set", c.sets, "override a config key, e.g. --set sb_size=36")
      ->take_all();
  auto push = [&c](const std::string& key) {
    return [&c, key](const std::string& v) { c.named.push_back(key + "=" + v); };
  };
  cmd->add_option_function<std::string>("--sb-size", push("sb_size"), "store buffer entries");
  cmd->add_option_function<std::string>("--dma", push("dma"), "DMA phase-2 copy on/off");
  cmd->add_option_function<std::string>("--ilp", push("ilp"), "release/execute overlap on/off");
  cmd->add_option_function<std::string>("--search", push("search"), "SB search: seq or cam");
  cmd->add_option_function<std::string>("--protocol", push("protocol"),
                                        "release protocol: two-bit or one-bit");
  cmd->add_option_function<std::string>("--seed", push("seed"), "rng seed recorded in reports");
}

inline Program load_program(const std::string& path) {
  Program p = parse_program(slurp(path));
  validate(p, true);
  return p;
}

// power windows for a machine family; no trace means always powered
inline std::vector<CycleWindow> windows_for(const std::string& trace_path, bool nvff,
                                            const SimConfig& cfg) {
  if (trace_path.empty()) return always_on();
  PowerTrace t = load_trace_text(slurp(trace_path));
  // the nvff machine checkpoints (and stops issuing) once supply falls to its
  // checkpoint threshold, so that is its effective gate-down voltage
  GateParams gp = nvff ? GateParams{cfg.nvp_ckpt_v, cfg.nvp_v_on, cfg.nvp_wakeup_us}
                       : GateParams{cfg.v_off, cfg.v_on, cfg.wakeup_us};
  return to_cycle_windows(compute_windows(t, gp), cfg);
}

inline json regions_json(const CompiledProgram& cp, const SimConfig& cfg) {
  json j;
  j["store_budget"] = cfg.store_threshold();
  j["static_loads"] = cp.static_loads;
  j["static_bypass_loads"] = cp.static_bypass_loads;
  j["regions"] = json::array();
  for (const RegionInfo& r : cp.regions) {
    json rj;
    rj["id"] = r.id;
    rj["fn"] = r.fn_name;
    rj["header"] = r.header;
    rj["entry_pc"] = r.entry_pc;
    rj["blocks"] = r.blocks;
    rj["max_path_stores"] = r.max_path_stores;
    rj["checkpoint_insns"] = r.ckpt_insns;
    j["regions"].push_back(rj);
  }
  return j;
}

inline int cmd_compile(const std::string& in, const std::string& out,
                       const std::string& regions_path, bool annotate,
                       const CommonOpts& copts) {
  SimConfig cfg = copts.build();
  Program p = load_program(in);
  CompiledProgram cp = compile_program(p, cfg);
  std::string text = print_program(cp.prog, annotate);
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else spew(out, text);
  if (!regions_path.empty()) write_json(regions_path, regions_json(cp, cfg));
  int worst = 0;
  for (auto& r : cp.regions) worst = std::max(worst, r.max_path_stores);
  std::fprintf(stderr,
               "compiled: %zu regions, worst-case %d stores (budget %d), %d/%d loads bypass\n",
               cp.regions.size(), worst, cfg.store_threshold(), cp.static_bypass_loads,
               cp.static_loads);
  return 0;
}

// check only a halted machine; mid-flight state is legitimately unsettled
template <class M>
inline int apply_check(json& rep, const M& m, Outcome o, const Program& src,
                       const Layout& lay, const SimConfig& cfg) {
  if (o != Outcome::halted) {
    rep["check"] = "skipped: run did not halt";
    return 0;
  }
  GoldenState g = golden_of(src, cfg);
  std::string why;
  bool ok = states_match(m.nvm(), g, observable_words(lay, cfg), why);
  rep["check"] = ok ? "match" : why;
  if (!ok) std::fprintf(stderr, "state check failed: %s\n", why.c_str());
  return ok ? 0 : 2;
}

inline int cmd_run(const std::string& in, const std::string& trace, const std::string& machine,
                   const std::string& report_path, const std::string& events_path,
                   const std::string& energy_path, const std::string& snapshot_path, bool check,
                   const CommonOpts& copts) {
  SimConfig cfg = copts.build();
  Program p = load_program(in);
  json rep;
  int rc = 0;

  if (machine == "nvff" || machine == "naive") {
    Program fin = p;
    finalize(fin);
    Layout lay = build_layout(fin, cfg);
    if (machine == "nvff") {
      NvffMachine m(fin, cfg, windows_for(trace, true, cfg));
      Outcome o = m.run();
      rep = nvff_report(m, o, cfg);
      if (!energy_path.empty()) spew(energy_path, energy_csv(m.meter()));
      if (!snapshot_path.empty()) dump_snapshot(m.nvm(), snapshot_path);
      if (check) rc = apply_check(rep, m, o, p, lay, cfg);
    } else {
      NaiveMachine m(fin, cfg, windows_for(trace, false, cfg));
      Outcome o = m.run();
      rep = naive_report(m, o, cfg);
      if (!energy_path.empty()) spew(energy_path, energy_csv(m.meter()));
      if (!snapshot_path.empty()) dump_snapshot(m.nvm(), snapshot_path);
      if (check) rc = apply_check(rep, m, o, p, lay, cfg);
    }
  } else {
    CompiledProgram cp = compile_program(p, cfg);
    Machine m(cp, cfg, windows_for(trace, false, cfg));
    Outcome o = m.run();
    rep = machine_report(m, o, cfg);
    if (!events_path.empty()) write_events_jsonl(events_path, m.events());
    if (!energy_path.empty()) spew(energy_path, energy_csv(m.meter()));
    if (!snapshot_path.empty()) dump_snapshot(m.nvm(), snapshot_path);
    if (check) rc = apply_check(rep, m, o, p, build_layout(cp.prog, cfg), cfg);
  }
  rep["seed"] = cfg.seed;
  if (!report_path.empty()) write_json(report_path, rep);
  std::printf("%s\n", rep.dump(2).c_str());
  return rc;
}

inline int cmd_verify(const std::string& in, int depth, bool matrix, bool watchdog,
                      const std::string& report_path, const CommonOpts& copts) {
  SimConfig cfg = copts.build();
  Program p = load_program(in);
  VerifyReport rep;
  if (matrix) rep = verify_matrix(p, cfg, depth);
  else verify_config(p, cfg, depth, rep);
  if (watchdog) {
    VerifyReport w = verify_watchdog(p, cfg, depth);
    rep.scenarios += w.scenarios;
    rep.mismatches += w.mismatches;
    if (rep.first_failure.empty()) rep.first_failure = w.first_failure;
  }
  if (!report_path.empty()) {
    json j;
    j["program"] = in;
    j["scenarios"] = rep.scenarios;
    j["mismatches"] = rep.mismatches;
    j["first_failure"] = rep.first_failure;
    write_json(report_path, j);
  }
  std::printf("verify: %lld scenarios, %lld mismatches\n", (long long)rep.scenarios,
              (long long)rep.mismatches);
  if (!rep.ok()) {
    std::printf("first failure: %s\n", rep.first_failure.c_str());
    return 2;
  }
  return 0;
}

inline int cmd_compare(const std::string& in, const std::string& trace,
                       const std::string& report_path, const std::string& csv_path,
                       const CommonOpts& copts) {
  SimConfig cfg = copts.build();
  Program p = load_program(in);

  CompiledProgram cp = compile_program(p, cfg);
  Machine spec(cp, cfg, windows_for(trace, false, cfg));
  Outcome so = spec.run();

  Program fin = p;
  finalize(fin);
  NvffMachine nv(fin, cfg, windows_for(trace, true, cfg));
  Outcome no = nv.run();

  PowerTrace t = load_trace_text(slurp(trace));
  json j;
  j["trace_us"] = t.end_us();
  j["speculative"] = machine_report(spec, so, cfg);
  j["nvff"] = nvff_report(nv, no, cfg);
  j["speculative"]["on_fraction"] =
      cfg.cycles_to_us((int64_t)spec.on_cycles()) / t.end_us();
  j["nvff"]["on_fraction"] = cfg.cycles_to_us((int64_t)nv.on_cycles()) / t.end_us();

  int rc = 0;
  rc = std::max(rc, apply_check(j["speculative"], spec, so, p, build_layout(cp.prog, cfg), cfg));
  rc = std::max(rc, apply_check(j["nvff"], nv, no, p, build_layout(fin, cfg), cfg));

  std::string csv = "mode,on_us,off_us,completion_us\n";
  auto row = [&](const char* mode, const json& r) {
    double comp = r["completion_us"].get<double>();
    double on = r["on_us"].get<double>();
    csv += std::string(mode) + "," + num_str(on) + "," + num_str(comp - on) + "," +
           num_str(comp) + "\n";
  };
  row("speculative", j["speculative"]);
  row("nvff", j["nvff"]);
  if (!csv_path.empty()) spew(csv_path, csv);
  if (!report_path.empty()) write_json(report_path, j);
  std::printf("%s\n", j.dump(2).c_str());
  return rc;
}

inline int cmd_gen_trace(const std::string& out, double duration_s, int outages, double mean_v,
                         double dip_v, uint64_t seed) {
  GenTraceParams gp;
  gp.duration_s = duration_s;
  gp.outages = outages;
  gp.mean_v = mean_v;
  gp.dip_v = dip_v;
  gp.seed = seed;
  PowerTrace t = gen_trace(gp);
  spew(out, save_trace_text(t));
  std::printf("wrote %s: %.1f s, %d dips, seed %llu\n", out.c_str(), duration_s, outages,
              (unsigned long long)seed);
  return 0;
}

}  // namespace detail

inline int dispatch(std::vector<std::string> args) {
  CLI::App app{"speculative intermittent computing toolchain"};
  app.require_subcommand(1);

  detail::CommonOpts copts;
  std::string in, out, trace, report_path, events_path, energy_path, snapshot_path,
      regions_path, csv_path;

  auto* compile = app.add_subcommand("compile", "regionize a program and print it");
  bool annotate = false;
  compile->add_option("input", in)->required();
  compile->add_option("-o,--output", out, "write the compiled program here");
  compile->add_option("--regions", regions_path, "write a json region summary");
  compile->add_flag("--annotate", annotate, "mark region boundaries in the listing");
  detail::add_common(compile, copts);

  auto* run = app.add_subcommand("run", "simulate a program");
  bool check = false, naive = false, nvff = false;
  run->add_option("input", in)->required();
  run->add_option("--trace", trace, "supply voltage trace csv");
  run->add_flag("--naive", naive, "naive checkpoint baseline instead");
  run->add_flag("--nvff", nvff, "nonvolatile flip-flop baseline instead");
  run->add_flag("--check", check, "compare final state against the reference interpreter");
  run->add_option("--report", report_path, "write a json run report");
  run->add_option("--events", events_path, "write the event log as json lines");
  run->add_option("--energy-csv", energy_path, "write the energy breakdown as csv");
  run->add_option("--snapshot", snapshot_path, "write the final NVM image");
  detail::add_common(run, copts);

  auto* verify = app.add_subcommand("verify", "failure-injection sweep");
  int depth = 1;
  bool matrix = false, watchdog = false;
  verify->add_option("input", in)->required();
  verify->add_option("--depth", depth, "1: single cuts, 2: also re-cut during recovery");
  verify->add_flag("--matrix", matrix, "sweep both protocols x ilp x dma");
  verify->add_flag("--watchdog", watchdog, "also sweep with the watchdog armed from boot");
  verify->add_option("--report", report_path, "write a json verification report");
  detail::add_common(verify, copts);

  auto* compare = app.add_subcommand("compare", "speculative vs nvff on one trace");
  compare->add_option("input", in)->required();
  compare->add_option("--trace", trace, "supply voltage trace csv")->required();
  compare->add_option("--report", report_path, "write a json comparison report");
  compare->add_option("--csv", csv_path, "write the per-mode time split as csv");
  detail::add_common(compare, copts);

  auto* gen = app.add_subcommand("gen-trace", "synthesize a harvested-supply trace");
  double duration_s = 30.0, mean_v = 3.5, dip_v = 0.8;
  int outages = 20;
  uint64_t seed = 1;
  gen->add_option("-o,--output", out)->required();
  gen->add_option("--duration-s", duration_s);
  gen->add_option("--outages", outages);
  gen->add_option("--mean-v", mean_v);
  gen->add_option("--dip-v", dip_v);
  gen->add_option("--seed", seed);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (compile->parsed())
      return detail::cmd_compile(in, out, regions_path, annotate, copts);
    if (run->parsed()) {
      if (naive && nvff) throw ConfigError("--naive and --nvff are exclusive");
      std::string machine = naive ? "naive" : nvff ? "nvff" : "speculative";
      return detail::cmd_run(in, trace, machine, report_path, events_path, energy_path,
                             snapshot_path, check, copts);
    }
    if (verify->parsed())
      return detail::cmd_verify(in, depth, matrix, watchdog, report_path, copts);
    if (compare->parsed())
      return detail::cmd_compare(in, trace, report_path, csv_path, copts);
    if (gen->parsed())
      return detail::cmd_gen_trace(out, duration_s, outages, mean_v, dip_v, seed);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ValidateError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const TraceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const SimError& e) {
    // a consistency assertion inside the model is a found counterexample
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

}  // namespace cospec
