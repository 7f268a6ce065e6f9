// Run reports, event serialization, and the independent energy recomputation.
//
// The meter accumulates energy online as things happen; recompute_energy
// rebuilds every bucket from nothing but the event stream's counts and the
// configured unit costs. The two must agree, which pins the event log as a
// complete record of where the joules went.

#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "baseline.hpp"
#include "config.hpp"
#include "machine.hpp"

namespace cospec {

using json = nlohmann::json;

inline json event_to_json(const Event& e) {
  json j;
  j["evt"] = e.type;
  for (auto& [k, v] : e.ints) j[k] = v;
  for (auto& [k, v] : e.strs) j[k] = v;
  return j;
}

inline void write_events_jsonl(const std::string& path, const std::vector<Event>& evs) {
  std::ofstream f(path);
  if (!f) throw SimError("cannot write " + path);
  for (const Event& e : evs) f << event_to_json(e).dump() << "\n";
}

// rebuild the ten buckets from event counts times unit costs
inline EnergyMeter recompute_energy(const std::vector<Event>& evs, const SimConfig& cfg) {
  EnergyMeter m;
  double cj = cfg.compute_j_per_cycle();
  int w = cfg.nvm_write_cycles;
  int r = cfg.nvm_read_cycles;
  for (const Event& e : evs) {
    if (e.type == "attempt") {
      m.bucket(e.strs.at("bucket")) +=
          (double)e.ints.at("busy_cycles") * cj + cfg.nvm_j((int)e.ints.at("nvm_cycles"));
      m.sb_search += (double)e.ints.at("searches") * cfg.search_j();
    } else if (e.type == "release") {
      double p1 = cfg.nvm_j(w) * (double)(e.ints.at("status_starts") + e.ints.at("p1_entries") +
                                          e.ints.at("count_writes") + e.ints.at("marks"));
      double p2 = cfg.nvm_j(r + w) * (double)e.ints.at("p2_entries") +
                  cfg.nvm_j(w) * (double)e.ints.at("commits");
      m.bucket(e.strs.at("bucket_p1")) += p1;
      m.bucket(e.strs.at("bucket_p2")) += p2;
    } else if (e.type == "recovery") {
      m.reexec += (double)e.ints.at("cycles") * cj +
                  cfg.nvm_j(r + w) * (double)e.ints.at("redo_copies") +
                  cfg.nvm_j(w) * (double)(e.ints.at("resets") + e.ints.at("commits")) +
                  cfg.nvm_j(r) * (double)e.ints.at("restore_reads");
    } else if (e.type == "wake") {
      m.sleep_wake += (double)e.ints.at("wake_cycles") * cj;
    }
  }
  return m;
}

inline json energy_json(const EnergyMeter& m) {
  json j;
  for (auto& [k, v] : m.as_map()) j[k] = v;
  j["total"] = m.total();
  return j;
}

// shortest-roundtrip decimal form, same as the json dumps; keeps every
// emitted number byte-stable across reruns
inline std::string num_str(double v) { return json(v).dump(); }

inline const std::array<const char*, 10>& energy_categories() {
  static const std::array<const char*, 10> names = {
      "phase1_success", "phase1_misspec", "phase2_success", "phase2_misspec",
      "compute_success", "compute_misspec", "noilp_compute", "reexec",
      "sleep_wake", "sb_search"};
  return names;
}

inline std::string energy_csv(const EnergyMeter& m) {
  EnergyMeter mm = m;  // bucket() is non-const
  std::string out = "category,joules\n";
  for (const char* name : energy_categories())
    out += std::string(name) + "," + num_str(mm.bucket(name)) + "\n";
  out += "total," + num_str(m.total()) + "\n";
  return out;
}

inline json machine_report(const Machine& m, Outcome o, const SimConfig& cfg) {
  json j;
  j["machine"] = "speculative";
  j["outcome"] = outcome_name(o);
  j["cycles"] = m.now();
  j["on_cycles"] = m.on_cycles();
  j["on_us"] = cfg.cycles_to_us((int64_t)m.on_cycles());
  j["completion_us"] = cfg.cycles_to_us((int64_t)m.now());
  j["instructions"] = m.instr_count();
  j["steps"] = m.steps();
  j["outages"] = m.outages();
  j["committed_regions"] = m.committed_regions();
  j["stall_cycles"] = m.stall_cycles();
  j["ilp_efficiency"] = m.ilp_efficiency();
  j["max_region_stores"] = m.max_dyn_region_stores();
  j["loads"] = m.dyn_loads();
  j["bypass_loads"] = m.dyn_bypass_loads();
  j["watchdog_fires"] = m.watchdog_fires();
  j["energy"] = energy_json(m.meter());
  return j;
}

inline json nvff_report(const NvffMachine& m, Outcome o, const SimConfig& cfg) {
  json j;
  j["machine"] = "nvff";
  j["outcome"] = outcome_name(o);
  j["cycles"] = m.now();
  j["on_cycles"] = m.on_cycles();
  j["on_us"] = cfg.cycles_to_us((int64_t)m.on_cycles());
  j["completion_us"] = cfg.cycles_to_us((int64_t)m.now());
  j["instructions"] = m.instr_count();
  j["outages"] = m.outages();
  j["energy"] = energy_json(m.meter());
  return j;
}

inline json naive_report(const NaiveMachine& m, Outcome o, const SimConfig& cfg) {
  json j;
  j["machine"] = "naive";
  j["outcome"] = outcome_name(o);
  j["cycles"] = m.now();
  j["on_cycles"] = m.on_cycles();
  j["on_us"] = cfg.cycles_to_us((int64_t)m.on_cycles());
  j["completion_us"] = cfg.cycles_to_us((int64_t)m.now());
  j["instructions"] = m.instr_count();
  j["outages"] = m.outages();
  j["energy"] = energy_json(m.meter());
  return j;
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw SimError("cannot write " + path);
  f << j.dump(2) << "\n";
}

}  // namespace cospec
