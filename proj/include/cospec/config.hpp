#pragma once
// Simulation configuration: key=value config files plus programmatic
// overrides. Values mirror the modeled MCU: 25 MHz in-order core, FRAM-like
// NVM (20 ns read / 120 ns write), 40-entry store buffer split in halves.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cospec {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Protocol { two_bit, one_bit };
enum class SearchScheme { seq, cam };

struct SimConfig {
  // store buffer / release
  int sb_size = 40;          // total entries; two halves of sb_size/2
  bool dma = false;          // DMA-assisted phase-2 copy
  int dma_factor = 4;        // per-entry copy speedup, integer ceiling
  bool ilp = true;           // overlap release with next region
  Protocol protocol = Protocol::two_bit;
  SearchScheme search = SearchScheme::seq;

  // timing
  int clock_mhz = 25;
  int nvm_read_cycles = 1;   // 20 ns fits inside one 40 ns cycle
  int nvm_write_cycles = 3;  // 120 ns
  int sb_commit_cycles = 1;
  int sb_search_cycles = 0;  // search hides inside the NVM access window

  // energy
  double compute_uw_per_mhz = 100.0;
  double nvm_access_mw = 2.0;
  double cam_search_nj = 0.02;
  double seq_search_nj = 0.01;  // roughly half of CAM per search at sb=40

  // supply thresholds (speculative machine)
  double v_on = 1.8;
  double v_off = 1.8;
  double sleep_us = 212.0;
  double wakeup_us = 310.0;

  // supply thresholds (non-speculative NVFF baseline)
  double nvp_v_on = 3.3;
  double nvp_v_off = 2.8;
  double nvp_ckpt_v = 3.1;
  double nvp_restore_v = 2.9;
  double nvp_sleep_us = 46.0;
  double nvp_wakeup_us = 14.0;

  // adaptive controller
  double watchdog_period_us = 5000.0;
  int watchdog_floor_cycles = 64;
  int progress_k = 10;        // failure-free regions before ILP returns
  int arm_threshold = 2;      // arm watchdog when same-region failures exceed this
  bool watchdog_armed_at_boot = false;

  // run limits / misc
  int64_t instr_budget = 10'000'000;
  int64_t max_outages = 1'000'000;
  int out_words = 64;          // size of the implicit output range
  uint64_t seed = 1;
  bool debug_skip_phase2_redo = false;  // negative-test hook: breaks recovery on purpose

  int sb_half() const { return sb_size / 2; }
  int store_threshold() const { return sb_size / 2; }
  double cycle_ns() const { return 1000.0 / clock_mhz; }
  double us_to_cycles(double us) const { return us * clock_mhz; }
  double cycles_to_us(int64_t cy) const { return (double)cy / clock_mhz; }
  double compute_w() const { return compute_uw_per_mhz * clock_mhz * 1e-6; }
  double compute_j_per_cycle() const { return compute_w() * cycle_ns() * 1e-9; }
  double nvm_j(int cycles) const { return nvm_access_mw * 1e-3 * cycles * cycle_ns() * 1e-9; }
  double search_j() const {
    return (search == SearchScheme::cam ? cam_search_nj : seq_search_nj) * 1e-9;
  }
  int dma_copy_cycles() const {
    int cpu = nvm_read_cycles + nvm_write_cycles;
    return dma ? (cpu + dma_factor - 1) / dma_factor : cpu;
  }
  int64_t watchdog_period_cycles() const {
    return (int64_t)std::llround(us_to_cycles(watchdog_period_us));
  }

  void set(const std::string& key, const std::string& raw);
  void validate() const;
};

namespace detail {
inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("bad boolean value '" + v + "'");
}
}  // namespace detail

inline void SimConfig::set(const std::string& key, const std::string& raw) {
  auto i = [&] { return std::stoll(raw); };
  auto d = [&] { return std::stod(raw); };
  auto b = [&] { return detail::parse_bool(raw); };
  try {
    if (key == "sb_size") sb_size = (int)i();
    else if (key == "dma") dma = b();
    else if (key == "dma_factor") dma_factor = (int)i();
    else if (key == "ilp") ilp = b();
    else if (key == "protocol") {
      if (raw == "two-bit") protocol = Protocol::two_bit;
      else if (raw == "one-bit") protocol = Protocol::one_bit;
      else throw ConfigError("protocol must be 'two-bit' or 'one-bit'");
    } else if (key == "search") {
      if (raw == "seq") search = SearchScheme::seq;
      else if (raw == "cam") search = SearchScheme::cam;
      else throw ConfigError("search must be 'seq' or 'cam'");
    } else if (key == "clock_mhz") clock_mhz = (int)i();
    else if (key == "nvm_read_cycles") nvm_read_cycles = (int)i();
    else if (key == "nvm_write_cycles") nvm_write_cycles = (int)i();
    else if (key == "sb_commit_cycles") sb_commit_cycles = (int)i();
    else if (key == "sb_search_cycles") sb_search_cycles = (int)i();
    else if (key == "compute_uw_per_mhz") compute_uw_per_mhz = d();
    else if (key == "nvm_access_mw") nvm_access_mw = d();
    else if (key == "cam_search_nj") cam_search_nj = d();
    else if (key == "seq_search_nj") seq_search_nj = d();
    else if (key == "v_on") v_on = d();
    else if (key == "v_off") v_off = d();
    else if (key == "sleep_us") sleep_us = d();
    else if (key == "wakeup_us") wakeup_us = d();
    else if (key == "nvp_v_on") nvp_v_on = d();
    else if (key == "nvp_v_off") nvp_v_off = d();
    else if (key == "nvp_ckpt_v") nvp_ckpt_v = d();
    else if (key == "nvp_restore_v") nvp_restore_v = d();
    else if (key == "nvp_sleep_us") nvp_sleep_us = d();
    else if (key == "nvp_wakeup_us") nvp_wakeup_us = d();
    else if (key == "watchdog_period_us") watchdog_period_us = d();
    else if (key == "watchdog_floor_cycles") watchdog_floor_cycles = (int)i();
    else if (key == "progress_k") progress_k = (int)i();
    else if (key == "arm_threshold") arm_threshold = (int)i();
    else if (key == "watchdog_armed_at_boot") watchdog_armed_at_boot = b();
    else if (key == "instr_budget") instr_budget = i();
    else if (key == "max_outages") max_outages = i();
    else if (key == "out_words") out_words = (int)i();
    else if (key == "seed") seed = (uint64_t)i();
    else if (key == "debug_skip_phase2_redo") debug_skip_phase2_redo = b();
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError("bad value '" + raw + "' for config key '" + key + "'");
  }
}

inline void SimConfig::validate() const {
  if (sb_size < 34)
    throw ConfigError("sb_size " + std::to_string(sb_size) +
                      " rejected: a half must hold a 17-entry register checkpoint (need >= 34)");
  if (sb_size % 2 != 0) throw ConfigError("sb_size must be even (two equal halves)");
  if (dma_factor < 1) throw ConfigError("dma_factor must be >= 1");
  if (clock_mhz <= 0) throw ConfigError("clock_mhz must be positive");
  if (nvm_read_cycles < 1 || nvm_write_cycles < 1 || sb_commit_cycles < 1)
    throw ConfigError("latencies must be >= 1 cycle");
  if (v_on < v_off) throw ConfigError("v_on must be >= v_off");
  if (watchdog_floor_cycles < 1) throw ConfigError("watchdog_floor_cycles must be >= 1");
  if (progress_k < 1) throw ConfigError("progress_k must be >= 1");
  if (arm_threshold < 0) throw ConfigError("arm_threshold must be >= 0");
  if (out_words < 1) throw ConfigError("out_words must be >= 1");
}

inline void load_config_text(SimConfig& cfg, const std::string& text, const char* origin) {
  std::istringstream in(text);
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ln++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto notspace = [](char c) { return !std::isspace((unsigned char)c); };
    auto b = std::find_if(line.begin(), line.end(), notspace);
    auto e = std::find_if(line.rbegin(), line.rend(), notspace).base();
    if (b >= e) continue;
    std::string stmt(b, e);
    auto eq = stmt.find('=');
    if (eq == std::string::npos)
      throw ConfigError(std::string(origin) + ":" + std::to_string(ln) + ": expected key=value");
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t");
      size_t z = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, z - a + 1);
    };
    std::string key = trim(stmt.substr(0, eq)), val = trim(stmt.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError(std::string(origin) + ":" + std::to_string(ln) + ": expected key=value");
    try {
      cfg.set(key, val);
    } catch (const ConfigError& ce) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(ln) + ": " + ce.what());
    }
  }
}

inline void load_config_file(SimConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  load_config_text(cfg, ss.str(), path.c_str());
}

}  // namespace cospec
