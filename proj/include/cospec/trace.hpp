#pragma once
// Supply-voltage traces and power gating.
//
// A trace is a piecewise-linear voltage over time.  The harvester front end
// turns it into RUN windows: the system wakes once the voltage has stayed at
// or above v_up for the whole wakeup delay (a dip restarts the wait) and
// runs until the voltage falls below v_down.  Window edges are solved
// exactly on the linear segments, so identical traces always yield
// identical windows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cospec {

struct TraceError : std::runtime_error {
  explicit TraceError(const std::string& m) : std::runtime_error(m) {}
};

struct PowerTrace {
  // (time_us, voltage_v), strictly increasing times; the last voltage
  // extends forever
  std::vector<std::pair<double, double>> pts;

  double v_at(double t) const {
    if (pts.empty()) throw TraceError("empty trace");
    if (t <= pts.front().first) return pts.front().second;
    if (t >= pts.back().first) return pts.back().second;
    size_t lo = 0, hi = pts.size() - 1;
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      (pts[mid].first <= t ? lo : hi) = mid;
    }
    auto [t0, v0] = pts[lo];
    auto [t1, v1] = pts[hi];
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
  }

  double end_us() const { return pts.empty() ? 0.0 : pts.back().first; }
};

inline PowerTrace load_trace_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto strip = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return std::string();
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  };
  if (!std::getline(in, line) || strip(line) != "time_us,voltage_v")
    throw TraceError("trace must start with header: time_us,voltage_v");
  PowerTrace tr;
  int lineno = 1;
  while (std::getline(in, line)) {
    lineno++;
    std::string s = strip(line);
    if (s.empty() || s[0] == '#') continue;
    size_t comma = s.find(',');
    if (comma == std::string::npos)
      throw TraceError("trace line " + std::to_string(lineno) + ": expected t,v");
    try {
      double t = std::stod(s.substr(0, comma));
      double v = std::stod(s.substr(comma + 1));
      if (!tr.pts.empty() && t <= tr.pts.back().first)
        throw TraceError("trace line " + std::to_string(lineno) +
                         ": times must strictly increase");
      tr.pts.push_back({t, v});
    } catch (const std::invalid_argument&) {
      throw TraceError("trace line " + std::to_string(lineno) + ": bad number");
    }
  }
  if (tr.pts.empty()) throw TraceError("trace has no samples");
  return tr;
}

inline std::string save_trace_text(const PowerTrace& tr) {
  std::ostringstream o;
  o << "time_us,voltage_v\n";
  char buf[64];
  for (auto& [t, v] : tr.pts) {
    snprintf(buf, sizeof buf, "%.3f,%.4f\n", t, v);
    o << buf;
  }
  return o.str();
}

// ---------------------------------------------------------------------------
// RUN windows

struct GateParams {
  double v_down = 0;      // running system dies below this
  double v_up = 0;        // wake threshold
  double sustain_us = 0;  // wakeup delay the supply must survive
};

struct Window {
  double on_us = 0;
  double off_us = 0;  // +inf when the supply never fails again
};

inline std::vector<Window> compute_windows(const PowerTrace& tr, const GateParams& g) {
  if (g.v_up < g.v_down) throw TraceError("v_up below v_down");
  const double inf = std::numeric_limits<double>::infinity();

  // breakpoints: sample times plus exact threshold crossings, then one far
  // virtual point so a trailing constant segment can finish a pending wake
  std::vector<double> bp;
  for (size_t i = 0; i + 1 < tr.pts.size(); i++) {
    auto [t0, v0] = tr.pts[i];
    auto [t1, v1] = tr.pts[i + 1];
    bp.push_back(t0);
    for (double level : {g.v_down, g.v_up}) {
      if ((v0 < level) == (v1 < level) || v0 == v1) continue;
      double tc = t0 + (level - v0) * (t1 - t0) / (v1 - v0);
      if (tc > t0 && tc < t1) bp.push_back(tc);
    }
  }
  bp.push_back(tr.end_us());
  bp.push_back(tr.end_us() + g.sustain_us + 1e15);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  std::vector<Window> out;
  bool on = false;
  double wake_start = -1, window_on = 0;
  for (size_t i = 0; i + 1 < bp.size(); i++) {
    double a = bp[i], b = bp[i + 1];
    double v = tr.v_at((a + b) / 2);  // predicates are constant per interval
    if (!on) {
      if (v >= g.v_up) {
        if (wake_start < 0) wake_start = a;
        if (wake_start + g.sustain_us <= b) {
          on = true;
          window_on = wake_start + g.sustain_us;
        }
      } else {
        wake_start = -1;  // dip aborted the wakeup
      }
    }
    if (on && v < g.v_down) {
      // can only happen at an interval start: v_up >= v_down
      out.push_back({window_on, a});
      on = false;
      wake_start = v >= g.v_up ? a : -1;
    }
  }
  if (on) out.push_back({window_on, inf});
  return out;
}

// ---------------------------------------------------------------------------
// synthetic harvester traces: a steady supply interrupted by exactly N dips

struct GenTraceParams {
  double duration_s = 30;
  int outages = 20;
  double mean_v = 3.5;
  double dip_v = 0.8;
  double ramp_us = 5000;   // down ramp and up ramp
  double hold_us = 2000;   // time spent at the bottom
  uint64_t seed = 1;
};

inline PowerTrace gen_trace(const GenTraceParams& gp) {
  if (gp.outages < 0) throw TraceError("negative outage count");
  double dur_us = gp.duration_s * 1e6;
  PowerTrace tr;
  tr.pts.push_back({0, gp.mean_v});
  if (gp.outages > 0) {
    double dip_total = 2 * gp.ramp_us + gp.hold_us;
    double slot = dur_us / gp.outages;
    const double margin = 1000;
    if (slot < dip_total + 2 * margin)
      throw TraceError("trace too short for requested outage count");
    std::mt19937_64 rng(gp.seed);
    for (int k = 0; k < gp.outages; k++) {
      uint64_t span = (uint64_t)(slot - dip_total - 2 * margin);
      double start = k * slot + margin + (span ? rng() % span : 0);
      tr.pts.push_back({start, gp.mean_v});
      tr.pts.push_back({start + gp.ramp_us, gp.dip_v});
      tr.pts.push_back({start + gp.ramp_us + gp.hold_us, gp.dip_v});
      tr.pts.push_back({start + dip_total, gp.mean_v});
    }
  }
  tr.pts.push_back({dur_us, gp.mean_v});
  return tr;
}

}  // namespace cospec
