// Cycle-accurate simulator for the speculative intermittent machine.
//
// Stores commit into the filling half of a split store buffer; at each region
// boundary the filled half is released to NVM through the failure-atomic
// two-phase protocol while (speculation on) the next region already executes.
// Power failures discard everything volatile; recovery replays the protocol's
// unfinished tail and resumes from the last committed register checkpoint.
//
// The machine advances a global cycle clock aligned with the supply trace.
// Release micro-ops carry absolute completion times, so a power cut simply
// keeps the ops that finished before the lights went out.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "interp.hpp"
#include "nvm.hpp"
#include "regionizer.hpp"
#include "trace.hpp"

namespace cospec {

// supply windows in cycles; off == kNoCut means never
constexpr uint64_t kNoCut = UINT64_MAX;

struct CycleWindow {
  uint64_t on = 0;
  uint64_t off = kNoCut;
};

inline std::vector<CycleWindow> to_cycle_windows(const std::vector<Window>& ws,
                                                 const SimConfig& cfg) {
  std::vector<CycleWindow> out;
  for (auto& w : ws) {
    CycleWindow cw;
    cw.on = (uint64_t)std::llround(cfg.us_to_cycles(w.on_us));
    cw.off = std::isinf(w.off_us) ? kNoCut
                                  : (uint64_t)std::llround(cfg.us_to_cycles(w.off_us));
    if (cw.off > cw.on) out.push_back(cw);
  }
  return out;
}

inline std::vector<CycleWindow> always_on() { return {{0, kNoCut}}; }

// ---------------------------------------------------------------------------
// Energy meter: ten buckets. Compute energy is charged for every powered
// cycle (execution, stalls, synchronous drains, recovery); NVM energy rides
// on the op that touched it. Work is tentative until its release commits:
// a committed speculative region lands in *_success, work thrown away by a
// failure in *_misspec, non-speculative committed work in noilp_compute, and
// everything spent redoing or recovering in reexec.

struct EnergyMeter {
  double phase1_success = 0, phase1_misspec = 0;
  double phase2_success = 0, phase2_misspec = 0;
  double compute_success = 0, compute_misspec = 0;
  double noilp_compute = 0;
  double reexec = 0;
  double sleep_wake = 0;
  double sb_search = 0;

  double total() const {
    return phase1_success + phase1_misspec + phase2_success + phase2_misspec +
           compute_success + compute_misspec + noilp_compute + reexec +
           sleep_wake + sb_search;
  }
  std::map<std::string, double> as_map() const {
    return {{"phase1_success", phase1_success}, {"phase1_misspec", phase1_misspec},
            {"phase2_success", phase2_success}, {"phase2_misspec", phase2_misspec},
            {"compute_success", compute_success}, {"compute_misspec", compute_misspec},
            {"noilp_compute", noilp_compute},     {"reexec", reexec},
            {"sleep_wake", sleep_wake},           {"sb_search", sb_search}};
  }
  double& bucket(const std::string& name) {
    if (name == "phase1_success") return phase1_success;
    if (name == "phase1_misspec") return phase1_misspec;
    if (name == "phase2_success") return phase2_success;
    if (name == "phase2_misspec") return phase2_misspec;
    if (name == "compute_success") return compute_success;
    if (name == "compute_misspec") return compute_misspec;
    if (name == "noilp_compute") return noilp_compute;
    if (name == "reexec") return reexec;
    if (name == "sleep_wake") return sleep_wake;
    if (name == "sb_search") return sb_search;
    throw SimError("unknown energy bucket " + name);
  }
};

// flat typed event record; serialized as one json object per line
struct Event {
  std::string type;
  std::map<std::string, int64_t> ints;
  std::map<std::string, std::string> strs;
};

enum class Outcome { halted, supply_exhausted, step_cut, budget_exhausted };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::halted: return "halted";
    case Outcome::supply_exhausted: return "supply_exhausted";
    case Outcome::step_cut: return "step_cut";
    default: return "budget_exhausted";
  }
}

class Machine {
 public:
  Machine(const CompiledProgram& cp, const SimConfig& cfg, std::vector<CycleWindow> windows)
      : cp_(cp), cfg_(cfg), lay_(build_layout(cp.prog, cfg)),
        nvm_(NvmImage::create(cp.prog, lay_, cfg)), windows_(std::move(windows)) {
    if (cp_.prog.code.empty()) throw SimError("empty program");
    ilp_on_ = cfg_.ilp;
    armed_ = cfg_.watchdog_armed_at_boot;
    if (armed_) ilp_on_ = false;  // the controller never speculates while armed
    period_ = cfg_.watchdog_period_cycles();
    halves_[0].reserve(cfg_.sb_half());
    halves_[1].reserve(cfg_.sb_half());
  }

  // run until halt, supply exhaustion, the step-cut target, or the
  // instruction budget. After step_cut the machine sits powered-off; calling
  // run() again recovers and continues inside the same window.
  Outcome run() {
    while (true) {
      if (halted_) return Outcome::halted;
      if (budget_hit_) return Outcome::budget_exhausted;
      if (stepcut_hit_) { stepcut_hit_ = false; return Outcome::step_cut; }
      if (!powered_) {
        if (widx_ >= windows_.size()) return Outcome::supply_exhausted;
        enter_window();
        continue;  // recovery may itself have been cut
      }
      exec_window();
    }
  }

  // verify hook: force a power cut once the global step counter reaches n
  void set_step_cut(int64_t n) { step_target_ = n; }

  // inspection
  const NvmImage& nvm() const { return nvm_; }
  const EnergyMeter& meter() const { return meter_; }
  const std::vector<Event>& events() const { return events_; }
  int64_t steps() const { return steps_; }
  int64_t instr_count() const { return instr_count_; }
  int64_t committed_regions() const { return committed_; }
  int64_t outages() const { return outages_; }
  uint64_t now() const { return now_; }
  uint64_t on_cycles() const { return on_cycles_; }
  int64_t dyn_loads() const { return dyn_loads_; }
  int64_t dyn_bypass_loads() const { return dyn_bypass_; }
  int64_t max_dyn_region_stores() const { return max_dyn_stores_; }
  int64_t stall_cycles() const { return stall_cycles_; }
  bool ilp_enabled_now() const { return ilp_on_; }
  int64_t watchdog_fires() const { return wd_fires_; }

  // overlap statistics across committed background releases
  double ilp_efficiency() const {
    return eff_release_cycles_ ? (double)eff_overlap_cycles_ / (double)eff_release_cycles_ : 1.0;
  }
  int64_t eff_release_cycles() const { return eff_release_cycles_; }
  int64_t eff_overlap_cycles() const { return eff_overlap_cycles_; }

 private:
  struct SbEntry { uint32_t addr; uint32_t val; };

  // tentative account of one region attempt; resolved when its release
  // commits or the supply cuts it down
  struct Attempt {
    int region = -1;
    uint64_t start = 0;
    uint64_t busy_cycles = 0;   // exec + stalls + sync drains
    uint64_t nvm_cycles = 0;    // instruction-level NVM reads
    int64_t searches = 0, loads = 0, stores = 0;
    bool ilp = true;
    bool live = false;
  };

  struct Inflight {
    std::vector<RelOp> ops;
    std::vector<uint64_t> done_at;  // absolute completion time per op
    size_t next = 0;
    uint64_t start = 0, end = 0;
    int half = -1;                  // SB half to clear on commit (-1: none)
    int region = -1;
    bool sync = false;
    int64_t entries = 0;
    // applied-op tallies
    double p1_j = 0, p2_j = 0;
    uint64_t p1_cycles = 0, p2_cycles = 0;
    int64_t n_status = 0, n_p1 = 0, n_count = 0, n_mark = 0, n_p2 = 0, n_commit = 0;
    int64_t overlap = -1;           // exec cycles overlapped; -1 until known
    Attempt pot;                    // the attempt whose stores these are
  };

  const CompiledProgram& cp_;
  SimConfig cfg_;
  Layout lay_;
  NvmImage nvm_;
  std::vector<CycleWindow> windows_;

  uint32_t regs_[16] = {0};
  uint32_t pc_ = 0;
  std::vector<SbEntry> halves_[2];
  int filling_ = 0;
  std::optional<Inflight> rel_;

  uint64_t now_ = 0;
  uint64_t off_limit_ = kNoCut;
  size_t widx_ = 0;
  bool powered_ = false;
  bool halted_ = false;
  bool budget_hit_ = false;
  bool resume_pending_ = false;
  bool arrival_ = false;

  int64_t steps_ = 0;
  int64_t step_target_ = -1;
  bool stepcut_hit_ = false;

  int64_t instr_count_ = 0;
  int64_t outages_ = 0;
  int64_t committed_ = 0;
  int64_t dyn_loads_ = 0, dyn_bypass_ = 0;
  int64_t max_dyn_stores_ = 0;
  int64_t stall_cycles_ = 0;
  int64_t eff_release_cycles_ = 0;
  int64_t eff_overlap_cycles_ = 0;
  uint64_t on_cycles_ = 0;
  uint64_t window_enter_ = 0;

  // adaptive controller
  bool ilp_on_ = true;
  bool armed_ = false;
  int64_t period_ = 0;
  int64_t countdown_ = 0;
  int last_failed_region_ = -1;
  int same_region_failures_ = 0;
  int progress_streak_ = 0;
  int64_t wd_fires_ = 0;

  Attempt attempt_;
  EnergyMeter meter_;
  std::vector<Event> events_;

  // ---- small helpers ------------------------------------------------------

  static int cost_of(const Instruction& in) {
    switch (in.op) {
      case Op::call: case Op::jr: return 2;
      default: return 1;
    }
  }

  bool is_entry(uint32_t pc) const { return cp_.region_entry_pcs.count(pc) != 0; }

  int region_of(uint32_t pc) const {
    if (pc >= cp_.prog.code.size()) throw SimError("pc out of code");
    return cp_.prog.code[pc].region;
  }

  void emit(Event e) { events_.push_back(std::move(e)); }

  // one global step retired; returns false if this step tripped the cut
  bool count_step() {
    steps_++;
    if (step_target_ >= 0 && steps_ >= step_target_) {
      step_target_ = -1;
      power_cut(now_, true);
      return false;
    }
    return true;
  }

  // ---- energy resolution ---------------------------------------------------

  void resolve_attempt(Attempt& a, const std::string& bucket, const std::string& outcome) {
    if (!a.live) return;
    double j = (double)a.busy_cycles * cfg_.compute_j_per_cycle() + cfg_.nvm_j((int)a.nvm_cycles);
    meter_.bucket(bucket) += j;
    Event e{"attempt", {}, {}};
    e.ints = {{"region", a.region}, {"start", (int64_t)a.start}, {"end", (int64_t)now_},
              {"busy_cycles", (int64_t)a.busy_cycles}, {"nvm_cycles", (int64_t)a.nvm_cycles},
              {"searches", a.searches}, {"loads", a.loads}, {"stores", a.stores},
              {"ilp", a.ilp ? 1 : 0}};
    e.strs = {{"bucket", bucket}, {"outcome", outcome}};
    emit(std::move(e));
    a.live = false;
  }

  void start_attempt(int region) {
    attempt_ = Attempt{};
    attempt_.region = region;
    attempt_.start = now_;
    attempt_.ilp = ilp_on_;
    attempt_.live = true;
    countdown_ = period_;
  }

  void emit_release_event(const Inflight& r, const std::string& outcome,
                          const std::string& b1, const std::string& b2) {
    Event e{"release", {}, {}};
    e.ints = {{"region", r.region}, {"entries", r.entries},
              {"start", (int64_t)r.start}, {"end", (int64_t)r.end},
              {"sync", r.sync ? 1 : 0},
              {"status_starts", r.n_status}, {"p1_entries", r.n_p1},
              {"count_writes", r.n_count}, {"marks", r.n_mark},
              {"p2_entries", r.n_p2}, {"commits", r.n_commit},
              {"p1_cycles", (int64_t)r.p1_cycles}, {"p2_cycles", (int64_t)r.p2_cycles},
              {"overlap", r.overlap}, {"dma", cfg_.dma ? 1 : 0}};
    e.strs = {{"outcome", outcome}, {"bucket_p1", b1}, {"bucket_p2", b2}};
    emit(std::move(e));
  }

  // ---- release machinery ---------------------------------------------------

  static bool phase1_kind(RelOpKind k) {
    return k == RelOpKind::status_start || k == RelOpKind::p1_entry ||
           k == RelOpKind::p1_count || k == RelOpKind::p1_done_mark;
  }

  // applies the next pending op (already known to be due); false on step cut
  bool apply_one_release_op() {
    Inflight& r = *rel_;
    const RelOp& op = r.ops[r.next];
    now_ = r.done_at[r.next];
    apply_release_op(nvm_, lay_, op);
    r.next++;
    if (phase1_kind(op.kind)) { r.p1_j += op.nvm_j; r.p1_cycles += (uint64_t)op.cycles; }
    else { r.p2_j += op.nvm_j; r.p2_cycles += (uint64_t)op.cycles; }
    // a synchronous drain occupies the cpu for the op's duration
    if (r.sync) r.pot.busy_cycles += (uint64_t)op.cycles;
    switch (op.kind) {
      case RelOpKind::status_start: r.n_status++; break;
      case RelOpKind::p1_entry: r.n_p1++; break;
      case RelOpKind::p1_count: r.n_count++; break;
      case RelOpKind::p1_done_mark: r.n_mark++; break;
      case RelOpKind::p2_entry: r.n_p2++; break;
      case RelOpKind::commit: r.n_commit++; break;
      case RelOpKind::status_reset: break;
    }
    // resolve before counting the step so an injected cut right here sees
    // the release as already settled (it did commit)
    if (op.kind == RelOpKind::commit) finish_release();
    return count_step();
  }

  // commit reached: stores durable, speculation of this release's region paid off
  void finish_release() {
    Inflight r = std::move(*rel_);
    rel_.reset();
    committed_++;
    if (r.half >= 0) halves_[r.half].clear();
    meter_.phase1_success += r.p1_j;
    meter_.phase2_success += r.p2_j;
    if (r.overlap < 0) r.overlap = (int64_t)(r.end - r.start);  // never waited on
    if (!r.sync) {
      eff_release_cycles_ += (int64_t)(r.end - r.start);
      eff_overlap_cycles_ += r.overlap;
    }
    resolve_attempt(r.pot, r.pot.ilp ? "compute_success" : "noilp_compute", "committed");
    emit_release_event(r, "commit", "phase1_success", "phase2_success");
  }

  // applies all ops due at or before t; false if a step cut fired
  bool drain_due_ops(uint64_t t) {
    while (rel_ && rel_->next < rel_->ops.size() && rel_->done_at[rel_->next] <= t) {
      if (!apply_one_release_op()) return false;
    }
    return true;
  }

  // schedules a release of the given entries. The current attempt rides along
  // as the tentative pot and resolves with the release's fate. Synchronous
  // releases complete (or get cut) before returning.
  bool begin_release(std::vector<std::pair<uint32_t, uint32_t>> entries, int region,
                     int half, bool sync) {
    if (entries.empty()) {
      // nothing speculative left (a watchdog commit already persisted it);
      // the region still completed, so the attempt resolves now
      resolve_attempt(attempt_, attempt_.ilp ? "compute_success" : "noilp_compute",
                      "committed_empty");
      return true;
    }
    if ((int)entries.size() > cfg_.sb_size)
      throw SimError("release exceeds proxy capacity");
    Inflight r;
    r.ops = build_release_schedule(entries, cfg_);
    r.done_at.resize(r.ops.size());
    uint64_t t = now_;
    for (size_t i = 0; i < r.ops.size(); i++) {
      t += (uint64_t)r.ops[i].cycles;
      r.done_at[i] = t;
    }
    r.start = now_;
    r.end = t;
    r.half = half;
    r.region = region;
    r.sync = sync;
    r.entries = (int64_t)entries.size();
    r.pot = attempt_;
    attempt_.live = false;
    rel_ = std::move(r);
    if (!sync) return true;
    uint64_t end = t;
    if (end > off_limit_) {
      if (!drain_due_ops(off_limit_)) return false;
      power_cut(off_limit_, false);
      return false;
    }
    return drain_due_ops(end);  // leaves now_ == end
  }

  // waits for a background release to finish; the stall burns cpu time in the
  // current attempt. false if the wait was cut short by power or step cut.
  bool wait_for_release() {
    if (!rel_) return true;
    uint64_t end = rel_->end;
    uint64_t arrived = now_;
    if (rel_->overlap < 0) rel_->overlap = (int64_t)(std::min(arrived, end) - rel_->start);
    if (end > off_limit_) {
      if (!drain_due_ops(off_limit_)) return false;
      if (attempt_.live && off_limit_ > arrived) {
        attempt_.busy_cycles += off_limit_ - arrived;
        stall_cycles_ += (int64_t)(off_limit_ - arrived);
      }
      power_cut(off_limit_, false);
      return false;
    }
    if (!drain_due_ops(end)) return false;
    if (end > arrived) {
      uint64_t stall = end - arrived;
      if (attempt_.live) attempt_.busy_cycles += stall;
      stall_cycles_ += (int64_t)stall;
      now_ = end;
    }
    return true;
  }

  // ---- boundary / watchdog -------------------------------------------------

  // crossing into a region entry: finish the previous release, push the just
  // ended region's stores into a fresh one, swap halves, open a new attempt
  bool boundary_protocol(uint32_t entry_pc) {
    if (!wait_for_release()) return false;
    region_completed();
    int ended = attempt_.region;
    if (attempt_.live) {
      if (attempt_.stores > max_dyn_stores_) max_dyn_stores_ = attempt_.stores;
      if (attempt_.stores > cfg_.store_threshold())
        throw SimError("region " + std::to_string(ended) + " committed " +
                       std::to_string(attempt_.stores) + " stores, budget " +
                       std::to_string(cfg_.store_threshold()));
    }
    std::vector<std::pair<uint32_t, uint32_t>> entries;
    entries.reserve(halves_[filling_].size());
    for (auto& se : halves_[filling_]) entries.push_back({se.addr, se.val});
    int relhalf = filling_;
    if (!begin_release(std::move(entries), ended, relhalf, !ilp_on_)) return false;
    filling_ ^= 1;
    if (!halves_[filling_].empty())
      throw SimError("swapped into a non-empty store buffer half");
    start_attempt(region_of(entry_pc));
    return true;
  }

  // consecutive failure-free completions eventually restore speculation
  void region_completed() {
    progress_streak_++;
    if (!ilp_on_ && cfg_.ilp && !cfg_.watchdog_armed_at_boot &&
        progress_streak_ >= cfg_.progress_k) {
      ilp_on_ = true;
      if (armed_) {
        armed_ = false;
        period_ = cfg_.watchdog_period_cycles();
        emit({"watchdog", {{"cycle", (int64_t)now_}}, {{"action", "disarm"}}});
      }
      emit({"ilp", {{"cycle", (int64_t)now_}, {"on", 1}}, {}});
      last_failed_region_ = -1;
      same_region_failures_ = 0;
    }
  }

  // watchdog fire: commit the filling half plus a full register-file snapshot
  // mid-region, so the next failure resumes here instead of the region start
  bool watchdog_fire() {
    wd_fires_++;
    emit({"watchdog", {{"cycle", (int64_t)now_}, {"period", period_}}, {{"action", "fire"}}});
    if (rel_) throw SimError("watchdog fired with a release in flight");
    std::vector<std::pair<uint32_t, uint32_t>> entries;
    entries.reserve(halves_[filling_].size() + kRfWords);
    for (auto& se : halves_[filling_]) entries.push_back({se.addr, se.val});
    // the snapshot rides through the store-buffer commit path: 1 cycle each
    for (int i = 0; i < 16; i++) {
      if (!advance_exec(cfg_.sb_commit_cycles)) return false;
      entries.push_back({lay_.rf_base + (uint32_t)(i * kWordBytes), regs_[i]});
      if (!count_step()) return false;
    }
    if (!advance_exec(cfg_.sb_commit_cycles)) return false;
    entries.push_back({lay_.rf_base + (uint32_t)kRfPcOffset, pc_});
    if (!count_step()) return false;
    int region = attempt_.region;
    if (!begin_release(std::move(entries), region, filling_, true)) return false;
    start_attempt(region);  // same region continues with a fresh tentative pot
    return true;
  }

  // advances the clock by busy cpu cycles, respecting the window edge
  bool advance_exec(int cycles) {
    if (now_ + (uint64_t)cycles > off_limit_) {
      if (!drain_due_ops(off_limit_)) return false;
      power_cut(off_limit_, false);
      return false;
    }
    now_ += (uint64_t)cycles;
    if (attempt_.live) attempt_.busy_cycles += (uint64_t)cycles;
    return true;
  }

  // ---- store buffer --------------------------------------------------------

  void sb_push(uint32_t addr, uint32_t val) {
    auto& h = halves_[filling_];
    if ((int)h.size() >= cfg_.sb_half())
      throw SimError("store buffer half overflow at pc " + std::to_string(pc_));
    h.push_back({addr, val});
    attempt_.stores++;
  }

  // newest-first in the filling half, then the releasing half, then NVM
  uint32_t sb_lookup(uint32_t addr) {
    attempt_.searches++;
    meter_.sb_search += cfg_.search_j();
    for (auto it = halves_[filling_].rbegin(); it != halves_[filling_].rend(); ++it)
      if (it->addr == addr) return it->val;
    int other = filling_ ^ 1;
    for (auto it = halves_[other].rbegin(); it != halves_[other].rend(); ++it)
      if (it->addr == addr) return it->val;
    attempt_.nvm_cycles += (uint64_t)cfg_.nvm_read_cycles;
    return nvm_.read_word(addr);
  }

  // compiler-proven safe: no live buffer entry may alias this address
  uint32_t bypass_read(uint32_t addr) {
    for (int h = 0; h < 2; h++)
      for (auto& se : halves_[h])
        if (se.addr == addr)
          throw SimError("bypass violation: pc " + std::to_string(pc_) + " reads addr " +
                         std::to_string(addr) + " still buffered");
    attempt_.nvm_cycles += (uint64_t)cfg_.nvm_read_cycles;
    return nvm_.read_word(addr);
  }

  // ---- power transitions ---------------------------------------------------

  // supply lost (or injected cut): everything volatile evaporates and the
  // in-flight release resolves by what the next recovery will find
  void power_cut(uint64_t at, bool from_step) {
    now_ = at;
    on_cycles_ += now_ - window_enter_;
    std::string during = rel_ ? (rel_->sync ? "drain" : "release") : "exec";
    if (rel_) {
      Inflight r = std::move(*rel_);
      rel_.reset();
      r.end = now_;
      // recovery redoes phase 2 iff the done-mark landed before the cut
      bool will_commit = cfg_.protocol == Protocol::two_bit ? nvm_.status == kStatusCopying
                                                            : nvm_.status == 1;
      if (r.overlap < 0) r.overlap = (int64_t)(now_ - r.start);
      if (will_commit) {
        meter_.phase1_success += r.p1_j;
        meter_.phase2_misspec += r.p2_j;  // applied copies get redone
        resolve_attempt(r.pot, r.pot.ilp ? "compute_success" : "noilp_compute",
                        "cut_commit_pending");
        emit_release_event(r, "cut_copy", "phase1_success", "phase2_misspec");
      } else {
        meter_.phase1_misspec += r.p1_j;
        meter_.phase2_misspec += r.p2_j;
        resolve_attempt(r.pot, r.pot.ilp ? "compute_misspec" : "reexec", "cut_discarded");
        emit_release_event(r, "cut_drain", "phase1_misspec", "phase2_misspec");
      }
    }
    int failed_region = attempt_.live ? attempt_.region : -1;
    resolve_attempt(attempt_, attempt_.ilp ? "compute_misspec" : "reexec", "cut");
    halves_[0].clear();
    halves_[1].clear();
    filling_ = 0;
    powered_ = false;
    outages_++;
    if (outages_ > cfg_.max_outages) throw SimError("outage limit exceeded");
    emit({"cut",
          {{"cycle", (int64_t)now_}, {"outage", outages_}, {"injected", from_step ? 1 : 0},
           {"committed", committed_}},
          {{"during", during}}});
    if (from_step) stepcut_hit_ = true;
    else widx_++;
    // controller: any failure kills speculation; repeated failures in the
    // same region arm the watchdog, further ones halve its period
    progress_streak_ = 0;
    if (ilp_on_) {
      ilp_on_ = false;
      emit({"ilp", {{"cycle", (int64_t)now_}, {"on", 0}}, {}});
    }
    if (failed_region >= 0) {
      if (failed_region == last_failed_region_) same_region_failures_++;
      else { last_failed_region_ = failed_region; same_region_failures_ = 1; }
      if (!armed_ && same_region_failures_ > cfg_.arm_threshold) {
        armed_ = true;
        period_ = cfg_.watchdog_period_cycles();
        emit({"watchdog", {{"cycle", (int64_t)now_}, {"period", period_}}, {{"action", "arm"}}});
      } else if (armed_ && same_region_failures_ > cfg_.arm_threshold + 1) {
        period_ = std::max<int64_t>(period_ / 2, cfg_.watchdog_floor_cycles);
        emit({"watchdog", {{"cycle", (int64_t)now_}, {"period", period_}},
              {{"action", "halve"}}});
      }
    }
  }

  void enter_window() {
    CycleWindow w = windows_[widx_];
    if (now_ < w.on) now_ = w.on;
    off_limit_ = w.off;
    powered_ = true;
    window_enter_ = now_;
    int64_t wake_cy = (int64_t)std::llround(cfg_.us_to_cycles(cfg_.wakeup_us));
    meter_.sleep_wake += (double)wake_cy * cfg_.compute_j_per_cycle();
    emit({"wake",
          {{"cycle", (int64_t)now_}, {"window", (int64_t)widx_}, {"wake_cycles", wake_cy}},
          {}});
    recover();
  }

  // replay the protocol tail the failure left behind, then restore registers
  // and the recovery pc from the last committed checkpoint
  void recover() {
    RecoveryPlan plan = plan_recovery(nvm_, cfg_);
    int64_t redo_copies = 0, resets = 0, commits = 0;
    uint64_t start = now_;
    for (const RelOp& op : plan.ops) {
      if (now_ + (uint64_t)op.cycles > off_limit_) { power_cut(off_limit_, false); return; }
      now_ += (uint64_t)op.cycles;
      apply_release_op(nvm_, lay_, op);
      meter_.reexec += op.nvm_j + (double)op.cycles * cfg_.compute_j_per_cycle();
      switch (op.kind) {
        case RelOpKind::p2_entry: redo_copies++; break;
        case RelOpKind::status_reset: resets++; break;
        case RelOpKind::commit: commits++; committed_++; break;
        default: break;
      }
      if (!count_step()) return;
    }
    if (now_ + (uint64_t)plan.restore_cycles > off_limit_) {
      power_cut(off_limit_, false);
      return;
    }
    now_ += (uint64_t)plan.restore_cycles;
    meter_.reexec +=
        plan.restore_nvm_j + (double)plan.restore_cycles * cfg_.compute_j_per_cycle();
    for (int i = 0; i < 16; i++) regs_[i] = nvm_.rf[i];
    pc_ = nvm_.rf[16];
    if (pc_ >= cp_.prog.code.size()) throw SimError("recovery pc out of code");
    if (!count_step()) return;
    const char* case_name = plan.kind == RecoveryCase::clean ? "clean"
                            : plan.kind == RecoveryCase::drain_interrupted ? "drain"
                                                                           : "copy";
    emit({"recovery",
          {{"cycle", (int64_t)start}, {"end", (int64_t)now_},
           {"redo_copies", redo_copies}, {"resets", resets}, {"commits", commits},
           {"restore_reads", kRfWords}, {"cycles", (int64_t)(now_ - start)}},
          {{"case", case_name}}});
    resume_pending_ = true;
    arrival_ = is_entry(pc_);
    start_attempt(region_of(pc_));
  }

  // ---- the core loop -------------------------------------------------------

  void exec_window() {
    while (powered_ && !halted_) {
      if (instr_count_ >= cfg_.instr_budget) {
        budget_hit_ = true;
        on_cycles_ += now_ - window_enter_;
        return;
      }
      if (arrival_) {
        arrival_ = false;
        if (!resume_pending_) {
          if (!boundary_protocol(pc_)) return;
        }
      }
      resume_pending_ = false;
      const Instruction& in = cp_.prog.code[pc_];
      int cost = cost_of(in);
      uint64_t t_end = now_ + (uint64_t)cost;
      if (t_end > off_limit_) {
        // instruction can't retire before the lights go out
        if (!drain_due_ops(off_limit_)) return;
        power_cut(off_limit_, false);
        return;
      }
      // background ops that finish during this instruction land first
      if (!drain_due_ops(t_end)) return;
      if (in.op == Op::halt) {
        if (!exec_halt(t_end)) return;
        continue;
      }
      uint32_t next_pc = pc_ + 1;
      auto mem_addr = [&](const Instruction& i) -> uint32_t {
        return i.mem_is_reg ? regs_[i.ra] + (uint32_t)(int32_t)i.moff
                            : lay_.addr_of(i.sym, i.moff);
      };
      switch (in.op) {
        case Op::mov: regs_[in.rd] = in.b_is_imm ? (uint32_t)in.imm : regs_[in.ra]; break;
        case Op::la: regs_[in.rd] = lay_.addr_of(in.sym, in.moff); break;
        case Op::load: {
          uint32_t addr = mem_addr(in);
          dyn_loads_++;
          attempt_.loads++;
          if (in.bypass) { dyn_bypass_++; regs_[in.rd] = bypass_read(addr); }
          else regs_[in.rd] = sb_lookup(addr);
          break;
        }
        case Op::store: sb_push(mem_addr(in), regs_[in.rd]); break;
        case Op::sti: sb_push(mem_addr(in), (uint32_t)in.imm); break;
        case Op::jump: next_pc = (uint32_t)in.target_pc; break;
        case Op::call:
          sb_push(lay_.addr_of(ret_slot_sym(in.sym), 0), pc_ + 1);
          next_pc = (uint32_t)in.target_pc;
          break;
        case Op::jr:
          next_pc = regs_[in.ra];
          if (next_pc >= cp_.prog.code.size())
            throw SimError("jr to pc " + std::to_string(next_pc) + " outside code");
          break;
        case Op::ret:
          throw SimError("ret reached the speculative machine uncompiled");
        default:
          if (op_is_alu(in.op)) {
            uint32_t b = in.b_is_imm ? (uint32_t)in.imm : regs_[in.rb];
            regs_[in.rd] = detail::alu_eval(in.op, regs_[in.ra], b);
          } else if (op_is_branch(in.op)) {
            if (detail::branch_eval(in.op, regs_[in.ra], regs_[in.rb]))
              next_pc = (uint32_t)in.target_pc;
          } else {
            throw SimError("unhandled opcode");
          }
      }
      now_ = t_end;
      attempt_.busy_cycles += (uint64_t)cost;
      instr_count_++;
      pc_ = next_pc;
      arrival_ = is_entry(next_pc);
      if (!count_step()) return;
      if (armed_) {
        countdown_ -= cost;
        if (countdown_ <= 0) {
          if (!watchdog_fire()) return;
        }
      }
    }
  }

  // halt: drain any background release, then release the filling half
  // synchronously and stop. A cut during the final release resumes at the
  // halt itself (its recovery pc rides in the released entries), so the redo
  // path converges on an empty buffer and a clean stop.
  bool exec_halt(uint64_t t_end) {
    now_ = t_end;
    attempt_.busy_cycles += 1;
    instr_count_++;
    if (!count_step()) return false;
    if (!wait_for_release()) return false;
    if (attempt_.stores > max_dyn_stores_) max_dyn_stores_ = attempt_.stores;
    if (attempt_.stores > cfg_.store_threshold())
      throw SimError("halting region exceeded the store budget");
    std::vector<std::pair<uint32_t, uint32_t>> entries;
    for (auto& se : halves_[filling_]) entries.push_back({se.addr, se.val});
    if (!entries.empty()) {
      if (!begin_release(std::move(entries), attempt_.region, filling_, true)) return false;
    } else {
      resolve_attempt(attempt_, attempt_.ilp ? "compute_success" : "noilp_compute",
                      "halt_empty");
    }
    halted_ = true;
    on_cycles_ += now_ - window_enter_;
    emit({"halt", {{"cycle", (int64_t)now_}, {"committed", committed_}}, {}});
    return true;
  }
};

}  // namespace cospec
