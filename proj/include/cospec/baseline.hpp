// Baseline machines the speculative one is measured against. Both run the
// source program directly (no regions, no store buffer).
//
// NvffMachine: nonvolatile flip-flops snapshot all state for free when the
// supply gates off, so execution resumes exactly in place and never repeats
// an instruction. The price: stores go straight to NVM (write latency on the
// critical path) and the regulator needs much higher thresholds, so its run
// windows are narrower on the same trace.
//
// NaiveMachine: volatile core that checkpoints the register file at every
// function entry and writes straight to NVM. Restart replays from the last
// function entry against already-mutated memory, so a failure between a
// read-modify-write and the next checkpoint repeats the mutation. The
// increment-twice artifact this produces is the motivating bug.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "config.hpp"
#include "interp.hpp"
#include "machine.hpp"
#include "nvm.hpp"

namespace cospec {

namespace detail {

// shared instruction costs for the direct-to-NVM baselines
inline int direct_cost(const Instruction& in, const SimConfig& cfg) {
  switch (in.op) {
    case Op::store: case Op::sti: return cfg.nvm_write_cycles;
    case Op::call: return 1 + cfg.nvm_write_cycles;  // jump + return-slot write
    case Op::jr: case Op::ret: return 2;
    default: return 1;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------

class NvffMachine {
 public:
  NvffMachine(const Program& p, const SimConfig& cfg, std::vector<CycleWindow> windows)
      : p_(p), cfg_(cfg), lay_(build_layout(p, cfg)),
        nvm_(NvmImage::create(p, lay_, cfg)), windows_(std::move(windows)) {
    if (p_.code.empty()) throw SimError("empty program");
  }

  Outcome run() {
    while (true) {
      if (halted_) return Outcome::halted;
      if (instr_count_ >= cfg_.instr_budget) return Outcome::budget_exhausted;
      if (widx_ >= windows_.size()) return Outcome::supply_exhausted;
      CycleWindow w = windows_[widx_];
      if (now_ < w.on) now_ = w.on;
      window_enter_ = now_;
      meter_.sleep_wake += cfg_.us_to_cycles(cfg_.nvp_wakeup_us) * cfg_.compute_j_per_cycle();
      exec_until(w.off);
      if (halted_) continue;
      if (instr_count_ >= cfg_.instr_budget) {
        on_cycles_ += now_ - window_enter_;
        return Outcome::budget_exhausted;
      }
      // state freezes into the flip-flops; nothing is lost, nothing redone
      on_cycles_ += w.off - window_enter_;
      now_ = w.off;
      meter_.sleep_wake += cfg_.us_to_cycles(cfg_.nvp_sleep_us) * cfg_.compute_j_per_cycle();
      outages_++;
      widx_++;
    }
  }

  const NvmImage& nvm() const { return nvm_; }
  const EnergyMeter& meter() const { return meter_; }
  uint64_t now() const { return now_; }
  uint64_t on_cycles() const { return on_cycles_; }
  int64_t instr_count() const { return instr_count_; }
  int64_t outages() const { return outages_; }

 private:
  const Program& p_;
  SimConfig cfg_;
  Layout lay_;
  NvmImage nvm_;
  std::vector<CycleWindow> windows_;

  uint32_t regs_[16] = {0};
  uint32_t pc_ = 0;
  uint64_t now_ = 0;
  uint64_t on_cycles_ = 0;
  uint64_t window_enter_ = 0;
  size_t widx_ = 0;
  bool halted_ = false;
  int64_t instr_count_ = 0;
  int64_t outages_ = 0;
  EnergyMeter meter_;

  void exec_until(uint64_t off) {
    while (instr_count_ < cfg_.instr_budget) {
      const Instruction& in = p_.code[pc_];
      int cost = detail::direct_cost(in, cfg_);
      if (now_ + (uint64_t)cost > off) return;  // freeze mid-stream
      uint64_t next = pc_ + 1;
      switch (in.op) {
        case Op::mov: regs_[in.rd] = in.b_is_imm ? (uint32_t)in.imm : regs_[in.ra]; break;
        case Op::la: regs_[in.rd] = lay_.addr_of(in.sym, in.moff); break;
        case Op::load:
          regs_[in.rd] = nvm_.read_word(mem_addr(in));
          meter_.noilp_compute += cfg_.nvm_j(cfg_.nvm_read_cycles);
          break;
        case Op::store: store_through(mem_addr(in), regs_[in.rd]); break;
        case Op::sti: store_through(mem_addr(in), (uint32_t)in.imm); break;
        case Op::jump: next = (uint64_t)in.target_pc; break;
        case Op::call:
          store_through(lay_.addr_of(ret_slot_sym(in.sym), 0), pc_ + 1);
          next = (uint64_t)in.target_pc;
          break;
        case Op::jr: next = regs_[in.ra]; break;
        case Op::ret:
          next = nvm_.read_word(lay_.addr_of(ret_slot_sym(p_.fns[in.fn_index].name), 0));
          break;
        case Op::halt:
          now_ += 1;
          instr_count_++;
          halted_ = true;
          on_cycles_ += now_ - window_enter_;
          meter_.noilp_compute += cfg_.compute_j_per_cycle();
          return;
        default:
          if (op_is_alu(in.op)) {
            uint32_t b = in.b_is_imm ? (uint32_t)in.imm : regs_[in.rb];
            regs_[in.rd] = detail::alu_eval(in.op, regs_[in.ra], b);
          } else if (op_is_branch(in.op)) {
            if (detail::branch_eval(in.op, regs_[in.ra], regs_[in.rb]))
              next = (uint64_t)in.target_pc;
          } else {
            throw SimError("unhandled opcode");
          }
      }
      now_ += (uint64_t)cost;
      meter_.noilp_compute += (double)cost * cfg_.compute_j_per_cycle();
      instr_count_++;
      if (next >= p_.code.size()) throw SimError("pc out of code");
      pc_ = (uint32_t)next;
    }
  }

  uint32_t mem_addr(const Instruction& in) const {
    return in.mem_is_reg ? regs_[in.ra] + (uint32_t)(int32_t)in.moff
                         : lay_.addr_of(in.sym, in.moff);
  }

  // stores hit NVM immediately; the store itself is the commit point
  void store_through(uint32_t a, uint32_t v) {
    nvm_.write_word(a, v);
    if (lay_.in_out_range(a)) nvm_.outlog.push_back(v);
    meter_.noilp_compute += cfg_.nvm_j(cfg_.nvm_write_cycles);
  }
};

// ---------------------------------------------------------------------------

class NaiveMachine {
 public:
  NaiveMachine(const Program& p, const SimConfig& cfg, std::vector<CycleWindow> windows)
      : p_(p), cfg_(cfg), lay_(build_layout(p, cfg)),
        nvm_(NvmImage::create(p, lay_, cfg)), windows_(std::move(windows)) {
    if (p_.code.empty()) throw SimError("empty program");
    for (auto& f : p_.fns) entry_pcs_.insert((uint32_t)f.blocks.at(0).insns.at(0).pc);
  }

  Outcome run() {
    while (true) {
      if (halted_) return Outcome::halted;
      if (instr_count_ >= cfg_.instr_budget) return Outcome::budget_exhausted;
      if (stepcut_hit_) { stepcut_hit_ = false; return Outcome::step_cut; }
      if (!powered_) {
        if (widx_ >= windows_.size()) return Outcome::supply_exhausted;
        CycleWindow w = windows_[widx_];
        if (now_ < w.on) now_ = w.on;
        off_limit_ = w.off;
        powered_ = true;
        window_enter_ = now_;
        meter_.sleep_wake += cfg_.us_to_cycles(cfg_.wakeup_us) * cfg_.compute_j_per_cycle();
        recover();
        continue;
      }
      exec_window();
    }
  }

  void set_step_cut(int64_t n) { step_target_ = n; }

  const NvmImage& nvm() const { return nvm_; }
  const EnergyMeter& meter() const { return meter_; }
  uint64_t now() const { return now_; }
  uint64_t on_cycles() const { return on_cycles_; }
  int64_t instr_count() const { return instr_count_; }
  int64_t steps() const { return steps_; }
  int64_t outages() const { return outages_; }

 private:
  const Program& p_;
  SimConfig cfg_;
  Layout lay_;
  NvmImage nvm_;
  std::vector<CycleWindow> windows_;
  std::set<uint32_t> entry_pcs_;

  uint32_t regs_[16] = {0};
  uint32_t pc_ = 0;
  uint64_t now_ = 0;
  uint64_t off_limit_ = kNoCut;
  uint64_t on_cycles_ = 0;
  uint64_t window_enter_ = 0;
  size_t widx_ = 0;
  bool powered_ = false;
  bool halted_ = false;
  bool ckpt_pending_ = false;  // arrived at a function entry, snapshot due
  int64_t instr_count_ = 0;
  int64_t outages_ = 0;
  int64_t steps_ = 0;
  int64_t step_target_ = -1;
  bool stepcut_hit_ = false;
  EnergyMeter meter_;

  bool count_step() {
    steps_++;
    if (step_target_ >= 0 && steps_ >= step_target_) {
      step_target_ = -1;
      power_cut(now_, true);
      return false;
    }
    return true;
  }

  void power_cut(uint64_t at, bool from_step) {
    now_ = at;
    on_cycles_ += now_ - window_enter_;
    powered_ = false;
    outages_++;
    if (outages_ > cfg_.max_outages) throw SimError("outage limit exceeded");
    if (from_step) stepcut_hit_ = true;
    else widx_++;
  }

  // restore the last function-entry snapshot; memory keeps whatever landed
  void recover() {
    uint64_t cost = (uint64_t)(kRfWords * cfg_.nvm_read_cycles + 1);
    if (now_ + cost > off_limit_) { power_cut(off_limit_, false); return; }
    now_ += cost;
    meter_.reexec += kRfWords * cfg_.nvm_j(cfg_.nvm_read_cycles) +
                     (double)cost * cfg_.compute_j_per_cycle();
    for (int i = 0; i < 16; i++) regs_[i] = nvm_.rf[i];
    pc_ = nvm_.rf[16];
    if (pc_ >= p_.code.size()) throw SimError("recovery pc out of code");
    if (!count_step()) return;
    ckpt_pending_ = entry_pcs_.count(pc_) > 0;
  }

  // 17 direct NVM writes: registers then the entry pc
  bool write_checkpoint() {
    for (int i = 0; i < 17; i++) {
      uint64_t c = (uint64_t)cfg_.nvm_write_cycles;
      if (now_ + c > off_limit_) { power_cut(off_limit_, false); return false; }
      now_ += c;
      uint32_t v = i < 16 ? regs_[i] : pc_;
      nvm_.write_word(lay_.rf_base + (uint32_t)(i * kWordBytes), v);
      meter_.reexec += cfg_.nvm_j(cfg_.nvm_write_cycles) +
                       (double)c * cfg_.compute_j_per_cycle();
      if (!count_step()) return false;
    }
    return true;
  }

  void exec_window() {
    while (powered_ && !halted_) {
      if (instr_count_ >= cfg_.instr_budget) {
        on_cycles_ += now_ - window_enter_;
        return;
      }
      if (ckpt_pending_) {
        ckpt_pending_ = false;
        if (!write_checkpoint()) return;
      }
      const Instruction& in = p_.code[pc_];
      int cost = detail::direct_cost(in, cfg_);
      if (now_ + (uint64_t)cost > off_limit_) { power_cut(off_limit_, false); return; }
      uint64_t next = pc_ + 1;
      switch (in.op) {
        case Op::mov: regs_[in.rd] = in.b_is_imm ? (uint32_t)in.imm : regs_[in.ra]; break;
        case Op::la: regs_[in.rd] = lay_.addr_of(in.sym, in.moff); break;
        case Op::load:
          regs_[in.rd] = nvm_.read_word(mem_addr(in));
          meter_.noilp_compute += cfg_.nvm_j(cfg_.nvm_read_cycles);
          break;
        case Op::store: store_through(mem_addr(in), regs_[in.rd]); break;
        case Op::sti: store_through(mem_addr(in), (uint32_t)in.imm); break;
        case Op::jump: next = (uint64_t)in.target_pc; break;
        case Op::call:
          store_through(lay_.addr_of(ret_slot_sym(in.sym), 0), pc_ + 1);
          next = (uint64_t)in.target_pc;
          break;
        case Op::jr: next = regs_[in.ra]; break;
        case Op::ret:
          next = nvm_.read_word(lay_.addr_of(ret_slot_sym(p_.fns[in.fn_index].name), 0));
          break;
        case Op::halt:
          now_ += 1;
          instr_count_++;
          meter_.noilp_compute += cfg_.compute_j_per_cycle();
          if (!count_step()) return;  // a cut on the halt step replays it
          halted_ = true;
          on_cycles_ += now_ - window_enter_;
          return;
        default:
          if (op_is_alu(in.op)) {
            uint32_t b = in.b_is_imm ? (uint32_t)in.imm : regs_[in.rb];
            regs_[in.rd] = detail::alu_eval(in.op, regs_[in.ra], b);
          } else if (op_is_branch(in.op)) {
            if (detail::branch_eval(in.op, regs_[in.ra], regs_[in.rb]))
              next = (uint64_t)in.target_pc;
          } else {
            throw SimError("unhandled opcode");
          }
      }
      now_ += (uint64_t)cost;
      meter_.noilp_compute += (double)cost * cfg_.compute_j_per_cycle();
      instr_count_++;
      if (next >= p_.code.size()) throw SimError("pc out of code");
      pc_ = (uint32_t)next;
      if (!count_step()) return;
      ckpt_pending_ = entry_pcs_.count(pc_) > 0;
    }
  }

  uint32_t mem_addr(const Instruction& in) const {
    return in.mem_is_reg ? regs_[in.ra] + (uint32_t)(int32_t)in.moff
                         : lay_.addr_of(in.sym, in.moff);
  }

  void store_through(uint32_t a, uint32_t v) {
    nvm_.write_word(a, v);
    if (lay_.in_out_range(a)) nvm_.outlog.push_back(v);
    meter_.noilp_compute += cfg_.nvm_j(cfg_.nvm_write_cycles);
  }
};

}  // namespace cospec
