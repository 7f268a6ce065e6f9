#pragma once
// Region formation and checkpoint insertion.
//
// The compiler carves every function into single-entry regions whose worst
// case store count fits one store-buffer half, then plants checkpoint stubs
// on region-crossing edges so a power failure can always restart the current
// region from committed state.  Pipeline:
//
//   1. normalize: every call starts its own basic block
//   2. seed boundaries: fn entry, loop headers, call blocks, call
//      continuations, ret/halt blocks
//   3. membership fixpoint with single-entry promotion (a block reachable
//      boundary-free from two headers becomes a boundary itself)
//   4. greedy combining: drop removable boundaries (exit, before-call) when
//      the merged region still fits the budget
//   5. budget cuts: path-max store counting, including not-yet-materialized
//      stub stores; split immediately before the store that would overflow
//   6. materialize stubs, lower ret, assign region ids, finalize
//   7. bypass analysis: loads provably disjoint from the store footprints of
//      the current and predecessor regions skip the store-buffer search

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cfg.hpp"
#include "config.hpp"
#include "ir.hpp"
#include "nvm.hpp"

namespace cospec {

enum class BoundKind { entry, loop, after_call, merge, cut, call, exit };

inline const char* bound_kind_name(BoundKind k) {
  switch (k) {
    case BoundKind::entry: return "entry";
    case BoundKind::loop: return "loop";
    case BoundKind::after_call: return "after-call";
    case BoundKind::merge: return "merge";
    case BoundKind::cut: return "cut";
    case BoundKind::call: return "call";
    case BoundKind::exit: return "exit";
  }
  return "?";
}

// only exit and before-call boundaries may be removed by combining; loop
// headers cap dynamic iterations per region and everything else either pins
// the single-entry property or records a budget cut
inline bool bound_removable(BoundKind k) {
  return k == BoundKind::call || k == BoundKind::exit;
}

struct RegionInfo {
  int id = -1;
  int fn = -1;
  std::string fn_name;
  BoundKind kind = BoundKind::entry;
  std::string header;           // header block label
  uint32_t entry_pc = 0;
  std::vector<std::string> blocks;
  int max_path_stores = 0;      // static worst case incl. checkpoint stubs
  RegMask ckpt_live = 0;        // registers checkpointed at this region's exits
  int ckpt_insns = 0;           // checkpoint stores + recovery-pc writes
  std::vector<int> preds;       // region ids that can immediately precede
};

struct CompiledProgram {
  Program prog;
  std::vector<RegionInfo> regions;
  std::set<uint32_t> region_entry_pcs;
  int static_loads = 0;
  int static_bypass_loads = 0;
};

namespace detail {

struct SymVal {
  bool top = false;
  std::set<std::string> syms;

  void join(const SymVal& o) {
    if (o.top) top = true;
    if (!top) syms.insert(o.syms.begin(), o.syms.end());
    if (top) syms.clear();
  }
  bool operator==(const SymVal& o) const { return top == o.top && syms == o.syms; }
};

struct Footprint {
  bool top = false;
  std::map<std::string, std::set<int32_t>> exact;  // sym -> known offsets
  std::set<std::string> any;                       // sym with unknown offsets

  void add_exact(const std::string& s, int32_t off) {
    if (!top) exact[s].insert(off);
  }
  void add_any(const std::string& s) {
    if (!top) any.insert(s);
  }
  void add_all() {
    top = true;
    exact.clear();
    any.clear();
  }
  void merge(const Footprint& o) {
    if (o.top) add_all();
    if (top) return;
    for (auto& [s, offs] : o.exact) exact[s].insert(offs.begin(), offs.end());
    any.insert(o.any.begin(), o.any.end());
  }
  bool covers_exact(const std::string& s, int32_t off) const {
    if (top || any.count(s)) return true;
    auto it = exact.find(s);
    return it != exact.end() && it->second.count(off);
  }
  bool covers_sym(const std::string& s) const {
    return top || any.count(s) || exact.count(s);
  }
};

inline Instruction mk_ckpt_store(int reg, int src_line) {
  Instruction in;
  in.op = Op::store;
  in.rd = reg;
  in.sym = kRfSym;
  in.moff = reg * kWordBytes;
  in.ckpt = true;
  in.src_line = src_line;
  return in;
}

inline Instruction mk_pc_sti(int fn, const std::string& label, int off, int src_line) {
  Instruction in;
  in.op = Op::sti;
  in.sym = kRfSym;
  in.moff = kRfPcOffset;
  in.ckpt = true;
  in.pc_ref_fn = fn;
  in.pc_ref_label = label;
  in.pc_ref_off = off;
  in.src_line = src_line;
  return in;
}

inline Instruction mk_jump(const std::string& label, int src_line) {
  Instruction in;
  in.op = Op::jump;
  in.sym = label;
  in.src_line = src_line;
  return in;
}

}  // namespace detail

class Regionizer {
 public:
  Regionizer(const Program& source, const SimConfig& cfg) : p_(source), cfg_(cfg) {}

  CompiledProgram run() {
    validate(p_, true);
    normalize_calls();
    fn_order_ = callee_first_order();
    seed_boundaries();

    // analysis fixpoint: membership/promotion, liveness, combining (first
    // round only), then budget cuts until every path fits a half buffer
    const int kMaxRounds = 100;
    for (int round = 0;; round++) {
      if (round >= kMaxRounds)
        throw ValidateError("region budget analysis did not converge");
      analyze();
      if (round == 0) {
        combine();
        analyze();
      }
      bool changed = false;
      for (int fi = 0; fi < (int)p_.fns.size(); fi++) {
        Dp dp = run_dp(fi, true);
        changed |= apply_cuts(fi, dp);
      }
      if (!changed) break;
    }

    analyze();
    materialize();
    analyze();  // rebuild over materialized blocks; must not promote
    assign_regions();
    finalize(p_);
    analyze_bypass();
    finalize(p_);
    validate(p_, false);

    CompiledProgram out;
    build_region_infos(out);
    check_budget_final(out);
    validate_call_conventions();
    out.prog = std::move(p_);
    return out;
  }

 private:
  Program p_;
  const SimConfig& cfg_;
  std::vector<int> fn_order_;  // callees before callers
  std::vector<std::map<std::string, BoundKind>> bounds_;
  int fresh_ = 0;

  // per-round analysis state
  struct FnState {
    Cfg cfg;
    Liveness lv;
    std::vector<int> memb;      // block -> header index, -1 unreachable
    std::vector<int> headers;   // header block indices in block order
  };
  std::vector<FnState> fs_;
  LivenessOpts lopts_;

  int threshold() const { return cfg_.store_threshold(); }

  bool is_boundary(int fi, const std::string& label) const {
    return bounds_[fi].count(label) != 0;
  }
  bool is_boundary(int fi, int b) const {
    return is_boundary(fi, p_.fns[fi].blocks[b].label);
  }

  static void rebuild_index(Function& f) {
    f.block_index.clear();
    for (int i = 0; i < (int)f.blocks.size(); i++) {
      if (f.block_index.count(f.blocks[i].label))
        throw ValidateError("duplicate label " + f.blocks[i].label);
      f.block_index[f.blocks[i].label] = i;
    }
  }

  std::string fresh_label(const Function& f, const char* stem) {
    std::string s;
    do {
      s = "." + std::string(stem) + std::to_string(fresh_++);
    } while (f.block_index.count(s));
    return s;
  }

  // every call gets its own block so a region boundary can sit right on it
  void normalize_calls() {
    for (auto& f : p_.fns) {
      for (int bi = 0; bi < (int)f.blocks.size(); bi++) {
        BasicBlock& b = f.blocks[bi];
        if (b.insns.back().op != Op::call || b.insns.size() == 1) continue;
        BasicBlock callb;
        callb.label = fresh_label(f, "cb");
        callb.insns.push_back(b.insns.back());
        b.insns.pop_back();
        b.insns.push_back(detail::mk_jump(callb.label, callb.insns[0].src_line));
        f.blocks.insert(f.blocks.begin() + bi + 1, std::move(callb));
        rebuild_index(f);
      }
    }
  }

  std::vector<int> callee_first_order() const {
    std::vector<int> order;
    std::vector<int> state(p_.fns.size(), 0);
    std::function<void(int)> dfs = [&](int fi) {
      state[fi] = 1;
      for (auto& b : p_.fns[fi].blocks)
        for (auto& in : b.insns)
          if (in.op == Op::call) {
            int ci = p_.fn_index.at(in.sym);
            if (state[ci] == 0) dfs(ci);
          }
      state[fi] = 2;
      order.push_back(fi);
    };
    for (int fi = 0; fi < (int)p_.fns.size(); fi++)
      if (state[fi] == 0) dfs(fi);
    return order;
  }

  void set_bound(int fi, const std::string& label, BoundKind k) {
    auto it = bounds_[fi].find(label);
    if (it == bounds_[fi].end()) {
      bounds_[fi][label] = k;
      return;
    }
    // keep the stronger kind: permanent beats removable
    if (bound_removable(it->second) && !bound_removable(k)) it->second = k;
  }

  void seed_boundaries() {
    bounds_.assign(p_.fns.size(), {});
    for (int fi = 0; fi < (int)p_.fns.size(); fi++) {
      Function& f = p_.fns[fi];
      set_bound(fi, f.blocks[0].label, BoundKind::entry);
      Cfg g = build_cfg(f);
      for (int h : g.loop_headers) set_bound(fi, f.blocks[h].label, BoundKind::loop);
      for (int bi = 0; bi < (int)f.blocks.size(); bi++) {
        Op t = f.blocks[bi].insns.back().op;
        if (t == Op::call) {
          set_bound(fi, f.blocks[bi].label, BoundKind::call);
          set_bound(fi, f.blocks[bi + 1].label, BoundKind::after_call);
        } else if (t == Op::ret || t == Op::halt) {
          set_bound(fi, f.blocks[bi].label, BoundKind::exit);
        }
      }
    }
  }

  // membership + single-entry promotion for one function
  void compute_membership(int fi) {
    FnState& st = fs_[fi];
    const Cfg& g = st.cfg;
    int n = g.n;
    for (bool again = true; again;) {
      again = false;
      st.memb.assign(n, -1);
      st.headers.clear();
      for (int b = 0; b < n; b++)
        if (g.reachable[b] && is_boundary(fi, b)) {
          st.memb[b] = b;
          st.headers.push_back(b);
        }
      for (int h : st.headers) {
        std::vector<int> stack{h};
        while (!stack.empty() && !again) {
          int b = stack.back();
          stack.pop_back();
          for (int s : g.succ[b]) {
            if (is_boundary(fi, s)) continue;
            if (st.memb[s] == -1) {
              st.memb[s] = h;
              stack.push_back(s);
            } else if (st.memb[s] != h) {
              // reachable boundary-free from two headers: promote
              set_bound(fi, g.fn->blocks[s].label, BoundKind::merge);
              again = true;
              break;
            }
          }
        }
        if (again) break;
      }
    }
  }

  // rebuild cfg/membership/liveness for all functions, callees first so each
  // caller sees exact callee entry live-ins at call sites
  void analyze() {
    fs_.assign(p_.fns.size(), {});
    lopts_ = LivenessOpts{};
    for (int fi : fn_order_) {
      rebuild_index(p_.fns[fi]);
      fs_[fi].cfg = build_cfg(p_.fns[fi]);
      compute_membership(fi);
      fs_[fi].lv = compute_liveness(fs_[fi].cfg, lopts_);
      lopts_.call_use[p_.fns[fi].name] = fs_[fi].lv.live_in[0];
    }
  }

  // stores a crossing edge's stub will add: one per live-in register of the
  // target region plus the recovery-pc write
  int edge_stub_stores(int fi, int target) const {
    return popcount16(fs_[fi].lv.live_in[target]) + 1;
  }

  RegMask call_stub_mask(int fi, int call_block) const {
    const Function& f = p_.fns[fi];
    const Instruction& c = f.blocks[call_block].insns.back();
    int callee = p_.fn_index.at(c.sym);
    RegMask args = fs_[callee].lv.live_in[0];
    RegMask across = 0;
    if (call_block + 1 < (int)f.blocks.size())
      across = fs_[fi].lv.live_in[call_block + 1] & ~lopts_.ret_live;
    return args | across;
  }

  struct Dp {
    std::vector<int> entry_cnt, exit_cnt;
    std::map<int, int> cut_at;          // block -> insn index to split at
    std::set<int> promote;              // blocks to turn into cut boundaries
    std::map<int, int> region_max;      // header -> worst path count
  };

  // path-max store counting per region.  `with_virtual` charges planned stub
  // stores before they exist; after materialization they are real and the
  // terminators have been lowered.
  Dp run_dp(int fi, bool with_virtual) const {
    const Function& f = p_.fns[fi];
    const FnState& st = fs_[fi];
    const Cfg& g = st.cfg;
    Dp dp;
    dp.entry_cnt.assign(g.n, -1);
    dp.exit_cnt.assign(g.n, -1);
    int thr = threshold();

    auto note_max = [&](int b, int v) {
      int h = st.memb[b];
      auto [it, fresh] = dp.region_max.insert({h, v});
      if (!fresh && v > it->second) it->second = v;
    };

    for (int b : g.rpo) {
      int entry = 0;
      if (!is_boundary(fi, b)) {
        for (int pr : g.pred[b]) {
          if (!g.reachable[pr] || st.memb[pr] != st.memb[b]) continue;
          if (dp.exit_cnt[pr] < 0) continue;  // pred was cut this round
          entry = std::max(entry, dp.exit_cnt[pr]);
        }
      }
      dp.entry_cnt[b] = entry;
      note_max(b, entry);

      int cnt = entry;
      bool violated = false;
      const auto& insns = f.blocks[b].insns;
      for (int i = 0; i < (int)insns.size(); i++) {
        const Instruction& in = insns[i];
        int add = 0;
        if (in.is_store()) add = 1;  // store and sti both buffer one word
        if (with_virtual) {
          if (in.op == Op::call)
            add = popcount16(call_stub_mask(fi, b)) + 1 + 1;  // ckpts, pc, push
          else if (in.op == Op::ret)
            add = popcount16(lopts_.ret_live) + 1;
          else if (in.op == Op::halt)
            add = 1;
        } else if (in.op == Op::call) {
          add = 1;  // return-address push through the store buffer
        }
        if (!add) continue;
        cnt += add;
        note_max(b, cnt);
        if (cnt > thr) {
          if (i == 0)
            dp.promote.insert(b);
          else
            dp.cut_at[b] = i;
          violated = true;
          break;
        }
      }
      if (violated) continue;
      dp.exit_cnt[b] = cnt;

      // crossing edges: the stub's checkpoint stores land in this region
      if (with_virtual && insns.back().op != Op::call) {
        for (int s : g.succ[b]) {
          if (!is_boundary(fi, s)) continue;
          int total = cnt + edge_stub_stores(fi, s);
          note_max(b, total);
          if (total > thr) {
            int last_store = -1;
            for (int i = 0; i < (int)insns.size(); i++)
              if (insns[i].is_store()) last_store = i;
            if (last_store > 0)
              dp.cut_at[b] = std::min(
                  dp.cut_at.count(b) ? dp.cut_at[b] : last_store, last_store);
            else
              dp.promote.insert(b);
          }
        }
      }
    }
    return dp;
  }

  bool apply_cuts(int fi, const Dp& dp) {
    Function& f = p_.fns[fi];
    bool changed = false;
    for (int b : dp.promote) {
      const std::string& lab = f.blocks[b].label;
      if (!bounds_[fi].count(lab)) {
        set_bound(fi, lab, BoundKind::cut);
        changed = true;
      } else if (dp.cut_at.count(b) == 0) {
        // boundary block that still overflows and offers no split point:
        // the program demands more than a half buffer on one path
        throw ValidateError("block " + lab + " in " + f.name +
                            " cannot fit the store budget");
      }
    }
    // split from the highest block index down so indices stay valid
    std::vector<std::pair<int, int>> cuts(dp.cut_at.begin(), dp.cut_at.end());
    std::sort(cuts.rbegin(), cuts.rend());
    for (auto [b, idx] : cuts) {
      if (dp.promote.count(b) && !bounds_[fi].count(f.blocks[b].label)) continue;
      BasicBlock rest;
      rest.label = fresh_label(f, "cut");
      rest.insns.assign(f.blocks[b].insns.begin() + idx, f.blocks[b].insns.end());
      f.blocks[b].insns.resize(idx);
      f.blocks[b].insns.push_back(detail::mk_jump(rest.label, rest.insns[0].src_line));
      f.blocks.insert(f.blocks.begin() + b + 1, std::move(rest));
      rebuild_index(f);
      set_bound(fi, f.blocks[b + 1].label, BoundKind::cut);
      changed = true;
    }
    return changed;
  }

  // greedy merge of removable boundaries into their unique predecessor region
  void combine() {
    for (int fi : fn_order_) {
      bool merged = true;
      while (merged) {
        merged = false;
        // note: analyze() rebuilds fs_, so take copies up front and re-read
        // fs_[fi] after every trial instead of holding references
        std::vector<int> headers = fs_[fi].headers;
        for (int h : headers) {
          const std::string lab = p_.fns[fi].blocks[h].label;
          auto it = bounds_[fi].find(lab);
          if (it == bounds_[fi].end() || !bound_removable(it->second)) continue;
          int ph = -1;
          bool ok = true;
          {
            const FnState& st = fs_[fi];
            if (st.cfg.pred[h].empty()) continue;
            for (int pr : st.cfg.pred[h]) {
              if (!st.cfg.reachable[pr]) continue;
              int m = st.memb[pr];
              if (m < 0 || (ph >= 0 && m != ph)) { ok = false; break; }
              ph = m;
              if (p_.fns[fi].blocks[pr].insns.back().op == Op::call) ok = false;
            }
          }
          if (!ok || ph < 0 || ph == h) continue;

          // trial removal: accept if the merged region fits the budget
          BoundKind saved = it->second;
          bounds_[fi].erase(lab);
          analyze();
          Dp dp = run_dp(fi, true);
          int mx = dp.region_max.count(ph) ? dp.region_max[ph] : 0;
          bool bad = mx > threshold();
          for (int b = 0; b < fs_[fi].cfg.n && !bad; b++)
            if (fs_[fi].memb[b] == ph && (dp.cut_at.count(b) || dp.promote.count(b)))
              bad = true;
          if (bad) {
            set_bound(fi, lab, saved);
            analyze();
          } else {
            merged = true;
            break;  // headers list is stale; rescan this function
          }
        }
      }
    }
  }

  // ---------------------------------------------------------------------
  // stub materialization

  void append_ckpts(std::vector<Instruction>& out, RegMask live, int src_line) const {
    for (int r = 0; r < kNumRegs; r++)
      if (live & reg_bit(r)) out.push_back(detail::mk_ckpt_store(r, src_line));
  }

  void materialize() {
    for (int fi = 0; fi < (int)p_.fns.size(); fi++) {
      Function& f = p_.fns[fi];
      const FnState& st = fs_[fi];
      const Cfg& g = st.cfg;

      struct Patch {
        std::vector<Instruction> before_term;
        std::vector<Instruction> replace_term;  // non-empty for ret lowering
        std::vector<BasicBlock> after_blocks;   // must become the fall-through
        std::vector<BasicBlock> end_blocks;     // jump-only stubs, placed last
        std::string retarget;  // branch taken-target replacement
        bool replace = false;
      };
      std::vector<Patch> patch(g.n);

      for (int b = 0; b < g.n; b++) {
        if (!g.reachable[b]) continue;
        Instruction& t = f.blocks[b].insns.back();
        int line = t.src_line;
        switch (t.op) {
          case Op::call: {
            RegMask save = call_stub_mask(fi, b);
            int callee = p_.fn_index.at(t.sym);
            append_ckpts(patch[b].before_term, save, line);
            patch[b].before_term.push_back(detail::mk_pc_sti(
                callee, p_.fns[callee].blocks[0].label, 0, line));
            break;
          }
          case Op::ret: {
            auto& rep = patch[b].replace_term;
            patch[b].replace = true;
            append_ckpts(rep, lopts_.ret_live, line);
            Instruction ld;
            ld.op = Op::load;
            ld.rd = kScratchReg;
            ld.sym = ret_slot_sym(f.name);
            ld.src_line = line;
            rep.push_back(ld);
            Instruction sv = detail::mk_ckpt_store(kScratchReg, line);
            sv.moff = kRfPcOffset;  // the loaded return address is the recovery pc
            rep.push_back(sv);
            Instruction j;
            j.op = Op::jr;
            j.ra = kScratchReg;
            j.src_line = line;
            rep.push_back(j);
            break;
          }
          case Op::halt: {
            int off = (int)f.blocks[b].insns.size();  // halt index after insert
            patch[b].before_term.push_back(
                detail::mk_pc_sti(fi, f.blocks[b].label, off, line));
            break;
          }
          case Op::jump: {
            int s = f.block_index.at(t.sym);
            if (!is_boundary(fi, s)) break;
            append_ckpts(patch[b].before_term, st.lv.live_in[s], line);
            patch[b].before_term.push_back(
                detail::mk_pc_sti(fi, f.blocks[s].label, 0, line));
            break;
          }
          default: {
            if (!op_is_branch(t.op)) break;
            int taken = f.block_index.at(t.sym);
            auto make_stub = [&](int target) {
              BasicBlock sb;
              sb.label = fresh_label(f, "ck");
              append_ckpts(sb.insns, st.lv.live_in[target], line);
              sb.insns.push_back(
                  detail::mk_pc_sti(fi, f.blocks[target].label, 0, line));
              sb.insns.push_back(detail::mk_jump(f.blocks[target].label, line));
              return sb;
            };
            if (taken == b + 1) {
              // degenerate branch: both ways reach the same block
              if (is_boundary(fi, taken)) {
                BasicBlock sb = make_stub(taken);
                patch[b].retarget = sb.label;
                patch[b].after_blocks.push_back(std::move(sb));
              }
              break;
            }
            if (is_boundary(fi, b + 1))
              patch[b].after_blocks.push_back(make_stub(b + 1));
            if (is_boundary(fi, taken)) {
              // reached only by an explicit jump, so it can live at the end
              // of the function without disturbing any fall-through
              BasicBlock sb = make_stub(taken);
              patch[b].retarget = sb.label;
              patch[b].end_blocks.push_back(std::move(sb));
            }
            break;
          }
        }
      }

      std::vector<BasicBlock> out, tail;
      for (int b = 0; b < g.n; b++) {
        BasicBlock blk = std::move(f.blocks[b]);
        Patch& pa = patch[b];
        if (pa.replace) {
          blk.insns.pop_back();
          for (auto& in : pa.replace_term) blk.insns.push_back(in);
        } else {
          Instruction term = blk.insns.back();
          blk.insns.pop_back();
          for (auto& in : pa.before_term) blk.insns.push_back(in);
          if (!pa.retarget.empty()) term.sym = pa.retarget;
          blk.insns.push_back(term);
        }
        out.push_back(std::move(blk));
        for (auto& sb : pa.after_blocks) out.push_back(std::move(sb));
        for (auto& sb : pa.end_blocks) tail.push_back(std::move(sb));
      }
      for (auto& sb : tail) out.push_back(std::move(sb));
      f.blocks = std::move(out);
      rebuild_index(f);
    }
  }

  // ---------------------------------------------------------------------
  // final numbering, reports, checks

  std::vector<int> layout_order() const {
    std::vector<int> order{p_.fn_index.at("main")};
    for (int fi = 0; fi < (int)p_.fns.size(); fi++)
      if (fi != order[0]) order.push_back(fi);
    return order;
  }

  void assign_regions() {
    int next = 0;
    for (int fi : layout_order()) {
      FnState& st = fs_[fi];
      std::map<int, int> id;
      for (int h : st.headers) id[h] = next++;
      for (int b = 0; b < st.cfg.n; b++) {
        int r = st.memb[b] < 0 ? -1 : id[st.memb[b]];
        for (auto& in : p_.fns[fi].blocks[b].insns) in.region = r;
      }
    }
  }

  void build_region_infos(CompiledProgram& out) {
    for (int fi : layout_order()) {
      const FnState& st = fs_[fi];
      const Function& f = p_.fns[fi];
      Dp dp = run_dp(fi, false);
      std::map<int, int> id;
      for (int h : st.headers) {
        RegionInfo ri;
        ri.id = (int)out.regions.size();
        id[h] = ri.id;
        ri.fn = fi;
        ri.fn_name = f.name;
        ri.kind = bounds_[fi].at(f.blocks[h].label);
        ri.header = f.blocks[h].label;
        ri.entry_pc = f.blocks[h].insns[0].pc;
        ri.max_path_stores = dp.region_max.count(h) ? dp.region_max[h] : 0;
        out.regions.push_back(std::move(ri));
        out.region_entry_pcs.insert(f.blocks[h].insns[0].pc);
      }
      for (int b = 0; b < st.cfg.n; b++) {
        if (st.memb[b] < 0) continue;
        RegionInfo& ri = out.regions[id[st.memb[b]]];
        ri.blocks.push_back(f.blocks[b].label);
        for (const auto& in : f.blocks[b].insns) {
          if (in.ckpt) {
            ri.ckpt_insns++;
            if (in.op == Op::store && in.moff < (int32_t)kRfPcOffset)
              ri.ckpt_live |= reg_bit(in.rd);
          }
          if (in.is_load()) {
            out.static_loads++;
            if (in.bypass) out.static_bypass_loads++;
          }
        }
      }
    }
    build_region_preds(out);
  }

  // region predecessor sets drive the bypass scope and the report
  void build_region_preds(CompiledProgram& out) {
    std::map<uint32_t, int> rid_by_pc;
    for (auto& r : out.regions) rid_by_pc[r.entry_pc] = r.id;
    auto rid_of_block = [&](int fi, int b) {
      for (auto& in : p_.fns[fi].blocks[b].insns) return in.region;
      return -1;
    };
    std::vector<std::set<int>> preds(out.regions.size());
    std::vector<std::vector<int>> fn_exit_regions(p_.fns.size());
    for (int fi = 0; fi < (int)p_.fns.size(); fi++) {
      const FnState& st = fs_[fi];
      for (int b = 0; b < st.cfg.n; b++) {
        if (!st.cfg.reachable[b]) continue;
        if (p_.fns[fi].blocks[b].insns.back().op == Op::jr)
          fn_exit_regions[fi].push_back(rid_of_block(fi, b));
      }
    }
    for (int fi = 0; fi < (int)p_.fns.size(); fi++) {
      const FnState& st = fs_[fi];
      const Function& f = p_.fns[fi];
      for (int b = 0; b < st.cfg.n; b++) {
        if (!st.cfg.reachable[b]) continue;
        int rb = rid_of_block(fi, b);
        if (rb < 0) continue;
        for (int s : st.cfg.succ[b])
          if (is_boundary(fi, s)) preds[rid_of_block(fi, s)].insert(rb);
        const Instruction& t = f.blocks[b].insns.back();
        if (t.op == Op::call) {
          int callee = p_.fn_index.at(t.sym);
          preds[rid_of_block(callee, 0)].insert(rb);
          if (b + 1 < st.cfg.n) {
            int rc = rid_of_block(fi, b + 1);
            for (int er : fn_exit_regions[callee]) preds[rc].insert(er);
          }
        }
      }
    }
    for (auto& r : out.regions)
      r.preds.assign(preds[r.id].begin(), preds[r.id].end());
  }

  void check_budget_final(const CompiledProgram& out) const {
    for (auto& r : out.regions)
      if (r.max_path_stores > threshold())
        throw ValidateError("region " + std::to_string(r.id) + " exceeds budget: " +
                            std::to_string(r.max_path_stores) + " stores");
  }

  // registers live across a call must not be touched by the callee (r0/r1
  // are the return convention and exempt); main must start from nothing
  void validate_call_conventions() {
    std::vector<RegMask> written(p_.fns.size(), 0);
    for (int fi : fn_order_) {
      RegMask w = 0;
      for (auto& b : p_.fns[fi].blocks)
        for (auto& in : b.insns) {
          RegMask u, d;
          insn_use_def(in, lopts_, u, d);
          w |= d;
          if (in.op == Op::call) w |= written[p_.fn_index.at(in.sym)];
        }
      written[fi] = w;
    }
    for (int fi = 0; fi < (int)p_.fns.size(); fi++) {
      const Function& f = p_.fns[fi];
      const FnState& st = fs_[fi];
      for (int b = 0; b < st.cfg.n; b++) {
        if (!st.cfg.reachable[b]) continue;
        const Instruction& t = f.blocks[b].insns.back();
        if (t.op != Op::call || b + 1 >= st.cfg.n) continue;
        RegMask across = st.lv.live_in[b + 1] & ~lopts_.ret_live;
        RegMask clobber = across & written[p_.fn_index.at(t.sym)];
        if (clobber) {
          std::string regs;
          for (int r = 0; r < kNumRegs; r++)
            if (clobber & reg_bit(r)) regs += " r" + std::to_string(r);
          throw ValidateError("registers live across call to " + t.sym +
                              " are written by it:" + regs);
        }
      }
    }
    int mi = p_.fn_index.at("main");
    if (fs_[mi].lv.live_in[0])
      throw ValidateError("main reads registers before writing them");
  }

  // ---------------------------------------------------------------------
  // bypass analysis: flow-insensitive per-function symbol tracking

  void analyze_bypass() {
    for (int fi = 0; fi < (int)p_.fns.size(); fi++) {
      Function& f = p_.fns[fi];
      std::vector<detail::SymVal> val(kNumRegs);
      bool has_call = false;
      for (auto& b : f.blocks)
        for (auto& in : b.insns)
          if (in.op == Op::call) has_call = true;
      for (bool changed = true; changed;) {
        changed = false;
        auto upd = [&](int rd, const detail::SymVal& v) {
          if (rd < 0) return;
          detail::SymVal nv = val[rd];
          nv.join(v);
          if (!(nv == val[rd])) {
            val[rd] = nv;
            changed = true;
          }
        };
        detail::SymVal top;
        top.top = true;
        if (has_call) {
          // callee return values may carry any address
          upd(0, top);
          upd(1, top);
        }
        for (auto& b : f.blocks)
          for (auto& in : b.insns) {
            switch (in.op) {
              case Op::la: {
                detail::SymVal v;
                v.syms.insert(in.sym);
                upd(in.rd, v);
                break;
              }
              case Op::mov:
                if (!in.b_is_imm) upd(in.rd, val[in.ra]);
                break;
              case Op::add:
              case Op::sub: {
                detail::SymVal v = val[in.ra];
                if (!in.b_is_imm) v.join(val[in.rb]);
                upd(in.rd, v);
                break;
              }
              case Op::load:
                upd(in.rd, top);
                break;
              default:
                if (op_is_alu(in.op)) {
                  // address arithmetic through mul/and/... loses the base
                  detail::SymVal v = val[in.ra];
                  if (!in.b_is_imm) v.join(val[in.rb]);
                  if (!v.syms.empty() || v.top) upd(in.rd, top);
                }
                break;
            }
          }
      }

      // per-region store footprints
      std::map<int, detail::Footprint> foot;
      for (auto& b : f.blocks)
        for (auto& in : b.insns) {
          if (in.region < 0) continue;
          detail::Footprint& fp = foot[in.region];
          if (in.op == Op::call) {
            fp.add_exact(ret_slot_sym(in.sym), 0);
          } else if (in.is_store()) {
            if (!in.mem_is_reg) {
              fp.add_exact(in.sym, in.moff);
            } else if (val[in.ra].top || val[in.ra].syms.empty()) {
              fp.add_all();
            } else {
              for (auto& s : val[in.ra].syms) fp.add_any(s);
            }
          }
        }
      fn_foot_.insert(foot.begin(), foot.end());
      fn_vals_[fi] = std::move(val);
    }

    // second pass: scope = own region plus all predecessor regions
    std::map<int, std::vector<int>> preds;
    {
      CompiledProgram tmp;
      build_region_infos(tmp);
      for (auto& r : tmp.regions) preds[r.id] = r.preds;
    }
    for (int fi = 0; fi < (int)p_.fns.size(); fi++) {
      Function& f = p_.fns[fi];
      auto& val = fn_vals_[fi];
      for (auto& b : f.blocks)
        for (auto& in : b.insns) {
          if (!in.is_load() || in.region < 0) continue;
          detail::Footprint scope;
          auto add_region = [&](int r) {
            auto it = fn_foot_.find(r);
            if (it != fn_foot_.end()) scope.merge(it->second);
          };
          add_region(in.region);
          for (int pr : preds[in.region]) add_region(pr);
          bool clean;
          if (!in.mem_is_reg) {
            clean = !scope.covers_exact(in.sym, in.moff);
          } else if (val[in.ra].top || val[in.ra].syms.empty()) {
            clean = false;
          } else {
            clean = true;
            for (auto& s : val[in.ra].syms)
              if (scope.covers_sym(s)) clean = false;
          }
          if (clean) in.bypass = true;
        }
    }
  }

  std::map<int, detail::Footprint> fn_foot_;
  std::map<int, std::vector<detail::SymVal>> fn_vals_;
};

inline CompiledProgram compile_program(const Program& source, const SimConfig& cfg) {
  return Regionizer(source, cfg).run();
}

// ---------------------------------------------------------------------------
// static checkpoint coverage check: every region-crossing edge must save the
// target region's live-in set and a recovery pc.  Used by tests as an oracle
// against the constructive stub insertion above.

inline std::vector<std::string> verify_checkpoint_coverage(const CompiledProgram& cp) {
  std::vector<std::string> problems;
  const Program& p = cp.prog;
  std::map<uint32_t, const RegionInfo*> by_pc;
  for (auto& r : cp.regions) by_pc[r.entry_pc] = &r;

  LivenessOpts lo;
  std::map<int, Cfg> cfgs;
  std::map<int, Liveness> lvs;
  // repeat until the per-callee summaries stop changing: one pass per call
  // chain level, regardless of function order in the file
  for (bool stable = false; !stable;) {
    stable = true;
    for (int fi = 0; fi < (int)p.fns.size(); fi++) {
      cfgs[fi] = build_cfg(p.fns[fi]);
      lvs[fi] = compute_liveness(cfgs[fi], lo);
      RegMask in0 = lvs[fi].live_in[0];
      auto it = lo.call_use.find(p.fns[fi].name);
      if (it == lo.call_use.end() || it->second != in0) stable = false;
      lo.call_use[p.fns[fi].name] = in0;
    }
  }

  auto trailing_ckpts = [&](const BasicBlock& b, RegMask& mask, bool& has_pc) {
    mask = 0;
    has_pc = false;
    for (int i = (int)b.insns.size() - 2; i >= 0; i--) {
      const Instruction& in = b.insns[i];
      if (!in.ckpt) break;
      if (in.moff == kRfPcOffset) has_pc = true;
      else if (in.op == Op::store) mask |= reg_bit(in.rd);
    }
  };

  for (int fi = 0; fi < (int)p.fns.size(); fi++) {
    const Function& f = p.fns[fi];
    const Cfg& g = cfgs[fi];
    for (int b = 0; b < g.n; b++) {
      if (!g.reachable[b]) continue;
      const Instruction& t = f.blocks[b].insns.back();
      for (int s : g.succ[b]) {
        uint32_t spc = f.blocks[s].insns[0].pc;
        if (!by_pc.count(spc)) continue;  // not a region entry
        if (t.op == Op::call) continue;   // covered by the callee-entry check
        RegMask mask;
        bool has_pc;
        trailing_ckpts(f.blocks[b], mask, has_pc);
        RegMask need = lvs[fi].live_in[s];
        if ((need & ~mask) || !has_pc)
          problems.push_back("edge " + f.blocks[b].label + "->" + f.blocks[s].label +
                             " in " + f.name + " misses checkpoints");
      }
      if (t.op == Op::call) {
        int callee = p.fn_index.at(t.sym);
        RegMask mask;
        bool has_pc;
        trailing_ckpts(f.blocks[b], mask, has_pc);
        RegMask need = lvs[callee].live_in[0];
        if (b + 1 < g.n) need |= lvs[fi].live_in[b + 1] & ~lo.ret_live;
        if ((need & ~mask) || !has_pc)
          problems.push_back("call to " + t.sym + " in " + f.name +
                             " misses checkpoints");
      }
      if (t.op == Op::jr) {
        // lowered return: both return registers and the pc slot must be
        // saved; the __ret load sits between them so scan the whole block
        bool saw_pc_store = false;
        RegMask rmask = 0;
        for (auto& in : f.blocks[b].insns) {
          if (in.ckpt && in.op == Op::store && in.moff == kRfPcOffset)
            saw_pc_store = true;
          if (in.ckpt && in.op == Op::store && in.moff < (int32_t)kRfPcOffset)
            rmask |= reg_bit(in.rd);
        }
        if ((lo.ret_live & ~rmask) || !saw_pc_store)
          problems.push_back("return in " + f.name + " misses checkpoints");
      }
    }
  }
  return problems;
}

}  // namespace cospec
