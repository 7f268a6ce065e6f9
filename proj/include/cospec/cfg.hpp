#pragma once
// Per-function CFG: successors, reverse postorder, dominators (iterative
// idom intersection over RPO), natural loop headers, liveness as 16-bit
// register masks. Irreducible control flow is rejected: region budget
// analysis needs every cycle to pass through a dominating loop header.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ir.hpp"

namespace cospec {

using RegMask = uint32_t;  // bit i = register ri

inline RegMask reg_bit(int r) { return r < 0 ? 0u : (1u << r); }

struct Cfg {
  const Function* fn = nullptr;
  int n = 0;
  std::vector<std::vector<int>> succ, pred;
  std::vector<bool> reachable;
  std::vector<int> rpo;        // reachable blocks in reverse postorder
  std::vector<int> rpo_pos;    // block -> index in rpo, -1 if unreachable
  std::vector<int> idom;       // immediate dominator; entry maps to itself
  std::vector<std::pair<int, int>> back_edges;  // (tail, header)
  std::set<int> loop_headers;

  bool dominates(int a, int b) const {
    while (true) {
      if (a == b) return true;
      if (b == 0 || idom[b] == b) return a == b;
      b = idom[b];
    }
  }
};

inline Cfg build_cfg(const Function& f) {
  Cfg g;
  g.fn = &f;
  g.n = (int)f.blocks.size();
  g.succ.assign(g.n, {});
  g.pred.assign(g.n, {});
  for (int bi = 0; bi < g.n; bi++) {
    const Instruction& t = f.blocks[bi].insns.back();
    switch (t.op) {
      case Op::jump:
        g.succ[bi].push_back(f.block_index.at(t.sym));
        break;
      case Op::call:
        g.succ[bi].push_back(bi + 1);  // intraprocedural fall-through
        break;
      case Op::ret:
      case Op::halt:
      case Op::jr:
        break;
      default:
        if (op_is_branch(t.op)) {
          g.succ[bi].push_back(bi + 1);                       // not taken
          int tgt = f.block_index.at(t.sym);
          if (tgt != bi + 1) g.succ[bi].push_back(tgt);       // taken
        }
        break;
    }
  }
  for (int b = 0; b < g.n; b++)
    for (int s : g.succ[b]) g.pred[s].push_back(b);

  // reachability + postorder from entry block 0
  g.reachable.assign(g.n, false);
  std::vector<int> post;
  {
    std::vector<int> color(g.n, 0);
    std::vector<std::pair<int, size_t>> stack{{0, 0}};
    color[0] = 1;
    g.reachable[0] = true;
    while (!stack.empty()) {
      auto& [b, i] = stack.back();
      if (i < g.succ[b].size()) {
        int s = g.succ[b][i++];
        if (!color[s]) {
          color[s] = 1;
          g.reachable[s] = true;
          stack.push_back({s, 0});
        }
      } else {
        post.push_back(b);
        stack.pop_back();
      }
    }
  }
  g.rpo.assign(post.rbegin(), post.rend());
  g.rpo_pos.assign(g.n, -1);
  for (int i = 0; i < (int)g.rpo.size(); i++) g.rpo_pos[g.rpo[i]] = i;

  // iterative idom computation (intersect along RPO until fixed point)
  g.idom.assign(g.n, -1);
  g.idom[0] = 0;
  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (g.rpo_pos[a] > g.rpo_pos[b]) a = g.idom[a];
      while (g.rpo_pos[b] > g.rpo_pos[a]) b = g.idom[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int b : g.rpo) {
      if (b == 0) continue;
      int new_idom = -1;
      for (int p : g.pred[b]) {
        if (!g.reachable[p] || g.idom[p] < 0) continue;
        new_idom = new_idom < 0 ? p : intersect(p, new_idom);
      }
      if (new_idom >= 0 && g.idom[b] != new_idom) {
        g.idom[b] = new_idom;
        changed = true;
      }
    }
  }

  // back edges: tail -> header where header dominates tail
  for (int b : g.rpo)
    for (int s : g.succ[b])
      if (g.reachable[s] && g.dominates(s, b)) {
        g.back_edges.push_back({b, s});
        g.loop_headers.insert(s);
      }

  // reducibility: forward edges alone must be acyclic (Kahn over reachable set)
  {
    std::set<std::pair<int, int>> back(g.back_edges.begin(), g.back_edges.end());
    std::vector<int> indeg(g.n, 0);
    int live = 0;
    for (int b = 0; b < g.n; b++) {
      if (!g.reachable[b]) continue;
      live++;
      for (int s : g.succ[b])
        if (g.reachable[s] && !back.count({b, s})) indeg[s]++;
    }
    std::vector<int> q;
    for (int b = 0; b < g.n; b++)
      if (g.reachable[b] && indeg[b] == 0) q.push_back(b);
    int seen = 0;
    while (!q.empty()) {
      int b = q.back();
      q.pop_back();
      seen++;
      for (int s : g.succ[b])
        if (g.reachable[s] && !back.count({b, s}) && --indeg[s] == 0) q.push_back(s);
    }
    if (seen != live)
      throw ValidateError("irreducible control flow in fn " + f.name +
                          " (a cycle does not pass through a dominating header)");
  }
  return g;
}

// ---------------------------------------------------------------------------
// Liveness

struct LivenessOpts {
  std::map<std::string, RegMask> call_use;  // per-callee entry live-in
  RegMask default_call_use = 0xF;           // r0..r3 when callee unknown
  RegMask ret_live = 0x3;                   // r0,r1 live at ret / lowered jr
};

inline void insn_use_def(const Instruction& in, const LivenessOpts& o, RegMask& use,
                         RegMask& def) {
  use = def = 0;
  switch (in.op) {
    case Op::mov:
      if (!in.b_is_imm) use |= reg_bit(in.ra);
      def |= reg_bit(in.rd);
      break;
    case Op::la:
      def |= reg_bit(in.rd);
      break;
    case Op::load:
      if (in.mem_is_reg) use |= reg_bit(in.ra);
      def |= reg_bit(in.rd);
      break;
    case Op::store:
      use |= reg_bit(in.rd);
      if (in.mem_is_reg) use |= reg_bit(in.ra);
      break;
    case Op::sti:
      if (in.mem_is_reg) use |= reg_bit(in.ra);
      break;
    case Op::jump:
    case Op::halt:
    case Op::ret:
      break;
    case Op::jr:
      use |= reg_bit(in.ra);
      break;
    case Op::call: {
      auto it = o.call_use.find(in.sym);
      use |= it != o.call_use.end() ? it->second : o.default_call_use;
      // no kill: callee effects on r0/r1 are handled by the ret_live convention
      break;
    }
    default:
      if (op_is_alu(in.op)) {
        use |= reg_bit(in.ra);
        if (!in.b_is_imm) use |= reg_bit(in.rb);
        def |= reg_bit(in.rd);
      } else if (op_is_branch(in.op)) {
        use |= reg_bit(in.ra) | reg_bit(in.rb);
      }
      break;
  }
}

struct Liveness {
  std::vector<RegMask> live_in, live_out;  // per block
};

inline Liveness compute_liveness(const Cfg& g, const LivenessOpts& o) {
  const Function& f = *g.fn;
  std::vector<RegMask> use(g.n, 0), def(g.n, 0);
  for (int b = 0; b < g.n; b++) {
    RegMask u = 0, d = 0;
    for (auto& in : f.blocks[b].insns) {
      RegMask iu, id;
      insn_use_def(in, o, iu, id);
      u |= iu & ~d;
      d |= id;
    }
    use[b] = u;
    def[b] = d;
  }
  auto exit_mask = [&](int b) -> RegMask {
    Op t = f.blocks[b].insns.back().op;
    if (t == Op::ret || t == Op::jr) return o.ret_live;
    return 0;  // halt
  };
  Liveness lv;
  lv.live_in.assign(g.n, 0);
  lv.live_out.assign(g.n, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = g.rpo.rbegin(); it != g.rpo.rend(); ++it) {
      int b = *it;
      RegMask out = g.succ[b].empty() ? exit_mask(b) : 0;
      for (int s : g.succ[b]) out |= lv.live_in[s];
      RegMask in = use[b] | (out & ~def[b]);
      if (out != lv.live_out[b] || in != lv.live_in[b]) {
        lv.live_out[b] = out;
        lv.live_in[b] = in;
        changed = true;
      }
    }
  }
  return lv;
}

// live registers just before instruction `idx` of block `b`
inline RegMask live_before(const Cfg& g, const Liveness& lv, const LivenessOpts& o, int b,
                           int idx) {
  const auto& insns = g.fn->blocks[b].insns;
  RegMask live = lv.live_out[b];
  if (g.succ[b].empty()) {
    Op t = insns.back().op;
    live = (t == Op::ret || t == Op::jr) ? o.ret_live : 0;
  }
  for (int i = (int)insns.size() - 1; i >= idx; i--) {
    RegMask u, d;
    insn_use_def(insns[i], o, u, d);
    live = (live & ~d) | u;
  }
  return live;
}

inline int popcount16(RegMask m) { return __builtin_popcount(m & 0xFFFF); }

}  // namespace cospec
