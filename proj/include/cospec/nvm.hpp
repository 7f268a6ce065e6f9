#pragma once
// Persistent-memory model: address layout, NVM image, the failure-atomic
// two-phase release as an explicit micro-op schedule, recovery, snapshots.
//
// Address space (byte addresses, word aligned):
//   [0, primary_bytes)        user data, the 'out' range, per-fn return slots
//   [rf_base, rf_base+68)     register-file checkpoint storage: r0..r15 + pc
// The proxy buffer and the release-status word are not program addressable;
// snapshots serialize [primary | proxy entries + count | rf x17 | status].

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "ir.hpp"

namespace cospec {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kRfWords = kNumRegs + 1;  // 16 registers + recovery PC
constexpr uint32_t kRfPcOffset = kNumRegs * kWordBytes;

inline std::string ret_slot_sym(const std::string& fn) { return "__ret_" + fn; }
constexpr const char* kRfSym = "__rf";
constexpr const char* kOutSym = "out";

// ---------------------------------------------------------------------------
// Layout

struct Layout {
  struct Sym {
    std::string name;
    uint32_t addr = 0;   // byte address
    uint32_t words = 0;
  };
  std::vector<Sym> syms;
  std::map<std::string, int> index;
  uint32_t primary_words = 0;
  uint32_t rf_base = 0;        // byte address of __rf
  uint32_t out_base = 0;
  uint32_t out_words = 0;

  uint32_t primary_bytes() const { return primary_words * kWordBytes; }
  const Sym& sym(const std::string& n) const {
    auto it = index.find(n);
    if (it == index.end()) throw SimError("layout: unknown symbol '" + n + "'");
    return syms[it->second];
  }
  // out-of-extent symbol offsets still form addresses; bounds are checked
  // against the full space on access
  uint32_t addr_of(const std::string& n, int32_t off) const {
    return (uint32_t)((int64_t)sym(n).addr + off);
  }
  bool in_out_range(uint32_t a) const {
    return a >= out_base && a < out_base + out_words * kWordBytes;
  }
  bool in_rf_range(uint32_t a) const {
    return a >= rf_base && a < rf_base + kRfWords * kWordBytes;
  }
};

inline Layout build_layout(const Program& p, const SimConfig& cfg) {
  Layout lay;
  uint32_t addr = 0;
  auto add = [&](const std::string& name, uint32_t words) {
    lay.index[name] = (int)lay.syms.size();
    lay.syms.push_back({name, addr, words});
    addr += words * kWordBytes;
  };
  bool has_out = false;
  for (auto& d : p.data) {
    add(d.name, (uint32_t)d.words.size());
    if (d.name == kOutSym) has_out = true;
  }
  if (!has_out) add(kOutSym, (uint32_t)cfg.out_words);
  for (auto& f : p.fns) add(ret_slot_sym(f.name), 1);
  lay.primary_words = addr / kWordBytes;
  lay.rf_base = addr;
  add(kRfSym, kRfWords);
  const Layout::Sym& out = lay.sym(kOutSym);
  lay.out_base = out.addr;
  lay.out_words = out.words;
  return lay;
}

// ---------------------------------------------------------------------------
// NVM image

// release-status word values (two-bit protocol); the one-bit protocol reuses
// the word as a single flag: 0 = clear, 1 = phase 1 complete
constexpr uint32_t kStatusIdle = 0;
constexpr uint32_t kStatusDraining = 1;
constexpr uint32_t kStatusCopying = 2;

struct NvmImage {
  std::vector<uint32_t> primary;
  std::vector<std::pair<uint32_t, uint32_t>> proxy;  // (addr, value), capacity sb_size
  uint32_t proxy_count = 0;
  std::array<uint32_t, kRfWords> rf{};
  uint32_t status = kStatusIdle;
  std::vector<uint32_t> outlog;  // committed writes into the out range (simulation artifact)

  uint32_t rf_base = 0;  // mirrors Layout, kept for routing

  static NvmImage create(const Program& p, const Layout& lay, const SimConfig& cfg) {
    NvmImage m;
    m.primary.assign(lay.primary_words, 0);
    for (auto& d : p.data) {
      uint32_t base = lay.sym(d.name).addr / kWordBytes;
      for (size_t i = 0; i < d.words.size(); i++) m.primary[base + i] = d.words[i];
    }
    m.proxy.assign((size_t)cfg.sb_size, {0, 0});
    m.rf_base = lay.rf_base;
    return m;
  }

  bool addr_valid(uint32_t a) const {
    if (a % kWordBytes != 0) return false;
    return a < primary.size() * kWordBytes ||
           (a >= rf_base && a < rf_base + kRfWords * kWordBytes);
  }
  uint32_t read_word(uint32_t a) const {
    if (!addr_valid(a)) throw SimError("invalid memory read at address " + std::to_string(a));
    if (a >= rf_base) return rf[(a - rf_base) / kWordBytes];
    return primary[a / kWordBytes];
  }
  void write_word(uint32_t a, uint32_t v) {
    if (!addr_valid(a)) throw SimError("invalid memory write at address " + std::to_string(a));
    if (a >= rf_base) rf[(a - rf_base) / kWordBytes] = v;
    else primary[a / kWordBytes] = v;
  }
};

// ---------------------------------------------------------------------------
// Release micro-op schedule
//
// Two-bit protocol:  status:=DRAINING, entry writes, count write,
//                    status:=COPYING, per-entry proxy->primary copies,
//                    status:=IDLE (commit).
// One-bit protocol:  entry writes, count write, flag:=1, copies, flag:=0.
// Every status/flag transition is a single-word atomic NVM write.

enum class RelOpKind : uint8_t {
  status_start,   // two-bit only: status := DRAINING
  p1_entry,       // proxy[i] := (addr, value)
  p1_count,       // proxy_count := n
  p1_done_mark,   // two-bit: status := COPYING; one-bit: flag := 1
  p2_entry,       // primary/rf[proxy[i].addr] := proxy[i].value
  commit,         // two-bit: status := IDLE; one-bit: flag := 0; appends out log
  status_reset,   // recovery after interrupted drain: status := IDLE, proxy ignored
};

struct RelOp {
  RelOpKind kind;
  int cycles;
  double nvm_j;        // NVM energy for this op
  uint32_t index = 0;  // entry index for p1_entry/p2_entry
  uint32_t a = 0, v = 0;
};

inline std::vector<RelOp> build_release_schedule(
    const std::vector<std::pair<uint32_t, uint32_t>>& entries, const SimConfig& cfg) {
  std::vector<RelOp> ops;
  int w = cfg.nvm_write_cycles;
  uint32_t n = (uint32_t)entries.size();
  if (cfg.protocol == Protocol::two_bit)
    ops.push_back({RelOpKind::status_start, w, cfg.nvm_j(w), 0, 0, kStatusDraining});
  for (uint32_t i = 0; i < n; i++)
    ops.push_back({RelOpKind::p1_entry, w, cfg.nvm_j(w), i, entries[i].first, entries[i].second});
  ops.push_back({RelOpKind::p1_count, w, cfg.nvm_j(w), 0, 0, n});
  ops.push_back({RelOpKind::p1_done_mark, w, cfg.nvm_j(w), 0, 0,
                 cfg.protocol == Protocol::two_bit ? kStatusCopying : 1u});
  int copy_cycles = cfg.dma_copy_cycles();
  double copy_j = cfg.nvm_j(cfg.nvm_read_cycles + cfg.nvm_write_cycles);  // data moved, not time
  for (uint32_t i = 0; i < n; i++)
    ops.push_back({RelOpKind::p2_entry, copy_cycles, copy_j, i, 0, 0});
  ops.push_back({RelOpKind::commit, w, cfg.nvm_j(w), 0, 0,
                 cfg.protocol == Protocol::two_bit ? kStatusIdle : 0u});
  return ops;
}

// Applies one micro-op's persistent effect. The commit op also appends the
// release's out-range writes to the output log: logging rides on the atomic
// final status transition so a redone phase 2 can never double-log.
inline void apply_release_op(NvmImage& m, const Layout& lay, const RelOp& op) {
  switch (op.kind) {
    case RelOpKind::status_start:
    case RelOpKind::p1_done_mark:
    case RelOpKind::status_reset:
      m.status = op.v;
      break;
    case RelOpKind::p1_entry:
      m.proxy[op.index] = {op.a, op.v};
      break;
    case RelOpKind::p1_count:
      m.proxy_count = op.v;
      break;
    case RelOpKind::p2_entry: {
      auto [a, v] = m.proxy[op.index];
      m.write_word(a, v);
      break;
    }
    case RelOpKind::commit:
      m.status = op.v;
      for (uint32_t i = 0; i < m.proxy_count; i++)
        if (lay.in_out_range(m.proxy[i].first)) m.outlog.push_back(m.proxy[i].second);
      break;
  }
}

// ---------------------------------------------------------------------------
// Recovery
//
// Decides from the status word what must be redone, then restores the 16
// registers and the recovery PC from RF storage (17 NVM reads + jump).
// Phase-2 redo replays every proxy entry; it is idempotent, so a failure
// during recovery simply repeats it.

enum class RecoveryCase : uint8_t { clean, drain_interrupted, copy_interrupted };

struct RecoveryPlan {
  RecoveryCase kind = RecoveryCase::clean;
  std::vector<RelOp> ops;   // persistent micro-steps: redo copies + status reset
  int restore_cycles = 0;   // 17 reads + jump
  double restore_nvm_j = 0;
};

inline RecoveryPlan plan_recovery(const NvmImage& m, const SimConfig& cfg) {
  RecoveryPlan plan;
  int w = cfg.nvm_write_cycles;
  if (cfg.protocol == Protocol::two_bit) {
    if (m.status == kStatusDraining) {
      plan.kind = RecoveryCase::drain_interrupted;  // proxy content is garbage: ignore it
      plan.ops.push_back({RelOpKind::status_reset, w, cfg.nvm_j(w), 0, 0, kStatusIdle});
    } else if (m.status == kStatusCopying) {
      plan.kind = RecoveryCase::copy_interrupted;
    }
  } else {
    if (m.status == 1) plan.kind = RecoveryCase::copy_interrupted;
  }
  if (plan.kind == RecoveryCase::copy_interrupted && !cfg.debug_skip_phase2_redo) {
    int copy_cycles = cfg.dma_copy_cycles();
    double copy_j = cfg.nvm_j(cfg.nvm_read_cycles + cfg.nvm_write_cycles);
    for (uint32_t i = 0; i < m.proxy_count; i++)
      plan.ops.push_back({RelOpKind::p2_entry, copy_cycles, copy_j, i, 0, 0});
  }
  if (plan.kind == RecoveryCase::copy_interrupted)
    plan.ops.push_back({RelOpKind::commit, w, cfg.nvm_j(w), 0, 0,
                        cfg.protocol == Protocol::two_bit ? kStatusIdle : 0u});
  plan.restore_cycles = kRfWords * cfg.nvm_read_cycles + 1;  // reads + jump
  plan.restore_nvm_j = kRfWords * cfg.nvm_j(cfg.nvm_read_cycles);
  return plan;
}

// ---------------------------------------------------------------------------
// Snapshot (flat binary, little endian):
//   magic "COSPECNV", u32 version, u32 primary_words, u32 proxy_capacity,
//   primary words, proxy (addr,value) pairs, u32 proxy_count, rf[17],
//   u32 status, u32 rf_base

namespace detail {
inline void put_u32(std::ostream& o, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xFF), (unsigned char)((v >> 8) & 0xFF),
                        (unsigned char)((v >> 16) & 0xFF), (unsigned char)((v >> 24) & 0xFF)};
  o.write((const char*)b, 4);
}
inline uint32_t get_u32(std::istream& i) {
  unsigned char b[4];
  i.read((char*)b, 4);
  if (!i) throw SimError("truncated snapshot");
  return (uint32_t)b[0] | ((uint32_t)b[1] << 8) | ((uint32_t)b[2] << 16) | ((uint32_t)b[3] << 24);
}
}  // namespace detail

inline void dump_snapshot(const NvmImage& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SimError("cannot open snapshot file for write: " + path);
  f.write("COSPECNV", 8);
  detail::put_u32(f, 1);
  detail::put_u32(f, (uint32_t)m.primary.size());
  detail::put_u32(f, (uint32_t)m.proxy.size());
  for (uint32_t w : m.primary) detail::put_u32(f, w);
  for (auto& [a, v] : m.proxy) {
    detail::put_u32(f, a);
    detail::put_u32(f, v);
  }
  detail::put_u32(f, m.proxy_count);
  for (uint32_t w : m.rf) detail::put_u32(f, w);
  detail::put_u32(f, m.status);
  detail::put_u32(f, m.rf_base);
}

inline NvmImage restore_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SimError("cannot open snapshot file: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "COSPECNV", 8) != 0) throw SimError("bad snapshot magic");
  uint32_t ver = detail::get_u32(f);
  if (ver != 1) throw SimError("unsupported snapshot version");
  NvmImage m;
  uint32_t np = detail::get_u32(f), cap = detail::get_u32(f);
  m.primary.resize(np);
  for (auto& w : m.primary) w = detail::get_u32(f);
  m.proxy.resize(cap);
  for (auto& [a, v] : m.proxy) {
    a = detail::get_u32(f);
    v = detail::get_u32(f);
  }
  m.proxy_count = detail::get_u32(f);
  for (auto& w : m.rf) w = detail::get_u32(f);
  m.status = detail::get_u32(f);
  m.rf_base = detail::get_u32(f);
  return m;
}

}  // namespace cospec
