// Layout, NVM image, the two-phase release schedule, recovery planning, and
// snapshot serialization. Cycle counts are checked against the closed forms
// they must follow, and every recovery case is replayed on a real image.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include <cospec/config.hpp>
#include <cospec/ir.hpp>
#include <cospec/nvm.hpp>

#include "oracles.hpp"

using namespace cospec;

namespace {

int sum_cycles(const std::vector<RelOp>& ops) {
  int s = 0;
  for (auto& op : ops) s += op.cycles;
  return s;
}

int count_kind(const std::vector<RelOp>& ops, RelOpKind k) {
  int c = 0;
  for (auto& op : ops)
    if (op.kind == k) c++;
  return c;
}

std::vector<std::pair<uint32_t, uint32_t>> dummy_entries(int n) {
  std::vector<std::pair<uint32_t, uint32_t>> e;
  for (int i = 0; i < n; i++) e.push_back({(uint32_t)(4 * i), (uint32_t)i});
  return e;
}

}  // namespace

TEST_CASE("two-bit release schedule: op counts and cycle totals") {
  SimConfig cfg;
  for (int n : {1, 5, 8, 20}) {
    auto ops = build_release_schedule(dummy_entries(n), cfg);
    INFO("n = " << n);
    CHECK((int)ops.size() == 2 * n + 4);
    CHECK(sum_cycles(ops) == 7 * n + 12);
    CHECK(count_kind(ops, RelOpKind::status_start) == 1);
    CHECK(count_kind(ops, RelOpKind::p1_entry) == n);
    CHECK(count_kind(ops, RelOpKind::p1_count) == 1);
    CHECK(count_kind(ops, RelOpKind::p1_done_mark) == 1);
    CHECK(count_kind(ops, RelOpKind::p2_entry) == n);
    CHECK(count_kind(ops, RelOpKind::commit) == 1);
    // phase order: everything up to the mark is phase 1
    CHECK(ops.front().kind == RelOpKind::status_start);
    CHECK(ops.back().kind == RelOpKind::commit);
  }

  // the 20-entry split: 69 cycles of drain, 83 of copy + commit
  auto ops = build_release_schedule(dummy_entries(20), cfg);
  int p1 = 0, p2 = 0;
  bool marked = false;
  for (auto& op : ops) {
    (marked ? p2 : p1) += op.cycles;
    if (op.kind == RelOpKind::p1_done_mark) marked = true;
  }
  CHECK(p1 == 69);
  CHECK(p2 == 83);
  CHECK(p1 + p2 == 152);
}

TEST_CASE("one-bit release schedule drops the status-start write") {
  SimConfig cfg;
  cfg.protocol = Protocol::one_bit;
  for (int n : {1, 5, 8, 20}) {
    auto ops = build_release_schedule(dummy_entries(n), cfg);
    INFO("n = " << n);
    CHECK((int)ops.size() == 2 * n + 3);
    CHECK(sum_cycles(ops) == 7 * n + 9);
    CHECK(count_kind(ops, RelOpKind::status_start) == 0);
  }
  auto ops = build_release_schedule(dummy_entries(3), cfg);
  for (auto& op : ops) {
    if (op.kind == RelOpKind::p1_done_mark) CHECK(op.v == 1);
    if (op.kind == RelOpKind::commit) CHECK(op.v == 0);
  }
}

TEST_CASE("dma accelerates only the copy phase") {
  SimConfig cfg;
  CHECK(cfg.dma_copy_cycles() == 4);  // read 1 + write 3
  cfg.dma = true;
  cfg.dma_factor = 4;
  CHECK(cfg.dma_copy_cycles() == 1);
  cfg.dma_factor = 3;
  CHECK(cfg.dma_copy_cycles() == 2);  // integer ceiling
  cfg.dma_factor = 1;
  CHECK(cfg.dma_copy_cycles() == 4);

  cfg.dma_factor = 4;
  auto dma_ops = build_release_schedule(dummy_entries(20), cfg);
  SimConfig cpu;
  auto cpu_ops = build_release_schedule(dummy_entries(20), cpu);
  auto copy_cycles = [](const std::vector<RelOp>& ops) {
    int s = 0;
    for (auto& op : ops)
      if (op.kind == RelOpKind::p2_entry) s += op.cycles;
    return s;
  };
  // 20 copies: 80 processor cycles against 20 with the engine, a quarter
  CHECK(copy_cycles(cpu_ops) == 80);
  CHECK(copy_cycles(dma_ops) == 20);
  // drain-side ops keep their plain write latency
  for (auto& op : dma_ops)
    if (op.kind != RelOpKind::p2_entry) CHECK(op.cycles == 3);
}

namespace {

struct Rig {
  Program p;
  Layout lay;
  NvmImage img;
  std::vector<std::pair<uint32_t, uint32_t>> entries;

  explicit Rig(const SimConfig& cfg) {
    p = parse_program("data a = [1, 2]\nfn main { e: halt }");
    validate(p, true);
    lay = build_layout(p, cfg);
    img = NvmImage::create(p, lay, cfg);
    entries = {{lay.addr_of("a", 0), 10}, {lay.addr_of("out", 0), 99}};
  }
};

}  // namespace

TEST_CASE("release applies through the proxy and logs output on commit") {
  SimConfig cfg;
  Rig rig(cfg);
  auto ops = build_release_schedule(rig.entries, cfg);
  for (auto& op : ops) apply_release_op(rig.img, rig.lay, op);
  CHECK(rig.img.read_word(rig.lay.addr_of("a", 0)) == 10);
  CHECK(rig.img.read_word(rig.lay.addr_of("a", 4)) == 2);  // untouched neighbor
  CHECK(rig.img.read_word(rig.lay.addr_of("out", 0)) == 99);
  CHECK(rig.img.status == kStatusIdle);
  CHECK(rig.img.proxy_count == 2);
  // only the out-range word is logged, exactly once, at the commit
  CHECK(rig.img.outlog == std::vector<uint32_t>{99});
}

TEST_CASE("recovery after an interrupted drain discards the half-written proxy") {
  SimConfig cfg;
  Rig rig(cfg);
  auto ops = build_release_schedule(rig.entries, cfg);
  // stop after the status write and the first entry: count not yet written
  for (int i = 0; i < 2; i++) apply_release_op(rig.img, rig.lay, ops[i]);
  CHECK(rig.img.status == kStatusDraining);
  CHECK(rig.img.proxy_count == 0);

  RecoveryPlan plan = plan_recovery(rig.img, cfg);
  CHECK(plan.kind == RecoveryCase::drain_interrupted);
  REQUIRE(plan.ops.size() == 1);
  CHECK(plan.ops[0].kind == RelOpKind::status_reset);
  CHECK(plan.restore_cycles == 18);  // 17 register-file reads plus the jump
  for (auto& op : plan.ops) apply_release_op(rig.img, rig.lay, op);
  CHECK(rig.img.status == kStatusIdle);
  // primary memory never saw the aborted release
  CHECK(rig.img.read_word(rig.lay.addr_of("a", 0)) == 1);
  CHECK(rig.img.read_word(rig.lay.addr_of("out", 0)) == 0);
  CHECK(rig.img.outlog.empty());
}

TEST_CASE("recovery after an interrupted copy replays to the committed state") {
  SimConfig cfg;

  Rig done(cfg);
  auto all = build_release_schedule(done.entries, cfg);
  for (auto& op : all) apply_release_op(done.img, done.lay, op);

  Rig cut(cfg);
  auto ops = build_release_schedule(cut.entries, cfg);
  // run through the mark and the first copy, then fail
  int upto = 0;
  for (auto& op : ops) {
    apply_release_op(cut.img, cut.lay, op);
    upto++;
    if (op.kind == RelOpKind::p2_entry) break;
  }
  CHECK(cut.img.status == kStatusCopying);
  CHECK(upto < (int)ops.size());

  RecoveryPlan plan = plan_recovery(cut.img, cfg);
  CHECK(plan.kind == RecoveryCase::copy_interrupted);
  // every proxy entry is replayed (idempotent), then the commit
  CHECK(count_kind(plan.ops, RelOpKind::p2_entry) == 2);
  CHECK(plan.ops.back().kind == RelOpKind::commit);
  for (auto& op : plan.ops) apply_release_op(cut.img, cut.lay, op);

  CHECK(cut.img.primary == done.img.primary);
  CHECK(cut.img.outlog == done.img.outlog);
  CHECK(cut.img.status == kStatusIdle);
}

TEST_CASE("an idle image recovers clean") {
  SimConfig cfg;
  Rig rig(cfg);
  RecoveryPlan plan = plan_recovery(rig.img, cfg);
  CHECK(plan.kind == RecoveryCase::clean);
  CHECK(plan.ops.empty());
  CHECK(plan.restore_cycles == 18);
  CHECK(plan.restore_nvm_j == Catch::Approx(17 * cfg.nvm_j(cfg.nvm_read_cycles)));
}

TEST_CASE("one-bit protocol recovers the same three ways") {
  SimConfig cfg;
  cfg.protocol = Protocol::one_bit;

  // uninterrupted reference
  Rig done(cfg);
  auto all = build_release_schedule(done.entries, cfg);
  for (auto& op : all) apply_release_op(done.img, done.lay, op);

  // a failure before the flag flips loses the drain but corrupts nothing
  Rig pre(cfg);
  auto ops = build_release_schedule(pre.entries, cfg);
  for (auto& op : ops) {
    if (op.kind == RelOpKind::p1_done_mark) break;
    apply_release_op(pre.img, pre.lay, op);
  }
  CHECK(pre.img.status == 0);
  RecoveryPlan p1 = plan_recovery(pre.img, cfg);
  CHECK(p1.kind == RecoveryCase::clean);
  CHECK(p1.ops.empty());
  CHECK(pre.img.read_word(pre.lay.addr_of("a", 0)) == 1);

  // a failure mid-copy replays to the committed state
  Rig cut(cfg);
  for (auto& op : ops) {
    apply_release_op(cut.img, cut.lay, op);
    if (op.kind == RelOpKind::p2_entry) break;
  }
  CHECK(cut.img.status == 1);
  RecoveryPlan p2 = plan_recovery(cut.img, cfg);
  CHECK(p2.kind == RecoveryCase::copy_interrupted);
  for (auto& op : p2.ops) apply_release_op(cut.img, cut.lay, op);
  CHECK(cut.img.primary == done.img.primary);
  CHECK(cut.img.outlog == done.img.outlog);
  CHECK(cut.img.status == 0);
}

TEST_CASE("the phase-2 redo debug hook plans a commit without the copies") {
  SimConfig cfg;
  cfg.debug_skip_phase2_redo = true;
  Rig cut(cfg);
  auto ops = build_release_schedule(cut.entries, cfg);
  for (auto& op : ops) {
    apply_release_op(cut.img, cut.lay, op);
    if (op.kind == RelOpKind::p1_done_mark) break;
  }
  RecoveryPlan plan = plan_recovery(cut.img, cfg);
  CHECK(plan.kind == RecoveryCase::copy_interrupted);
  REQUIRE(plan.ops.size() == 1);  // the copies are deliberately missing
  CHECK(plan.ops[0].kind == RelOpKind::commit);
}

TEST_CASE("layout packs data, output range, return slots, then registers") {
  SimConfig cfg;
  Program p = parse_program("data a = [1, 2]\ndata b = [5]\nfn main { e: halt }");
  validate(p, true);
  Layout lay = build_layout(p, cfg);

  CHECK(lay.sym("a").addr == 0);
  CHECK(lay.sym("b").addr == 8);
  CHECK(lay.sym("out").addr == 12);
  CHECK(lay.sym("out").words == (uint32_t)cfg.out_words);
  CHECK(lay.sym("__ret_main").addr == 12 + 4u * cfg.out_words);
  CHECK(lay.primary_words == 2 + 1 + (uint32_t)cfg.out_words + 1);
  CHECK(lay.rf_base == lay.primary_words * 4);
  CHECK(lay.sym("__rf").addr == lay.rf_base);

  CHECK(lay.in_out_range(lay.out_base));
  CHECK(lay.in_out_range(lay.out_base + 4 * (cfg.out_words - 1)));
  CHECK_FALSE(lay.in_out_range(lay.out_base + 4 * cfg.out_words));
  CHECK(lay.in_rf_range(lay.rf_base));
  CHECK(lay.in_rf_range(lay.rf_base + 64));
  CHECK_FALSE(lay.in_rf_range(lay.rf_base + 68));

  CHECK(lay.addr_of("b", -4) == 4);  // negative offsets form addresses too
  CHECK_THROWS_AS(lay.sym("nope"), SimError);

  // an explicit out declaration wins over the implicit range
  Program q = parse_program("data out = [0 x 4]\nfn main { e: halt }");
  validate(q, true);
  Layout lq = build_layout(q, cfg);
  CHECK(lq.sym("out").words == 4);
  CHECK(lq.out_words == 4);
}

TEST_CASE("the image rejects misaligned and out-of-range accesses") {
  SimConfig cfg;
  Rig rig(cfg);
  NvmImage& m = rig.img;
  CHECK_THROWS_AS(m.read_word(2), SimError);
  CHECK_THROWS_AS(m.write_word(6, 1), SimError);
  uint32_t end = m.rf_base + kRfWords * 4;
  CHECK(m.addr_valid(m.rf_base));
  CHECK(m.addr_valid(end - 4));
  CHECK_THROWS_AS(m.read_word(end), SimError);
  CHECK_THROWS_AS(m.write_word(end + 4, 1), SimError);
  // register-file words route to the rf array, not primary
  m.write_word(m.rf_base + 4, 77);
  CHECK(m.rf[1] == 77);
  CHECK(m.read_word(m.rf_base + 4) == 77);
}

TEST_CASE("snapshots round-trip bit for bit") {
  SimConfig cfg;
  Rig rig(cfg);
  auto ops = build_release_schedule(rig.entries, cfg);
  // leave a half-finished copy in the image so every field is non-trivial
  for (auto& op : ops) {
    apply_release_op(rig.img, rig.lay, op);
    if (op.kind == RelOpKind::p2_entry) break;
  }
  rig.img.rf[3] = 1234;
  rig.img.rf[16] = 48;

  std::string path1 = "/tmp/cospec_test_snap1.bin";
  std::string path2 = "/tmp/cospec_test_snap2.bin";
  dump_snapshot(rig.img, path1);
  NvmImage back = restore_snapshot(path1);
  CHECK(back.primary == rig.img.primary);
  CHECK(back.proxy == rig.img.proxy);
  CHECK(back.proxy_count == rig.img.proxy_count);
  CHECK(back.rf == rig.img.rf);
  CHECK(back.status == rig.img.status);
  CHECK(back.rf_base == rig.img.rf_base);
  // the output log is a simulation artifact, not machine state
  CHECK(back.outlog.empty());

  dump_snapshot(back, path2);
  CHECK(oracle::slurp_file(path1) == oracle::slurp_file(path2));
  std::remove(path1.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("snapshot restore rejects damaged files") {
  SimConfig cfg;
  Rig rig(cfg);
  std::string good = "/tmp/cospec_test_snap_good.bin";
  dump_snapshot(rig.img, good);
  std::string bytes = oracle::slurp_file(good);

  auto spit = [](const std::string& path, const std::string& data) {
    std::ofstream f(path, std::ios::binary);
    f.write(data.data(), (std::streamsize)data.size());
  };

  std::string bad = "/tmp/cospec_test_snap_bad.bin";
  spit(bad, "NOTMAGIC" + bytes.substr(8));
  CHECK_THROWS_AS(restore_snapshot(bad), SimError);

  spit(bad, bytes.substr(0, 20));
  CHECK_THROWS_AS(restore_snapshot(bad), SimError);

  std::string vers = bytes;
  vers[8] = 2;  // unsupported version
  spit(bad, vers);
  CHECK_THROWS_AS(restore_snapshot(bad), SimError);

  CHECK_THROWS_AS(restore_snapshot("/tmp/cospec_no_such_snapshot.bin"), SimError);
  std::remove(good.c_str());
  std::remove(bad.c_str());
}

TEST_CASE("buffer geometry must fit a register checkpoint in one half") {
  SimConfig cfg;
  CHECK(cfg.sb_half() == 20);
  CHECK(cfg.sb_half() >= kRfWords);
  cfg.validate();

  cfg.sb_size = 34;  // smallest legal: one half holds exactly 17
  cfg.validate();
  cfg.sb_size = 32;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.sb_size = 35;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = SimConfig{};
  cfg.dma_factor = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SimConfig{};
  cfg.v_on = 1.7;
  cfg.v_off = 1.8;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config parsing: keys, comments, and errors") {
  SimConfig cfg;
  load_config_text(cfg,
                   "sb_size = 36   # trailing comment\n"
                   "\n"
                   "ilp = off\n"
                   "protocol = one-bit\n"
                   "search = cam\n",
                   "test");
  CHECK(cfg.sb_size == 36);
  CHECK_FALSE(cfg.ilp);
  CHECK(cfg.protocol == Protocol::one_bit);
  CHECK(cfg.search == SearchScheme::cam);

  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("ilp", "maybe"), ConfigError);
  CHECK_THROWS_AS(cfg.set("sb_size", "forty"), ConfigError);
  CHECK_THROWS_AS(cfg.set("protocol", "three-bit"), ConfigError);
  CHECK_THROWS_AS(load_config_text(cfg, "sb_size 40\n", "test"), ConfigError);
  CHECK_THROWS_AS(load_config_file(cfg, "/tmp/cospec_no_such_config.cfg"),
                  ConfigError);
}

TEST_CASE("nvm energy follows access time at the configured power") {
  SimConfig cfg;
  // 2 mW for 3 cycles of 40 ns
  CHECK(cfg.nvm_j(3) == Catch::Approx(2.0e-3 * 3 * 40e-9));
  CHECK(cfg.nvm_j(1) == Catch::Approx(2.0e-3 * 40e-9));
  CHECK(cfg.cycles_to_us(25) == Catch::Approx(1.0));
  CHECK(cfg.us_to_cycles(2.0) == Catch::Approx(50.0));
}
