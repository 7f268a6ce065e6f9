// Parser, validator, printer, flat layout.

#include <catch2/catch_amalgamated.hpp>

#include <cospec/ir.hpp>

#include "oracles.hpp"

using namespace cospec;

TEST_CASE("minimal program parses") {
  Program p = parse_program("fn main { L0: store r1, out, 0; halt }");
  REQUIRE(p.fns.size() == 1);
  REQUIRE(p.fns[0].name == "main");
  REQUIRE(p.fns[0].blocks.size() == 1);
  REQUIRE(p.fns[0].blocks[0].insns.size() == 2);
  REQUIRE(p.fns[0].blocks[0].insns[0].op == Op::store);
  REQUIRE(p.fns[0].blocks[0].insns[1].op == Op::halt);
  validate(p, true);
}

TEST_CASE("read-modify-write micro program shape") {
  Program p = oracle::load_corpus("increment");
  REQUIRE(p.fns.size() == 1);
  REQUIRE(p.fns[0].blocks.size() == 1);
  REQUIRE(p.fns[0].blocks[0].insns.size() == 4);
  REQUIRE(p.data.size() == 1);
  REQUIRE(p.data[0].name == "i");
  REQUIRE(p.data[0].words == std::vector<uint32_t>{0});
}

TEST_CASE("data repeat form expands") {
  Program p = parse_program(
      "data z = [7 x 3, 1]\n"
      "data w = [0 x 2]\n"
      "fn main { e: halt }");
  REQUIRE(p.data[0].words == std::vector<uint32_t>({7, 7, 7, 1}));
  REQUIRE(p.data[1].words == std::vector<uint32_t>({0, 0}));
}

TEST_CASE("negative immediates and offsets parse") {
  Program p = parse_program(
      "data d = [-3]\n"
      "fn main { e: mov r1, -5\n la r2, d, 0\n load r3, [r2+4]\n load r4, [r2-4]\n halt }");
  auto& b = p.fns[0].blocks[0];
  REQUIRE((int32_t)b.insns[0].imm == -5);
  REQUIRE(b.insns[2].moff == 4);
  REQUIRE(b.insns[3].moff == -4);
  REQUIRE((int32_t)p.data[0].words[0] == -3);
}

TEST_CASE("parse errors carry line numbers") {
  CHECK_THROWS_AS(parse_program("fn main { e: frob r1, r2\n halt }"), ParseError);
  CHECK_THROWS_AS(parse_program("fn main { e: mov r16, 0\n halt }"), ParseError);
  CHECK_THROWS_AS(parse_program("fn helper { e: halt }"), ParseError);  // no main
  CHECK_THROWS_AS(parse_program("fn main { e: halt\n e: halt }"), ParseError);
  CHECK_THROWS_AS(parse_program("fn main { mov r1, 0\n e: halt }"), ParseError);
  CHECK_THROWS_AS(parse_program("data d = []\nfn main { e: halt }"), ParseError);
  CHECK_THROWS_AS(parse_program("fn main { e: mov r1, 99999999999999999999999\n halt }"),
                  ParseError);

  try {
    parse_program("fn main {\ne:\n  halt\n  badop\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 4);
  }
}

TEST_CASE("validator rejects malformed programs") {
  auto bad = [](const std::string& src) {
    Program p = parse_program(src);
    CHECK_THROWS_AS(validate(p, true), ValidateError);
  };
  // branch into nowhere is caught at validation
  bad("fn main { e: beq r1, r2, nowhere\n x: halt }");
  // terminator mid-block
  bad("fn main { e: halt\n mov r1, 0\n halt }");
  // block without terminator
  bad("fn main { e: mov r1, 0\n f: halt }");
  // r15 reserved
  bad("fn main { e: mov r15, 0\n halt }");
  // compiler-only suffixes
  bad("data a = [0]\nfn main { e: load r1, a, 0 !bypass\n halt }");
  bad("data a = [0]\nfn main { e: store r1, a, 0 !ckpt\n halt }");
  // reserved symbol prefix
  bad("data __x = [0]\nfn main { e: halt }");
  // unknown data symbol
  bad("fn main { e: load r1, nosym, 0\n halt }");
  // misaligned offset
  bad("data a = [0]\nfn main { e: load r1, a, 2\n halt }");
  // call to undefined fn
  bad("fn main { e: call nofn\n x: halt }");
  // direct recursion
  bad("fn main { e: call main\n x: halt }");
  // mutual recursion
  bad("fn main { e: call a\n x: halt }\n"
      "fn a { e: call b\n x: ret }\n"
      "fn b { e: call a\n x: ret }");
  // fall-through off the end
  bad("fn main { e: mov r1, 0\n beq r1, r1, e }");
  // ret in main
  bad("fn main { e: ret }");
  // main never halts
  bad("fn main { e: jump e }");
}

TEST_CASE("out is implicitly known, other undeclared symbols are not") {
  Program p = parse_program("fn main { e: sti 1, out, 0\n halt }");
  validate(p, true);
}

TEST_CASE("printer round-trips to a fixpoint on the corpus") {
  for (const auto& name : oracle::corpus_programs()) {
    INFO("program " << name);
    Program p1 = oracle::load_corpus(name);
    std::string s1 = print_program(p1);
    Program p2 = parse_program(s1);
    validate(p2, true);
    std::string s2 = print_program(p2);
    CHECK(s1 == s2);
  }
}

TEST_CASE("finalize lays main out first and resolves targets") {
  Program p = parse_program(
      "fn helper { e: add r0, r0, 1\n ret }\n"
      "fn main { e: mov r0, 1\n mov r1, 0\n jump c\n c: call helper\n k: sti 1, out, 0\n halt }");
  validate(p, true);
  finalize(p);
  REQUIRE(p.finalized);
  // main first: pc 0 is main's first instruction
  REQUIRE(p.code[0].op == Op::mov);
  REQUIRE(p.fns[p.fn_index.at("main")].entry_pc == 0);
  // pcs are dense and sequential
  for (size_t i = 0; i < p.code.size(); i++) REQUIRE(p.code[i].pc == i);
  // call target resolves to helper's entry
  uint32_t helper_entry = p.fns[p.fn_index.at("helper")].entry_pc;
  bool saw_call = false;
  for (auto& in : p.code)
    if (in.op == Op::call) {
      saw_call = true;
      CHECK((uint32_t)in.target_pc == helper_entry);
    }
  REQUIRE(saw_call);
  // jump target points at the call block
  CHECK(p.code[2].op == Op::jump);
  CHECK(p.code[2].target_pc == 3);
}

TEST_CASE("branch targets resolve within the function") {
  Program p = oracle::load_corpus("loop_sum");
  finalize(p);
  for (auto& in : p.code)
    if (op_is_branch(in.op) || in.op == Op::jump) {
      REQUIRE(in.target_pc >= 0);
      REQUIRE((size_t)in.target_pc < p.code.size());
    }
}

TEST_CASE("print_insn covers every operand form") {
  Program p = parse_program(
      "data a = [1, 2]\n"
      "fn main {\n"
      "e:\n"
      "  mov r1, 3\n"
      "  mov r2, r1\n"
      "  la r3, a, 4\n"
      "  load r4, a, 0\n"
      "  load r5, [r3]\n"
      "  load r6, [r3+4]\n"
      "  load r7, [r3-4]\n"
      "  store r4, a, 4\n"
      "  sti 9, a, 0\n"
      "  add r1, r1, r2\n"
      "  sub r1, r1, 1\n"
      "  slt r2, r1, r4\n"
      "  beq r1, r2, e\n"
      "f:\n"
      "  halt\n"
      "}");
  validate(p, true);
  std::string s1 = print_program(p);
  Program q = parse_program(s1);
  CHECK(print_program(q) == s1);
  CHECK(s1.find("load r5, [r3]") != std::string::npos);
  CHECK(s1.find("load r7, [r3-4]") != std::string::npos);
  CHECK(s1.find("sti 9, a, 0") != std::string::npos);
}
