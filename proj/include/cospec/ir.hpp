#pragma once
// Word-addressed register IR: parser, validator, printer, flat code layout.
// 16 registers r0..r15 (r15 reserved for compiler-inserted code), 4-byte words,
// word-aligned memory operands, explicit terminators, no recursion.

#include <cstdint>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cospec {

constexpr int kNumRegs = 16;
constexpr int kScratchReg = 15;     // reserved for lowered ret sequences
constexpr uint32_t kWordBytes = 4;

enum class Op {
  add, sub, mul, and_, or_, xor_, shl, shr, slt,
  mov, la,
  load, store, sti,                 // sti: store an immediate value (compiler-emitted)
  beq, bne, blt, ble, bgt, bge,
  jump, jr, call, ret, halt,
};

inline bool op_is_alu(Op op) {
  switch (op) {
    case Op::add: case Op::sub: case Op::mul: case Op::and_: case Op::or_:
    case Op::xor_: case Op::shl: case Op::shr: case Op::slt:
      return true;
    default: return false;
  }
}
inline bool op_is_branch(Op op) {
  switch (op) {
    case Op::beq: case Op::bne: case Op::blt: case Op::ble: case Op::bgt: case Op::bge:
      return true;
    default: return false;
  }
}
inline bool op_is_store(Op op) { return op == Op::store || op == Op::sti; }
inline bool op_is_terminator(Op op) {
  return op_is_branch(op) || op == Op::jump || op == Op::jr || op == Op::call ||
         op == Op::ret || op == Op::halt;
}

struct Instruction {
  Op op{Op::halt};
  int rd = -1;            // dest reg; for store: the value reg
  int ra = -1;            // src1 / mem base reg / branch lhs / jr target
  int rb = -1;            // src2 / branch rhs
  bool b_is_imm = false;  // alu/mov second operand is an immediate
  int32_t imm = 0;        // alu/mov immediate, or sti value
  int32_t moff = 0;       // load/store/la byte offset
  std::string sym;        // mem symbol, branch/jump label, call target
  bool mem_is_reg = false;  // [ra+moff] addressing instead of sym+moff
  bool bypass = false;      // load may skip the SB search
  bool ckpt = false;        // compiler-inserted checkpoint store
  int src_line = 0;

  // recovery-PC reference: sti whose immediate is patched to a code address
  int pc_ref_fn = -1;
  std::string pc_ref_label;
  int pc_ref_off = 0;

  // filled by finalize()
  uint32_t pc = 0;
  int fn_index = -1;
  int region = -1;
  int64_t target_pc = -1;   // branch/jump/call resolved target

  bool is_load() const { return op == Op::load; }
  bool is_store() const { return op_is_store(op); }
  bool is_terminator() const { return op_is_terminator(op); }
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> insns;
};

struct Function {
  std::string name;
  std::vector<BasicBlock> blocks;
  std::map<std::string, int> block_index;
  uint32_t entry_pc = 0;    // set by finalize()
};

struct DataDecl {
  std::string name;
  std::vector<uint32_t> words;
  int src_line = 0;
};

struct Program {
  std::vector<Function> fns;
  std::vector<DataDecl> data;
  std::map<std::string, int> fn_index;
  std::map<std::string, int> data_index;
  std::vector<Instruction> code;   // flat layout, filled by finalize()
  bool finalized = false;

  const Function* find_fn(const std::string& n) const {
    auto it = fn_index.find(n);
    return it == fn_index.end() ? nullptr : &fns[it->second];
  }
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(int ln, const std::string& msg)
      : std::runtime_error("line " + std::to_string(ln) + ": " + msg), line(ln) {}
};

// ---------------------------------------------------------------------------
// Lexer

namespace detail {

struct Token {
  enum Kind { Ident, Number, Punct, Newline, End } kind;
  std::string text;
  int64_t value = 0;
  int line = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    for (;;) {
      if (pos_ >= src_.size()) return {Token::End, "", 0, line_};
      char c = src_[pos_];
      if (c == '#') {              // comment to end of line
        while (pos_ < src_.size() && src_[pos_] != '\n') pos_++;
        continue;
      }
      if (c == '\n') { pos_++; return {Token::Newline, "\n", 0, line_++}; }
      if (c == ' ' || c == '\t' || c == '\r') { pos_++; continue; }
      break;
    }
    char c = src_[pos_];
    int ln = line_;
    if (std::isalpha((unsigned char)c) || c == '_' || c == '.') {
      size_t s = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum((unsigned char)src_[pos_]) || src_[pos_] == '_' || src_[pos_] == '.'))
        pos_++;
      return {Token::Ident, src_.substr(s, pos_ - s), 0, ln};
    }
    if (std::isdigit((unsigned char)c)) {
      size_t s = pos_;
      while (pos_ < src_.size() && std::isalnum((unsigned char)src_[pos_])) pos_++;
      std::string t = src_.substr(s, pos_ - s);
      try {
        return {Token::Number, t, (int64_t)std::stoll(t, nullptr, 0), ln};
      } catch (...) {
        throw ParseError(ln, "bad number literal '" + t + "'");
      }
    }
    pos_++;
    return {Token::Punct, std::string(1, c), 0, ln};
  }

 private:
  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  static Program parse(const std::string& src) { return Parser(src).run(); }

 private:
  explicit Parser(const std::string& src) : lex_(src) { advance(); }

  detail::Lexer lex_;
  detail::Token tok_;

  void advance() { tok_ = lex_.next(); }
  void skip_seps() {
    while (tok_.kind == detail::Token::Newline ||
           (tok_.kind == detail::Token::Punct && tok_.text == ";"))
      advance();
  }
  [[noreturn]] void fail(const std::string& msg) { throw ParseError(tok_.line, msg); }

  bool punct(const std::string& p) const {
    return tok_.kind == detail::Token::Punct && tok_.text == p;
  }
  void expect_punct(const std::string& p) {
    if (!punct(p)) fail("expected '" + p + "'");
    advance();
  }
  std::string expect_ident(const char* what) {
    if (tok_.kind != detail::Token::Ident) fail(std::string("expected ") + what);
    std::string t = tok_.text;
    advance();
    return t;
  }
  int64_t expect_number() {
    bool neg = false;
    if (punct("-")) { neg = true; advance(); }
    if (tok_.kind != detail::Token::Number) fail("expected number");
    int64_t v = tok_.value;
    advance();
    return neg ? -v : v;
  }
  int expect_reg() {
    if (tok_.kind != detail::Token::Ident || tok_.text.size() < 2 || tok_.text[0] != 'r')
      fail("expected register");
    for (size_t i = 1; i < tok_.text.size(); i++)
      if (!std::isdigit((unsigned char)tok_.text[i])) fail("expected register");
    int n = std::atoi(tok_.text.c_str() + 1);
    if (n < 0 || n >= kNumRegs) throw ParseError(tok_.line, "register out of range: " + tok_.text);
    advance();
    return n;
  }
  void comma() { expect_punct(","); }

  Program run() {
    Program p;
    skip_seps();
    while (tok_.kind != detail::Token::End) {
      std::string kw = expect_ident("'fn' or 'data'");
      if (kw == "data") parse_data(p);
      else if (kw == "fn") parse_fn(p);
      else fail("expected 'fn' or 'data', got '" + kw + "'");
      skip_seps();
    }
    if (p.fn_index.count("main") == 0) throw ParseError(1, "program has no 'main' function");
    return p;
  }

  void parse_data(Program& p) {
    DataDecl d;
    d.src_line = tok_.line;
    d.name = expect_ident("data symbol name");
    if (p.data_index.count(d.name)) fail("duplicate data symbol '" + d.name + "'");
    expect_punct("=");
    expect_punct("[");
    if (punct("]")) fail("empty data array");
    for (;;) {
      int64_t v = expect_number();
      if (tok_.kind == detail::Token::Ident && tok_.text == "x") {  // [v x N] repeat form
        advance();
        int64_t n = expect_number();
        if (n <= 0 || n > (1 << 20)) fail("bad repeat count");
        d.words.insert(d.words.end(), (size_t)n, (uint32_t)v);
      } else {
        d.words.push_back((uint32_t)v);
      }
      if (punct("]")) { advance(); break; }
      comma();
    }
    p.data_index[d.name] = (int)p.data.size();
    p.data.push_back(std::move(d));
  }

  void parse_fn(Program& p) {
    Function f;
    f.name = expect_ident("function name");
    if (p.fn_index.count(f.name)) fail("duplicate function '" + f.name + "'");
    expect_punct("{");
    skip_seps();
    while (!punct("}")) {
      if (tok_.kind != detail::Token::Ident) fail("expected label or '}'");
      // lookahead: "ident :" starts a block
      std::string head = tok_.text;
      int head_line = tok_.line;
      advance();
      if (punct(":")) {
        advance();
        if (f.block_index.count(head)) throw ParseError(head_line, "duplicate label '" + head + "'");
        f.block_index[head] = (int)f.blocks.size();
        f.blocks.push_back(BasicBlock{head, {}});
      } else {
        if (f.blocks.empty()) throw ParseError(head_line, "instruction before first label");
        f.blocks.back().insns.push_back(parse_insn(head, head_line));
      }
      skip_seps();
    }
    advance();  // '}'
    if (f.blocks.empty()) fail("function '" + f.name + "' has no blocks");
    p.fn_index[f.name] = (int)p.fns.size();
    p.fns.push_back(std::move(f));
  }

  void parse_mem_operand(Instruction& in) {
    if (punct("[")) {             // [ra+off] / [ra-off] / [ra]
      advance();
      in.mem_is_reg = true;
      in.ra = expect_reg();
      if (punct("+")) { advance(); in.moff = (int32_t)expect_number(); }
      else if (punct("-")) { advance(); in.moff = -(int32_t)expect_number(); }
      expect_punct("]");
    } else {
      in.sym = expect_ident("memory symbol");
      comma();
      in.moff = (int32_t)expect_number();
    }
  }

  void parse_suffix(Instruction& in) {
    while (punct("!")) {
      advance();
      std::string f = expect_ident("suffix flag");
      if (f == "bypass") in.bypass = true;
      else if (f == "ckpt") in.ckpt = true;
      else fail("unknown suffix '!" + f + "'");
    }
  }

  Instruction parse_insn(const std::string& mn, int line) {
    static const std::map<std::string, Op> table = {
        {"add", Op::add}, {"sub", Op::sub}, {"mul", Op::mul}, {"and", Op::and_},
        {"or", Op::or_},  {"xor", Op::xor_}, {"shl", Op::shl}, {"shr", Op::shr},
        {"slt", Op::slt}, {"mov", Op::mov}, {"la", Op::la},   {"load", Op::load},
        {"store", Op::store}, {"sti", Op::sti}, {"beq", Op::beq}, {"bne", Op::bne},
        {"blt", Op::blt}, {"ble", Op::ble}, {"bgt", Op::bgt}, {"bge", Op::bge},
        {"jump", Op::jump}, {"jr", Op::jr}, {"call", Op::call}, {"ret", Op::ret},
        {"halt", Op::halt}};
    auto it = table.find(mn);
    if (it == table.end()) throw ParseError(line, "unknown instruction '" + mn + "'");
    Instruction in;
    in.op = it->second;
    in.src_line = line;
    switch (in.op) {
      case Op::mov:
        in.rd = expect_reg();
        comma();
        if (tok_.kind == detail::Token::Ident && tok_.text[0] == 'r' && tok_.text.size() > 1 &&
            std::isdigit((unsigned char)tok_.text[1])) {
          in.ra = expect_reg();
        } else {
          in.b_is_imm = true;
          in.imm = (int32_t)expect_number();
        }
        break;
      case Op::la:
        in.rd = expect_reg();
        comma();
        in.sym = expect_ident("symbol");
        comma();
        in.moff = (int32_t)expect_number();
        break;
      case Op::load:
        in.rd = expect_reg();
        comma();
        parse_mem_operand(in);
        parse_suffix(in);
        break;
      case Op::store:
        in.rd = expect_reg();
        comma();
        parse_mem_operand(in);
        parse_suffix(in);
        break;
      case Op::sti:
        in.imm = (int32_t)expect_number();
        comma();
        parse_mem_operand(in);
        parse_suffix(in);
        break;
      case Op::jump:
        in.sym = expect_ident("label");
        break;
      case Op::jr:
        in.ra = expect_reg();
        break;
      case Op::call:
        in.sym = expect_ident("function name");
        break;
      case Op::ret:
      case Op::halt:
        break;
      default:
        if (op_is_alu(in.op)) {
          in.rd = expect_reg();
          comma();
          in.ra = expect_reg();
          comma();
          if (tok_.kind == detail::Token::Ident && tok_.text[0] == 'r' && tok_.text.size() > 1 &&
              std::isdigit((unsigned char)tok_.text[1])) {
            in.rb = expect_reg();
          } else {
            in.b_is_imm = true;
            in.imm = (int32_t)expect_number();
          }
        } else if (op_is_branch(in.op)) {
          in.ra = expect_reg();
          comma();
          in.rb = expect_reg();
          comma();
          in.sym = expect_ident("label");
        }
        break;
    }
    return in;
  }
};

inline Program parse_program(const std::string& src) { return Parser::parse(src); }

// ---------------------------------------------------------------------------
// Validation

struct ValidateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool is_reserved_sym(const std::string& s) {
  return s.size() >= 2 && s[0] == '_' && s[1] == '_';
}

// Structural checks shared by source and compiled programs. `source_level`
// additionally bans r15 and compiler-reserved symbols.
inline void validate(const Program& p, bool source_level = true) {
  auto err = [](int line, const std::string& msg) {
    throw ValidateError("line " + std::to_string(line) + ": " + msg);
  };
  std::set<std::string> known_syms;
  for (auto& d : p.data) {
    if (source_level && is_reserved_sym(d.name))
      err(d.src_line, "symbol '" + d.name + "' uses reserved '__' prefix");
    known_syms.insert(d.name);
  }
  known_syms.insert("out");  // reserved output range, auto-created at layout

  for (auto& f : p.fns) {
    for (size_t bi = 0; bi < f.blocks.size(); bi++) {
      auto& b = f.blocks[bi];
      if (b.insns.empty()) err(0, "empty block '" + b.label + "' in fn " + f.name);
      for (size_t ii = 0; ii < b.insns.size(); ii++) {
        auto& in = b.insns[ii];
        bool last = ii + 1 == b.insns.size();
        if (in.is_terminator() && !last)
          err(in.src_line, "instruction after terminator in block '" + b.label + "'");
        if (last && !in.is_terminator())
          err(in.src_line, "block '" + b.label + "' does not end with a terminator");
        if (source_level) {
          for (int r : {in.rd, in.ra, in.rb})
            if (r == kScratchReg) err(in.src_line, "r15 is reserved for compiler use");
          if (!in.sym.empty() && (in.op == Op::load || in.op == Op::store || in.op == Op::sti ||
                                  in.op == Op::la) &&
              is_reserved_sym(in.sym))
            err(in.src_line, "symbol '" + in.sym + "' uses reserved '__' prefix");
          if (in.bypass || in.ckpt) err(in.src_line, "annotation flags are compiler-emitted only");
        }
        if ((in.op == Op::load || in.op == Op::store || in.op == Op::sti || in.op == Op::la)) {
          if (in.moff % (int)kWordBytes != 0)
            err(in.src_line, "memory offset must be word-aligned");
          if (!in.mem_is_reg && in.op != Op::la && !known_syms.count(in.sym) &&
              !is_reserved_sym(in.sym))
            err(in.src_line, "unknown data symbol '" + in.sym + "'");
          if (in.op == Op::la && !known_syms.count(in.sym) && !is_reserved_sym(in.sym))
            err(in.src_line, "unknown data symbol '" + in.sym + "'");
        }
        if (op_is_branch(in.op) || in.op == Op::jump) {
          if (!f.block_index.count(in.sym))
            err(in.src_line, "undefined label '" + in.sym + "' in fn " + f.name);
        }
        if (in.op == Op::call) {
          if (!p.fn_index.count(in.sym)) err(in.src_line, "call to undefined fn '" + in.sym + "'");
          if (in.sym == f.name) err(in.src_line, "recursion is not supported");
        }
        if ((op_is_branch(in.op) || in.op == Op::call) && bi + 1 >= f.blocks.size())
          err(in.src_line, "fall-through off the end of fn " + f.name);
        if (in.op == Op::ret && f.name == "main") err(in.src_line, "ret in main");
      }
    }
  }
  // acyclic call graph (DFS from each fn)
  {
    std::map<std::string, int> state;  // 0 unseen, 1 on stack, 2 done
    std::vector<std::string> stack;
    std::function<void(const std::string&)> dfs = [&](const std::string& fn) {
      state[fn] = 1;
      for (auto& b : p.fns[p.fn_index.at(fn)].blocks)
        for (auto& in : b.insns)
          if (in.op == Op::call) {
            int s = state.count(in.sym) ? state[in.sym] : 0;
            if (s == 1) throw ValidateError("recursive call cycle through '" + in.sym + "'");
            if (s == 0) dfs(in.sym);
          }
      state[fn] = 2;
    };
    for (auto& f : p.fns)
      if (!state.count(f.name)) dfs(f.name);
  }
  bool main_halts = false;
  for (auto& b : p.fns[p.fn_index.at("main")].blocks)
    for (auto& in : b.insns)
      if (in.op == Op::halt) main_halts = true;
  if (!main_halts) throw ValidateError("main has no halt");
}

// ---------------------------------------------------------------------------
// Flat layout: global PCs, branch/call target resolution. main is laid out
// first so PC 0 is the program entry.

inline void finalize(Program& p) {
  p.code.clear();
  std::vector<int> order;
  order.push_back(p.fn_index.at("main"));
  for (int i = 0; i < (int)p.fns.size(); i++)
    if (i != order[0]) order.push_back(i);

  uint32_t pc = 0;
  std::map<std::pair<int, std::string>, uint32_t> label_pc;
  for (int fi : order) {
    Function& f = p.fns[fi];
    f.entry_pc = pc;
    for (auto& b : f.blocks) {
      label_pc[{fi, b.label}] = pc;
      pc += (uint32_t)b.insns.size();
    }
  }
  for (int fi : order) {
    Function& f = p.fns[fi];
    for (auto& b : f.blocks)
      for (auto& in : b.insns) {
        in.pc = (uint32_t)p.code.size();
        in.fn_index = fi;
        p.code.push_back(in);
      }
  }
  for (auto& in : p.code) {
    if (op_is_branch(in.op) || in.op == Op::jump)
      in.target_pc = label_pc.at({in.fn_index, in.sym});
    else if (in.op == Op::call)
      in.target_pc = p.fns[p.fn_index.at(in.sym)].entry_pc;
    if (in.pc_ref_fn >= 0) {
      auto it = label_pc.find({in.pc_ref_fn, in.pc_ref_label});
      if (it == label_pc.end())
        throw ValidateError("unresolved recovery-pc label " + in.pc_ref_label);
      in.imm = (int32_t)(it->second + (uint32_t)in.pc_ref_off);
    }
  }
  // mirror resolved fields back into block storage so printing stays annotated
  size_t k = 0;
  for (int fi : order)
    for (auto& b : p.fns[fi].blocks)
      for (auto& in : b.insns) in = p.code[k++];
  p.finalized = true;
}

// ---------------------------------------------------------------------------
// Printer (round-trips through the parser)

inline std::string reg_name(int r) { return "r" + std::to_string(r); }

inline std::string print_insn(const Instruction& in) {
  std::ostringstream o;
  auto mem = [&]() {
    if (in.mem_is_reg) {
      o << "[" << reg_name(in.ra);
      if (in.moff > 0) o << "+" << in.moff;
      else if (in.moff < 0) o << "-" << -in.moff;
      o << "]";
    } else {
      o << in.sym << ", " << in.moff;
    }
  };
  auto alu_name = [&]() -> const char* {
    switch (in.op) {
      case Op::add: return "add"; case Op::sub: return "sub"; case Op::mul: return "mul";
      case Op::and_: return "and"; case Op::or_: return "or"; case Op::xor_: return "xor";
      case Op::shl: return "shl"; case Op::shr: return "shr"; case Op::slt: return "slt";
      case Op::beq: return "beq"; case Op::bne: return "bne"; case Op::blt: return "blt";
      case Op::ble: return "ble"; case Op::bgt: return "bgt"; case Op::bge: return "bge";
      default: return "?";
    }
  };
  switch (in.op) {
    case Op::mov:
      o << "mov " << reg_name(in.rd) << ", ";
      if (in.b_is_imm) o << in.imm; else o << reg_name(in.ra);
      break;
    case Op::la:
      o << "la " << reg_name(in.rd) << ", " << in.sym << ", " << in.moff;
      break;
    case Op::load:
      o << "load " << reg_name(in.rd) << ", ";
      mem();
      if (in.bypass) o << " !bypass";
      break;
    case Op::store:
      o << "store " << reg_name(in.rd) << ", ";
      mem();
      if (in.ckpt) o << " !ckpt";
      break;
    case Op::sti:
      o << "sti " << in.imm << ", ";
      mem();
      if (in.ckpt) o << " !ckpt";
      break;
    case Op::jump: o << "jump " << in.sym; break;
    case Op::jr: o << "jr " << reg_name(in.ra); break;
    case Op::call: o << "call " << in.sym; break;
    case Op::ret: o << "ret"; break;
    case Op::halt: o << "halt"; break;
    default:
      if (op_is_branch(in.op)) {
        o << alu_name() << " " << reg_name(in.ra) << ", " << reg_name(in.rb) << ", " << in.sym;
      } else {
        o << alu_name() << " " << reg_name(in.rd) << ", " << reg_name(in.ra) << ", ";
        if (in.b_is_imm) o << in.imm;
        else o << reg_name(in.rb);
      }
      break;
  }
  return o.str();
}

inline std::string print_program(const Program& p, bool annotate_regions = false) {
  std::ostringstream o;
  for (auto& d : p.data) {
    o << "data " << d.name << " = [";
    for (size_t i = 0; i < d.words.size(); i++) {
      if (i) o << ", ";
      o << (int32_t)d.words[i];
    }
    o << "]\n";
  }
  if (!p.data.empty()) o << "\n";
  for (auto& f : p.fns) {
    o << "fn " << f.name << " {\n";
    int cur_region = -2;
    for (auto& b : f.blocks) {
      if (annotate_regions && !b.insns.empty() && b.insns[0].region != cur_region) {
        cur_region = b.insns[0].region;
        o << "  #region " << cur_region << "\n";
      }
      o << b.label << ":\n";
      for (auto& in : b.insns) o << "  " << print_insn(in) << "\n";
    }
    o << "}\n\n";
  }
  return o.str();
}

}  // namespace cospec
