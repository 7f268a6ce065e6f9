#pragma once
// Reference interpreter: direct-to-memory semantics, no store buffer, no
// failures. Produces the golden final state that every failure-injected
// speculative run must reproduce exactly.

#include <cstdint>
#include <vector>

#include "ir.hpp"
#include "nvm.hpp"

namespace cospec {

struct GoldenState {
  std::vector<uint32_t> primary;
  std::vector<uint32_t> outlog;
  int64_t instr_count = 0;
};

namespace detail {

inline uint32_t alu_eval(Op op, uint32_t a, uint32_t b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::and_: return a & b;
    case Op::or_: return a | b;
    case Op::xor_: return a ^ b;
    case Op::shl: return a << (b & 31);
    case Op::shr: return a >> (b & 31);   // logical
    case Op::slt: return (int32_t)a < (int32_t)b ? 1 : 0;
    default: throw SimError("alu_eval: not an alu op");
  }
}

inline bool branch_eval(Op op, uint32_t a, uint32_t b) {
  int32_t sa = (int32_t)a, sb = (int32_t)b;
  switch (op) {
    case Op::beq: return a == b;
    case Op::bne: return a != b;
    case Op::blt: return sa < sb;
    case Op::ble: return sa <= sb;
    case Op::bgt: return sa > sb;
    case Op::bge: return sa >= sb;
    default: throw SimError("branch_eval: not a branch");
  }
}

}  // namespace detail

inline GoldenState run_reference(const Program& p, const Layout& lay, const SimConfig& cfg) {
  if (!p.finalized) throw SimError("run_reference: program not finalized");
  NvmImage mem = NvmImage::create(p, lay, cfg);
  uint32_t regs[kNumRegs] = {0};
  uint64_t pc = 0;
  int64_t count = 0;

  auto store_word = [&](uint32_t a, uint32_t v) {
    mem.write_word(a, v);
    if (lay.in_out_range(a)) mem.outlog.push_back(v);
  };
  auto mem_addr = [&](const Instruction& in) -> uint32_t {
    return in.mem_is_reg ? regs[in.ra] + (uint32_t)(int32_t)in.moff
                         : lay.addr_of(in.sym, in.moff);
  };

  for (;;) {
    if (pc >= p.code.size()) throw SimError("pc out of range: " + std::to_string(pc));
    if (++count > cfg.instr_budget) throw SimError("instruction budget exhausted");
    const Instruction& in = p.code[pc];
    uint64_t next = pc + 1;
    switch (in.op) {
      case Op::mov:
        regs[in.rd] = in.b_is_imm ? (uint32_t)in.imm : regs[in.ra];
        break;
      case Op::la:
        regs[in.rd] = lay.addr_of(in.sym, in.moff);
        break;
      case Op::load:
        regs[in.rd] = mem.read_word(mem_addr(in));
        break;
      case Op::store:
        store_word(mem_addr(in), regs[in.rd]);
        break;
      case Op::sti:
        store_word(mem_addr(in), (uint32_t)in.imm);
        break;
      case Op::jump:
        next = (uint64_t)in.target_pc;
        break;
      case Op::jr:
        next = regs[in.ra];
        break;
      case Op::call:
        store_word(lay.addr_of(ret_slot_sym(in.sym), 0), (uint32_t)(pc + 1));
        next = (uint64_t)in.target_pc;
        break;
      case Op::ret:
        next = mem.read_word(lay.addr_of(ret_slot_sym(p.fns[in.fn_index].name), 0));
        break;
      case Op::halt:
        return {mem.primary, mem.outlog, count};
      default:
        if (op_is_alu(in.op)) {
          uint32_t b = in.b_is_imm ? (uint32_t)in.imm : regs[in.rb];
          regs[in.rd] = detail::alu_eval(in.op, regs[in.ra], b);
        } else if (op_is_branch(in.op)) {
          if (detail::branch_eval(in.op, regs[in.ra], regs[in.rb]))
            next = (uint64_t)in.target_pc;
        }
        break;
    }
    pc = next;
  }
}

}  // namespace cospec
