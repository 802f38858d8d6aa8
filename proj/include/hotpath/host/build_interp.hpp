/*
 * Copyright 2026 The hotpath Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <map>
#include <string>
#include <vector>

#include "hotpath/bytecode.hpp"
#include "hotpath/host/ir.hpp"

namespace hotpath::host {

class IRBuilder {
 public:
  explicit IRBuilder(const std::string& name) { f_.name = name; }

  int32_t reg(const std::string& name) {
    auto it = by_name_.find(name);
    if (it != by_name_.end()) return it->second;
    int32_t r = f_.nregs++;
    f_.reg_names.push_back(name);
    by_name_[name] = r;
    return r;
  }

  void param(const std::string& name) {
    reg(name);
    f_.nparams++;
  }

  void label(const std::string& l) {
    close_block();
    cur_label_ = l;
    block_begin_ = (int32_t)f_.code.size();
    labels_[l] = block_begin_;
  }

  HostInstr& emit(HostInstr ins) {
    f_.code.push_back(ins);
    return f_.code.back();
  }

  void cnst(int32_t dst, Slot imm) { emit({HOp::Const, dst, -1, -1, -1, imm}); }
  void mov(int32_t dst, int32_t a) { emit({HOp::Move, dst, a}); }
  void arith(HOp op, int32_t dst, int32_t a, int32_t b) { emit({op, dst, a, b}); }
  void arith_imm(HOp op, int32_t dst, int32_t a, int64_t imm) {
    HostInstr i{op, dst, a, -1, -1, int_slot(imm)};
    i.b_is_imm = true;
    emit(i);
  }
  void cmp_imm_slot(HOp op, int32_t dst, int32_t a, Slot imm) {
    HostInstr i{op, dst, a, -1, -1, imm};
    i.b_is_imm = true;
    emit(i);
  }
  void aread(int32_t dst, int32_t arr, int32_t idx, Note note = Note::None) {
    HostInstr i{HOp::ArrayRead, dst, arr, idx};
    i.note = note;
    emit(i);
  }
  void awrite(int32_t arr, int32_t idx, int32_t v, Note note = Note::None) {
    HostInstr i{HOp::ArrayWrite, -1, arr, idx, v};
    i.note = note;
    emit(i);
  }
  void branch(int32_t cond, const std::string& then_l, const std::string& else_l) {
    HostInstr i{HOp::Branch, -1, cond};
    fix_b_.push_back({(int32_t)f_.code.size(), then_l});
    fix_c_.push_back({(int32_t)f_.code.size(), else_l});
    emit(i);
  }
  void jump(const std::string& l) {
    HostInstr i{HOp::Jump};
    fix_b_.push_back({(int32_t)f_.code.size(), l});
    emit(i);
  }
  void call(int32_t dst, int32_t callee, std::vector<int32_t> args) {
    HostInstr i{HOp::Call, dst, callee};
    i.c = (int32_t)f_.arg_tables.size();
    f_.arg_tables.push_back(std::move(args));
    emit(i);
  }
  void ret(int32_t a) { emit({HOp::Ret, -1, a}); }
  void mk_ret(int32_t dst, int32_t a) { emit({HOp::MkRet, dst, a}); }
  void ret_target(int32_t dst, int32_t a) { emit({HOp::RetTarget, dst, a}); }
  void trap(int64_t code, int32_t ctx = -1) {
    emit({HOp::Trap, -1, ctx, -1, -1, int_slot(code)});
  }
  void merge_point() { emit({HOp::JitMergePoint}); }
  void can_enter_jit() { emit({HOp::CanEnterJit}); }
  void is_mj(int32_t dst) { emit({HOp::IsMj, dst}); }

  void set_colors(std::vector<int32_t> greens, std::vector<int32_t> reds) {
    f_.greens = std::move(greens);
    f_.reds = std::move(reds);
  }

  HostFunction finish() {
    close_block();
    for (auto& [idx, l] : fix_b_) {
      auto it = labels_.find(l);
      if (it == labels_.end()) throw CompileError("undefined host label " + l);
      f_.code[idx].b = it->second;
    }
    for (auto& [idx, l] : fix_c_) f_.code[idx].c = labels_.at(l);
    return std::move(f_);
  }

 private:
  void close_block() {
    if (!cur_label_.empty())
      f_.blocks.push_back(BlockInfo{cur_label_, block_begin_, (int32_t)f_.code.size()});
    cur_label_.clear();
  }

  HostFunction f_;
  std::map<std::string, int32_t> by_name_;
  std::map<std::string, int32_t> labels_;
  std::vector<std::pair<int32_t, std::string>> fix_b_, fix_c_;
  std::string cur_label_;
  int32_t block_begin_ = 0;
};

// The shipped interpreter definition, written in stack-hybridization
// style. The dispatch loop carries greens (code arrays, pc) and reds
// (user stack, output, sp). CALL branches on is_mj():
//   - host-stack arm: push HS below the arguments, recurse into the
//     dispatch function, push its result
//   - user-stack arm: push RetAddr(pc+1) and US below the arguments,
//     jump to the callee
// RETURN pops the result and the flag and selects the matching protocol.
// Backward pc transfers announce themselves with can_enter_jit.
//
// Arguments are re-seated above the protocol cells so the callee's
// stack-relative addressing is identical under both protocols.
inline HostProgram build_interpreter() {
  IRBuilder b("interp");
  for (const char* p : {"p_op", "p_a", "p_b", "stk", "out", "pc", "sp"}) b.param(p);
  int32_t p_op = b.reg("p_op"), p_a = b.reg("p_a"), p_b = b.reg("p_b");
  int32_t stk = b.reg("stk"), out = b.reg("out"), pc = b.reg("pc"), sp = b.reg("sp");
  int32_t inst = b.reg("inst"), c = b.reg("c"), d = b.reg("d"), v = b.reg("v");
  int32_t v1 = b.reg("v1"), v2 = b.reg("v2"), r = b.reg("r"), t = b.reg("t");
  int32_t t1 = b.reg("t1"), t2 = b.reg("t2"), addr = b.reg("addr"), k = b.reg("k");
  int32_t m = b.reg("m"), i = b.reg("i"), fs = b.reg("fs"), rv = b.reg("rv");
  int32_t fl = b.reg("fl"), ra = b.reg("ra"), n = b.reg("n"), z = b.reg("z");

  b.set_colors({p_op, p_a, p_b, pc}, {stk, out, sp});

  auto op_imm = [](Opcode o) { return int_slot((int64_t)o); };

  // Dispatch chain, ordered roughly by opcode frequency.
  const std::pair<Opcode, const char*> chain[] = {
      {Opcode::LOAD, "h_load"},   {Opcode::CONST, "h_const"}, {Opcode::LE, "h_le"},
      {Opcode::JUMP_IF, "h_jif"}, {Opcode::SUB, "h_sub"},     {Opcode::ADD, "h_add"},
      {Opcode::CALL, "h_call"},   {Opcode::RETURN, "h_ret"},  {Opcode::LT, "h_lt"},
      {Opcode::STORE, "h_store"}, {Opcode::MUL, "h_mul"},     {Opcode::EQ, "h_eq"},
      {Opcode::JUMP, "h_jump"},   {Opcode::DUP, "h_dup"},     {Opcode::POP, "h_pop"},
      {Opcode::PRINT, "h_print"}, {Opcode::HALT, "h_halt"},
  };

  b.label("dispatch");
  b.merge_point();
  b.aread(inst, p_op, pc);
  for (size_t ci = 0; ci < std::size(chain); ++ci) {
    if (ci) b.label("d" + std::to_string(ci));
    b.cmp_imm_slot(HOp::ICmpEq, c, inst, op_imm(chain[ci].first));
    std::string next = ci + 1 < std::size(chain) ? "d" + std::to_string(ci + 1) : "bad_op";
    b.branch(c, chain[ci].second, next);
  }
  b.label("bad_op");
  b.trap(kTrapBadOpcode, inst);

  b.label("h_load");
  b.aread(d, p_a, pc);
  b.arith_imm(HOp::ISub, t, sp, 1);
  b.arith(HOp::ISub, t1, t, d);
  b.aread(v, stk, t1);
  b.awrite(stk, sp, v);
  b.arith_imm(HOp::IAdd, sp, sp, 1);
  b.arith_imm(HOp::IAdd, pc, pc, 1);
  b.jump("dispatch");

  b.label("h_const");
  b.aread(v, p_a, pc);
  b.awrite(stk, sp, v);
  b.arith_imm(HOp::IAdd, sp, sp, 1);
  b.arith_imm(HOp::IAdd, pc, pc, 1);
  b.jump("dispatch");

  b.label("h_store");
  b.aread(d, p_a, pc);
  b.arith_imm(HOp::ISub, sp, sp, 1);
  b.aread(v, stk, sp);
  b.arith_imm(HOp::ISub, t, sp, 1);
  b.arith(HOp::ISub, t1, t, d);
  b.awrite(stk, t1, v);
  b.arith_imm(HOp::IAdd, pc, pc, 1);
  b.jump("dispatch");

  const std::pair<const char*, HOp> bins[] = {
      {"h_le", HOp::ICmpLe}, {"h_sub", HOp::ISub}, {"h_add", HOp::IAdd},
      {"h_lt", HOp::ICmpLt}, {"h_mul", HOp::IMul}, {"h_eq", HOp::ICmpEq},
  };
  for (auto& [lbl, hop] : bins) {
    b.label(lbl);
    b.arith_imm(HOp::ISub, sp, sp, 1);
    b.aread(v2, stk, sp);
    b.arith_imm(HOp::ISub, t, sp, 1);
    b.aread(v1, stk, t);
    b.arith(hop, r, v1, v2);
    b.awrite(stk, t, r);
    b.arith_imm(HOp::IAdd, pc, pc, 1);
    b.jump("dispatch");
  }

  b.label("h_jump");
  b.aread(addr, p_a, pc);
  b.arith(HOp::ICmpLt, t, addr, pc);
  b.mov(pc, addr);
  b.branch(t, "jump_cej", "dispatch");
  b.label("jump_cej");
  b.can_enter_jit();
  b.jump("dispatch");

  b.label("h_jif");
  b.aread(addr, p_a, pc);
  b.arith_imm(HOp::ISub, sp, sp, 1);
  b.aread(v, stk, sp);
  b.cmp_imm_slot(HOp::ICmpEq, c, v, int_slot(0));
  b.branch(c, "jif_taken", "jif_fall");
  b.label("jif_taken");
  b.arith(HOp::ICmpLt, t, addr, pc);
  b.mov(pc, addr);
  b.branch(t, "jif_cej", "dispatch");
  b.label("jif_cej");
  b.can_enter_jit();
  b.jump("dispatch");
  b.label("jif_fall");
  b.arith_imm(HOp::IAdd, pc, pc, 1);
  b.jump("dispatch");

  b.label("h_call");
  b.aread(addr, p_a, pc);
  b.aread(k, p_b, pc);
  b.is_mj(m);
  b.branch(m, "call_hs", "call_us");

  // User-stack protocol: [args] -> [RetAddr(pc+1), US, args], pc = addr.
  b.label("call_us");
  b.cnst(i, int_slot(1));
  b.label("us_head");
  b.arith(HOp::ICmpLe, t, i, k);
  b.branch(t, "us_body", "us_done");
  b.label("us_body");
  b.arith(HOp::ISub, t1, sp, i);
  b.aread(v, stk, t1);
  b.arith_imm(HOp::IAdd, t2, t1, 2);
  b.awrite(stk, t2, v);
  b.arith_imm(HOp::IAdd, i, i, 1);
  b.jump("us_head");
  b.label("us_done");
  b.arith_imm(HOp::IAdd, t, pc, 1);
  b.mk_ret(ra, t);
  b.arith(HOp::ISub, t1, sp, k);
  b.awrite(stk, t1, ra);
  b.arith_imm(HOp::IAdd, t2, t1, 1);
  b.cnst(fs, flag_us());
  b.awrite(stk, t2, fs, Note::FlagPush);
  b.arith_imm(HOp::IAdd, sp, sp, 2);
  b.arith(HOp::ICmpLt, t, addr, pc);
  b.mov(pc, addr);
  b.branch(t, "call_cej", "dispatch");
  b.label("call_cej");
  b.can_enter_jit();
  b.jump("dispatch");

  // Host-stack protocol: [args] -> [HS, args], recurse, push the result.
  b.label("call_hs");
  b.cnst(i, int_slot(1));
  b.label("hs_head");
  b.arith(HOp::ICmpLe, t, i, k);
  b.branch(t, "hs_body", "hs_done");
  b.label("hs_body");
  b.arith(HOp::ISub, t1, sp, i);
  b.aread(v, stk, t1);
  b.arith_imm(HOp::IAdd, t2, t1, 1);
  b.awrite(stk, t2, v);
  b.arith_imm(HOp::IAdd, i, i, 1);
  b.jump("hs_head");
  b.label("hs_done");
  b.arith(HOp::ISub, t1, sp, k);
  b.cnst(fs, flag_hs());
  b.awrite(stk, t1, fs, Note::FlagPush);
  b.arith_imm(HOp::IAdd, t2, sp, 1);
  b.call(rv, 0, {p_op, p_a, p_b, stk, out, addr, t2});
  b.arith(HOp::ISub, t1, sp, k);
  b.awrite(stk, t1, rv);
  b.arith_imm(HOp::IAdd, sp, t1, 1);
  b.arith_imm(HOp::IAdd, pc, pc, 1);
  b.jump("dispatch");

  b.label("h_ret");
  b.arith_imm(HOp::ISub, sp, sp, 1);
  b.aread(rv, stk, sp);
  b.arith_imm(HOp::ISub, sp, sp, 1);
  b.aread(fl, stk, sp, Note::FlagPopCheck);
  b.cmp_imm_slot(HOp::ICmpEq, c, fl, flag_us());
  b.branch(c, "ret_us", "ret_try_hs");
  b.label("ret_us");
  b.arith_imm(HOp::ISub, sp, sp, 1);
  b.aread(ra, stk, sp);
  b.awrite(stk, sp, rv);
  b.arith_imm(HOp::IAdd, sp, sp, 1);
  b.ret_target(t, ra);
  b.arith(HOp::ICmpLt, t1, t, pc);
  b.mov(pc, t);
  b.branch(t1, "ret_cej", "dispatch");
  b.label("ret_cej");
  b.can_enter_jit();
  b.jump("dispatch");
  b.label("ret_try_hs");
  b.cmp_imm_slot(HOp::ICmpEq, c, fl, flag_hs());
  b.branch(c, "ret_hs", "ret_bad");
  b.label("ret_hs");
  b.ret(rv);
  b.label("ret_bad");
  b.trap(kTrapFlagMismatch, fl);

  b.label("h_pop");
  b.arith_imm(HOp::ISub, sp, sp, 1);
  b.arith_imm(HOp::IAdd, pc, pc, 1);
  b.jump("dispatch");

  b.label("h_dup");
  b.arith_imm(HOp::ISub, t, sp, 1);
  b.aread(v, stk, t);
  b.awrite(stk, sp, v);
  b.arith_imm(HOp::IAdd, sp, sp, 1);
  b.arith_imm(HOp::IAdd, pc, pc, 1);
  b.jump("dispatch");

  b.label("h_print");
  b.arith_imm(HOp::ISub, sp, sp, 1);
  b.aread(v, stk, sp);
  b.cnst(z, int_slot(0));
  b.aread(n, out, z);
  b.arith_imm(HOp::IAdd, t, n, 1);
  b.awrite(out, t, v);
  b.awrite(out, z, t);
  b.arith_imm(HOp::IAdd, pc, pc, 1);
  b.jump("dispatch");

  b.label("h_halt");
  b.cnst(z, int_slot(0));
  b.ret(z);

  HostProgram hp;
  hp.functions.push_back(b.finish());
  hp.dispatch_fn = 0;
  hp.pc_reg = pc;
  hp.sp_reg = sp;
  // Patch the recursive call's callee index (self).
  for (auto& ins : hp.functions[0].code)
    if (ins.op == HOp::Call) ins.a = 0;
  return hp;
}

}  // namespace hotpath::host
