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

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hotpath/slot.hpp"

namespace hotpath::jit {

// Residue operations over virtual trace registers. Linear segments with
// guards form trace-strategy units; if/loop structure appears only in
// method-strategy units. Stack cells are addressed relative to a register
// (in practice the sp the unit was entered with) plus a folded offset.
enum class TOp : uint8_t {
  Const,       // dst <- imm
  Move,        // dst <- a
  Add, Sub, Mul,
  CmpLe, CmpLt,
  CmpEq,       // full slot equality
  StackLoad,   // dst <- space[r(a) + off]
  StackStore,  // space[r(a) + off] <- r(b) | imm
  PushFlag,    // stack[r(a) + off] <- imm flag; counted as a protocol push
  Guard,       // deopt via snapshot aux unless the condition holds
  Call,        // bridge to another compilation unit / the interpreter (info in aux)
};

enum class Space : uint8_t { Stack = 0, Out = 1 };

// How a block ends.
enum class Term : uint8_t {
  JumpEntry,   // trace closure: roll the sp base and restart the entry block
  JumpBlock,   // method structure: transfer to another block of this unit
  If,          // method structure: conditional over a trace register
  Ret,         // protocol-polymorphic return (reads the caller's flag)
  RetValue,    // plain return of a value (no protocol)
};

struct TraceOp {
  TOp op = TOp::Const;
  Space space = Space::Stack;
  bool b_is_imm = false;
  bool expect = true;    // Guard: required truthiness when eq is unset
  bool is_eq = false;    // Guard: compare r(a) against imm (slot equality)
  int32_t dst = -1;
  int32_t a = -1;
  int32_t b = -1;
  int32_t off = 0;       // StackLoad/StackStore/PushFlag offset
  int32_t aux = -1;      // Guard: snapshot index; Call: call-info index
  Slot imm{};
};

struct Terminal {
  Term kind = Term::RetValue;
  int32_t a = -1;           // If: cond; Ret/RetValue: value register
  int32_t then_block = -1;  // If / JumpBlock target
  int32_t else_block = -1;
  int32_t sp_roll = 0;      // JumpEntry: sp base advance per iteration
  // Ret protocol fields.
  int32_t flag_reg = -1;
  int32_t base_reg = -1;
  int32_t addr_off = 0;     // stack offset of the RetAddr cell (US arm)
  int32_t sp_us = 0;        // final sp delta for a user-stack return
  int32_t sp_hs = 0;        // final sp delta for a host-stack return
};

// Recipe to rebuild the interpreter state at a guard failure. Stack cells
// are already physically up to date (stores write through), so only pc and
// sp need reconstruction. A register-sourced pc covers promotion guards.
struct DeoptSnapshot {
  bool pc_is_reg = false;
  int64_t pc_const = 0;
  int32_t pc_reg = -1;
  int32_t base_reg = -1;
  int32_t sp_delta = 0;
};

// Runtime behaviour of a Call op. The residue before the op has already
// stored the protocol flag and the arguments; the bridge activates the
// callee and (for the host-stack protocol) the result lands in dst.
struct CallInfo {
  int64_t callee_entry = 0;
  bool host_protocol = false;  // true: HS flag was pushed; false: US + RetAddr
  int64_t ret_pc = 0;          // US: where the callee's return must land
  int32_t dst = -1;            // HS: result register
  int32_t base_reg = -1;
  int32_t sp_entry_delta = 0;  // callee's sp at entry
  int32_t sp_after_delta = 0;  // our sp after the call completes
};

struct TraceBlock {
  std::vector<TraceOp> ops;
  Terminal term;
};

struct LoopInfo {
  int32_t head_block = -1;
  std::vector<int32_t> afters;
};

enum class Strategy : uint8_t { Trace, Method };

struct CompiledUnit {
  Strategy strategy = Strategy::Trace;
  std::string name;
  int64_t entry_pc = 0;   // trace: loop-head pc; method: function entry pc
  int fn_index = -1;      // method units
  int nregs = 0;
  int32_t base_reg = 0;   // live-in: sp at entry
  std::vector<TraceBlock> blocks;  // block 0 is the entry
  std::vector<DeoptSnapshot> snaps;
  std::vector<CallInfo> calls;
  std::vector<LoopInfo> loops;
  int guard_count = 0;    // static guard indices are 0..guard_count-1
  // Structure counters (method traces).
  int if_nodes = 0;
  int call_sites = 0;

  bool is_loop_head(int32_t b) const {
    for (const auto& l : loops)
      if (l.head_block == b) return true;
    return false;
  }
};

// Single-pass well-formedness check: every register is written before it
// is read on every path, block targets are valid, guards reference
// snapshots. Violations are compiler bugs, reported loudly.
inline void verify_unit(const CompiledUnit& u) {
  if (u.blocks.empty())
    throw VmError(VmError::Kind::CompilerBug, "unit " + u.name + " has no blocks");
  auto fail = [&](const std::string& m) {
    throw VmError(VmError::Kind::CompilerBug, "unit " + u.name + ": " + m);
  };
  auto check_block = [&](int32_t b) {
    if (b < 0 || b >= (int32_t)u.blocks.size()) fail("bad block reference");
  };

  std::vector<int> on_path(u.blocks.size(), 0);
  struct WalkFrame { int32_t block; std::set<int32_t> defined; };

  // Depth-first over the block tree; back-edges (to a block on the current
  // path) terminate that path.
  std::vector<WalkFrame> stack;
  std::set<int32_t> entry_defs = {u.base_reg};
  stack.push_back({0, entry_defs});
  std::vector<int> visits(u.blocks.size(), 0);
  while (!stack.empty()) {
    auto [b, defined] = stack.back();
    stack.pop_back();
    if (++visits[b] > 4 * (int)u.blocks.size() + 8) fail("block graph is not tree-like");
    const TraceBlock& blk = u.blocks[b];
    auto use = [&](int32_t r) {
      if (r < 0 || r >= u.nregs) fail("register out of range");
      if (!defined.count(r)) fail("register r" + std::to_string(r) + " read before write");
    };
    auto def = [&](int32_t r) {
      if (r < 0 || r >= u.nregs) fail("destination register out of range");
      defined.insert(r);
    };
    for (const auto& op : blk.ops) {
      switch (op.op) {
        case TOp::Const: def(op.dst); break;
        case TOp::Move: use(op.a); def(op.dst); break;
        case TOp::Add: case TOp::Sub: case TOp::Mul:
        case TOp::CmpLe: case TOp::CmpLt: case TOp::CmpEq:
          use(op.a);
          if (!op.b_is_imm) use(op.b);
          def(op.dst);
          break;
        case TOp::StackLoad: use(op.a); def(op.dst); break;
        case TOp::StackStore:
          use(op.a);
          if (!op.b_is_imm) use(op.b);
          break;
        case TOp::PushFlag:
          use(op.a);
          if (!op.imm.is_flag()) fail("push_flag without a flag immediate");
          break;
        case TOp::Guard:
          use(op.a);
          if (op.aux < 0 || op.aux >= (int32_t)u.snaps.size()) fail("guard without snapshot");
          if (u.snaps[op.aux].pc_is_reg) use(u.snaps[op.aux].pc_reg);
          break;
        case TOp::Call: {
          if (op.aux < 0 || op.aux >= (int32_t)u.calls.size()) fail("call without info");
          const CallInfo& ci = u.calls[op.aux];
          if (ci.host_protocol && ci.dst >= 0) def(ci.dst);
          break;
        }
      }
    }
    const Terminal& t = blk.term;
    switch (t.kind) {
      case Term::JumpEntry:
        if (u.strategy != Strategy::Trace) fail("jump-to-entry in a method unit");
        break;
      case Term::JumpBlock:
        check_block(t.then_block);
        if (!on_path[t.then_block]) {
          on_path[t.then_block] = 1;
          stack.push_back({t.then_block, defined});
        }
        break;
      case Term::If: {
        if (t.a < 0 || !defined.count(t.a)) fail("if over an undefined register");
        check_block(t.then_block);
        check_block(t.else_block);
        stack.push_back({t.then_block, defined});
        stack.push_back({t.else_block, defined});
        break;
      }
      case Term::Ret:
        if (!defined.count(t.a) || !defined.count(t.flag_reg) || !defined.count(t.base_reg))
          fail("ret reads an undefined register");
        break;
      case Term::RetValue:
        if (!defined.count(t.a)) fail("ret reads an undefined register");
        break;
    }
  }

  // Strategy shape: guards only in trace units, if/loop only in method units.
  for (const auto& blk : u.blocks) {
    for (const auto& op : blk.ops)
      if (op.op == TOp::Guard && u.strategy == Strategy::Method)
        fail("guard inside a method unit");
    if (blk.term.kind == Term::If && u.strategy == Strategy::Trace)
      fail("structured conditional inside a trace unit");
  }
}

namespace detail {

inline std::string rname(int32_t r) { return "%" + std::to_string(r); }

inline std::string op_str(const CompiledUnit& u, const TraceOp& op) {
  std::ostringstream os;
  auto operand_b = [&]() { return op.b_is_imm ? slot_str(op.imm) : rname(op.b); };
  switch (op.op) {
    case TOp::Const: os << rname(op.dst) << " = const " << slot_str(op.imm); break;
    case TOp::Move: os << rname(op.dst) << " = " << rname(op.a); break;
    case TOp::Add: os << rname(op.dst) << " = add " << rname(op.a) << ", " << operand_b(); break;
    case TOp::Sub: os << rname(op.dst) << " = sub " << rname(op.a) << ", " << operand_b(); break;
    case TOp::Mul: os << rname(op.dst) << " = mul " << rname(op.a) << ", " << operand_b(); break;
    case TOp::CmpLe: os << rname(op.dst) << " = cmp_le " << rname(op.a) << ", " << operand_b(); break;
    case TOp::CmpLt: os << rname(op.dst) << " = cmp_lt " << rname(op.a) << ", " << operand_b(); break;
    case TOp::CmpEq: os << rname(op.dst) << " = cmp_eq " << rname(op.a) << ", " << operand_b(); break;
    case TOp::StackLoad:
      os << rname(op.dst) << " = " << (op.space == Space::Stack ? "stack" : "out") << "["
         << rname(op.a) << (op.off >= 0 ? "+" : "") << op.off << "]";
      break;
    case TOp::StackStore:
      os << (op.space == Space::Stack ? "stack" : "out") << "[" << rname(op.a)
         << (op.off >= 0 ? "+" : "") << op.off << "] = " << operand_b();
      break;
    case TOp::PushFlag:
      os << "push_flag " << slot_str(op.imm) << " -> stack[" << rname(op.a)
         << (op.off >= 0 ? "+" : "") << op.off << "]";
      break;
    case TOp::Guard: {
      const DeoptSnapshot& s = u.snaps[op.aux];
      os << "guard ";
      if (op.is_eq) os << rname(op.a) << " == " << slot_str(op.imm);
      else os << (op.expect ? "" : "not ") << rname(op.a);
      os << "  [deopt pc=";
      if (s.pc_is_reg) os << rname(s.pc_reg);
      else os << s.pc_const;
      os << " sp=" << rname(s.base_reg) << (s.sp_delta >= 0 ? "+" : "") << s.sp_delta << "]";
      break;
    }
    case TOp::Call: {
      const CallInfo& ci = u.calls[op.aux];
      if (ci.host_protocol) {
        if (ci.dst >= 0) os << rname(ci.dst) << " = ";
        os << "call @" << ci.callee_entry;
      } else {
        os << "call @" << ci.callee_entry << " ret_pc=" << ci.ret_pc;
      }
      break;
    }
  }
  return os.str();
}

inline void dump_block(const CompiledUnit& u, int32_t b, int indent, std::ostringstream& os,
                       std::set<int32_t>& printed) {
  std::string pad(indent * 2, ' ');
  if (printed.count(b)) {
    os << pad << "goto block" << b << "\n";
    return;
  }
  printed.insert(b);
  bool is_head = u.is_loop_head(b);
  if (is_head) {
    os << pad << "loop:  ; block" << b << "\n";
    pad += "  ";
    ++indent;
  }
  const TraceBlock& blk = u.blocks[b];
  for (const auto& op : blk.ops) os << pad << op_str(u, op) << "\n";
  const Terminal& t = blk.term;
  switch (t.kind) {
    case Term::JumpEntry:
      os << pad << "jump entry  ; sp_roll=" << t.sp_roll << "\n";
      break;
    case Term::JumpBlock:
      if (printed.count(t.then_block)) {
        os << pad << "jump block" << t.then_block << "\n";
      } else {
        dump_block(u, t.then_block, indent, os, printed);
      }
      break;
    case Term::If:
      os << pad << "if " << detail::rname(t.a) << ":\n";
      dump_block(u, t.then_block, indent + 1, os, printed);
      os << pad << "else:\n";
      dump_block(u, t.else_block, indent + 1, os, printed);
      break;
    case Term::Ret:
      os << pad << "ret " << rname(t.a) << " flag=" << rname(t.flag_reg) << "\n";
      break;
    case Term::RetValue:
      os << pad << "ret " << rname(t.a) << "\n";
      break;
  }
}

}  // namespace detail

// Canonical textual listing. Trace units print linearly; method units
// print the if/loop tree with indentation.
inline std::string dump_unit(const CompiledUnit& u) {
  std::ostringstream os;
  os << (u.strategy == Strategy::Trace ? "trace" : "method") << " unit " << u.name
     << " entry_pc=" << u.entry_pc << " regs=" << u.nregs << "\n";
  std::set<int32_t> printed;
  detail::dump_block(u, 0, 1, os, printed);
  // Loop after-traces that are not reachable through the tree walk above
  // (they are entered via loop-exit jumps) are appended after the body.
  for (const auto& l : u.loops) {
    for (int32_t a : l.afters) {
      if (!printed.count(a)) {
        os << "  after:  ; block" << a << "\n";
        detail::dump_block(u, a, 2, os, printed);
      }
    }
  }
  return os.str();
}

}  // namespace hotpath::jit
