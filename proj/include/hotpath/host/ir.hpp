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
#include <sstream>
#include <string>
#include <vector>

#include "hotpath/slot.hpp"

namespace hotpath::host {

// Array-table layout shared by builder, executor and tracers.
enum ArrayId : int64_t {
  kArrOp = 0,    // opcode per instruction (green)
  kArrA = 1,     // first operand (green)
  kArrB = 2,     // second operand (green)
  kArrStack = 3, // user stack (red)
  kArrOut = 4,   // output; cell 0 is the count, values from cell 1 (red)
};

// The host IR is the language the bytecode interpreter itself is written
// in. Reifying the interpreter as data is what lets the tracers observe
// its operations; plain execution interprets this IR directly.
enum class HOp : uint8_t {
  Const,       // dst <- imm
  Move,        // dst <- r[a]
  IAdd,        // dst <- r[a] + (r[b] | imm)      int x int, wrapping
  ISub,
  IMul,
  ICmpLe,      // dst <- 0/1                      int x int
  ICmpLt,
  ICmpEq,      // dst <- 0/1                      full slot equality
  ArrayRead,   // dst <- array(r[a]) [ r[b] | imm ]
  ArrayWrite,  // array(r[a]) [ r[b] | imm ] <- r[c]
  Branch,      // if r[a] != 0 goto b else goto c
  Jump,        // goto b
  Call,        // dst <- call functions[a](args_table[c]...)
  Ret,         // return r[a]
  MkRet,       // dst <- RetAddr(payload of r[a])
  RetTarget,   // dst <- Int(payload of r[a]); traps unless r[a] is a RetAddr
  Trap,        // fatal diagnostic; imm.v selects the message, r[a] is context
  JitMergePoint,  // hint: top of the dispatch loop (greens/reds in function metadata)
  CanEnterJit,    // hint: a backward control transfer in the base program just happened
  IsMj,        // dst <- 1 in a method-compilation context, else 0
};

inline const char* hop_name(HOp op) {
  switch (op) {
    case HOp::Const: return "const";
    case HOp::Move: return "move";
    case HOp::IAdd: return "iadd";
    case HOp::ISub: return "isub";
    case HOp::IMul: return "imul";
    case HOp::ICmpLe: return "icmp_le";
    case HOp::ICmpLt: return "icmp_lt";
    case HOp::ICmpEq: return "icmp_eq";
    case HOp::ArrayRead: return "array_read";
    case HOp::ArrayWrite: return "array_write";
    case HOp::Branch: return "branch";
    case HOp::Jump: return "jump";
    case HOp::Call: return "call";
    case HOp::Ret: return "ret";
    case HOp::MkRet: return "mk_ret";
    case HOp::RetTarget: return "ret_target";
    case HOp::Trap: return "trap";
    case HOp::JitMergePoint: return "jit_merge_point";
    case HOp::CanEnterJit: return "can_enter_jit";
    case HOp::IsMj: return "is_mj";
  }
  return "?";
}

// Instrumentation markers. The flag markers drive the stack-hybridization
// balance counters and the dynamic flag-kind check at RETURN.
enum class Note : uint8_t { None, FlagPush, FlagPopCheck };

enum TrapCode : int64_t {
  kTrapBadOpcode = 1,
  kTrapFlagMismatch = 2,
};

struct HostInstr {
  HOp op = HOp::Trap;
  int32_t dst = -1;
  int32_t a = -1;
  int32_t b = -1;
  int32_t c = -1;
  Slot imm{};
  bool b_is_imm = false;  // for IAdd..ICmpEq / ArrayRead / ArrayWrite index
  Note note = Note::None;
};

struct BlockInfo {
  std::string label;
  int32_t begin = 0;  // instruction index range [begin, end)
  int32_t end = 0;
};

struct HostFunction {
  std::string name;
  int nparams = 0;
  int nregs = 0;
  std::vector<std::string> reg_names;
  std::vector<HostInstr> code;
  std::vector<std::vector<int32_t>> arg_tables;
  std::vector<BlockInfo> blocks;
  // Hint coloring, shared by the merge point and every can_enter_jit.
  std::vector<int32_t> greens;
  std::vector<int32_t> reds;

  const BlockInfo* block_of(int32_t index) const {
    for (const auto& b : blocks)
      if (index >= b.begin && index < b.end) return &b;
    return nullptr;
  }
};

struct HostProgram {
  std::vector<HostFunction> functions;
  int dispatch_fn = -1;  // the `interp` function
  // Register indices of the interpreter's working state, recorded by the
  // builder so runtime hooks can read/write them.
  int32_t pc_reg = -1;
  int32_t sp_reg = -1;

  int function_index(const std::string& name) const {
    for (size_t i = 0; i < functions.size(); ++i)
      if (functions[i].name == name) return (int)i;
    return -1;
  }
};

// Line-oriented dump, stable for debugging and golden tests.
inline std::string dump_host(const HostProgram& p) {
  std::ostringstream os;
  for (const auto& f : p.functions) {
    os << "fn " << f.name << "(";
    for (int i = 0; i < f.nparams; ++i) os << (i ? ", " : "") << f.reg_names[i];
    os << ") regs=" << f.nregs << "\n";
    auto rn = [&](int32_t r) -> std::string {
      if (r < 0) return "_";
      if (r < (int32_t)f.reg_names.size() && !f.reg_names[r].empty()) return f.reg_names[r];
      return "r" + std::to_string(r);
    };
    for (size_t i = 0; i < f.code.size(); ++i) {
      for (const auto& b : f.blocks)
        if (b.begin == (int32_t)i) os << " " << b.label << ":\n";
      const auto& I = f.code[i];
      os << "   " << i << ": ";
      switch (I.op) {
        case HOp::Const:
          os << rn(I.dst) << " = const " << slot_str(I.imm);
          break;
        case HOp::Move:
          os << rn(I.dst) << " = " << rn(I.a);
          break;
        case HOp::IAdd: case HOp::ISub: case HOp::IMul:
        case HOp::ICmpLe: case HOp::ICmpLt: case HOp::ICmpEq:
          os << rn(I.dst) << " = " << hop_name(I.op) << " " << rn(I.a) << ", ";
          if (I.b_is_imm) os << slot_str(I.imm);
          else os << rn(I.b);
          break;
        case HOp::ArrayRead:
          os << rn(I.dst) << " = " << rn(I.a) << "[";
          if (I.b_is_imm) os << I.imm.v;
          else os << rn(I.b);
          os << "]";
          break;
        case HOp::ArrayWrite:
          os << rn(I.a) << "[";
          if (I.b_is_imm) os << I.imm.v;
          else os << rn(I.b);
          os << "] = " << rn(I.c);
          break;
        case HOp::Branch:
          os << "branch " << rn(I.a) << " -> @" << I.b << ", @" << I.c;
          break;
        case HOp::Jump:
          os << "jump @" << I.b;
          break;
        case HOp::Call: {
          os << rn(I.dst) << " = call " << p.functions[I.a].name << "(";
          const auto& args = f.arg_tables[I.c];
          for (size_t j = 0; j < args.size(); ++j) os << (j ? ", " : "") << rn(args[j]);
          os << ")";
          break;
        }
        case HOp::Ret:
          os << "ret " << rn(I.a);
          break;
        case HOp::MkRet:
          os << rn(I.dst) << " = mk_ret " << rn(I.a);
          break;
        case HOp::RetTarget:
          os << rn(I.dst) << " = ret_target " << rn(I.a);
          break;
        case HOp::Trap:
          os << "trap #" << I.imm.v;
          break;
        case HOp::JitMergePoint: {
          os << "jit_merge_point(greens=[";
          for (size_t j = 0; j < f.greens.size(); ++j) os << (j ? "," : "") << rn(f.greens[j]);
          os << "], reds=[";
          for (size_t j = 0; j < f.reds.size(); ++j) os << (j ? "," : "") << rn(f.reds[j]);
          os << "])";
          break;
        }
        case HOp::CanEnterJit:
          os << "can_enter_jit";
          break;
        case HOp::IsMj:
          os << rn(I.dst) << " = is_mj()";
          break;
      }
      if (I.note == Note::FlagPush) os << "  ; flag push";
      if (I.note == Note::FlagPopCheck) os << "  ; flag pop";
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace hotpath::host
