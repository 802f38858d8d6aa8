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

#include <cstring>
#include <string>
#include <vector>

#include "hotpath/bytecode.hpp"
#include "hotpath/host/ir.hpp"

namespace hotpath::host {

constexpr int64_t kMaxArrayCells = 1 << 21;

// The mutable array table one execution owns: code arrays (immutable in
// practice), the user stack and the output buffer.
struct ExecContext {
  std::vector<std::vector<Slot>> arrays;

  static ExecContext for_program(const BytecodeProgram& p) {
    ExecContext ctx;
    ctx.arrays.resize(5);
    auto& op = ctx.arrays[kArrOp];
    auto& a = ctx.arrays[kArrA];
    auto& b = ctx.arrays[kArrB];
    op.reserve(p.code.size());
    a.reserve(p.code.size());
    b.reserve(p.code.size());
    for (const auto& ins : p.code) {
      op.push_back(int_slot((int64_t)ins.op));
      a.push_back(int_slot(ins.a));
      b.push_back(int_slot(ins.b));
    }
    ctx.arrays[kArrOut].push_back(int_slot(0));
    return ctx;
  }

  void reset_run_state() {
    arrays[kArrStack].clear();
    arrays[kArrOut].assign(1, int_slot(0));
  }

  std::vector<int64_t> output() const {
    const auto& out = arrays[kArrOut];
    std::vector<int64_t> r;
    int64_t n = out.empty() ? 0 : out[0].v;
    for (int64_t i = 1; i <= n; ++i) r.push_back(out[i].v);
    return r;
  }

  Slot read(int64_t arr, int64_t idx) const {
    const auto& v = arrays[arr];
    if (idx < 0 || idx >= (int64_t)v.size())
      throw VmError(arr == kArrStack ? VmError::Kind::StackUnderflow : VmError::Kind::BadPc,
                    "array read out of bounds: arr=" + std::to_string(arr) +
                        " idx=" + std::to_string(idx));
    return v[idx];
  }

  void write(int64_t arr, int64_t idx, Slot s) {
    auto& v = arrays[arr];
    if (idx < 0)
      throw VmError(VmError::Kind::StackUnderflow, "array write below zero");
    if (idx >= (int64_t)v.size()) {
      if (idx >= kMaxArrayCells)
        throw VmError(VmError::Kind::StackOverflow, "array grew past the cell limit");
      v.resize(idx + 1);
    }
    v[idx] = s;
  }
};

// Shared per-op value semantics, used identically by the plain executor
// and by trace-time green folding.
inline Slot host_binop(HOp op, const Slot& a, const Slot& b) {
  switch (op) {
    case HOp::ICmpEq:
      return int_slot(a == b ? 1 : 0);
    default:
      break;
  }
  if (!a.is_int() || !b.is_int())
    throw VmError(VmError::Kind::KindMismatch,
                  std::string(hop_name(op)) + " on non-integer slots (" + slot_str(a) +
                      ", " + slot_str(b) + ")");
  switch (op) {
    case HOp::IAdd: return int_slot(wrap_add(a.v, b.v));
    case HOp::ISub: return int_slot(wrap_sub(a.v, b.v));
    case HOp::IMul: return int_slot(wrap_mul(a.v, b.v));
    case HOp::ICmpLe: return int_slot(a.v <= b.v ? 1 : 0);
    case HOp::ICmpLt: return int_slot(a.v < b.v ? 1 : 0);
    default:
      throw VmError(VmError::Kind::CompilerBug, "host_binop on a non-arithmetic op");
  }
}

[[noreturn]] inline void host_trap(int64_t code, const Slot& ctx_val) {
  if (code == kTrapFlagMismatch)
    throw VmError(VmError::Kind::FlagMismatch,
                  "RETURN popped " + slot_str(ctx_val) + " where a protocol flag was expected");
  throw VmError(VmError::Kind::CompilerBug, "bad opcode " + slot_str(ctx_val));
}

inline void check_flag_pop(const Slot& s) {
  if (!s.is_flag())
    throw VmError(VmError::Kind::FlagMismatch,
                  "RETURN popped " + slot_str(s) + " where a protocol flag was expected");
}

// A hook observes the interpreter's hint pseudo-ops. The default makes
// them no-ops: plain interpreter-only execution. on_merge_point may run
// compiled units or a recording session on the live frame; it returns the
// host instruction index to resume from, or -1 to continue normally.
// Frames are addressed by offset into the executor's register pool: hooks
// can recurse into the executor, which may reallocate the pool.
struct NullHook {
  int64_t on_merge_point(size_t /*frame_off*/) { return -1; }
  void on_can_enter_jit(size_t /*frame_off*/) {}
  bool is_mj() const { return false; }
  void count_flag_push() {}
  void count_flag_pop() {}
};

// Direct execution of host IR. One instance per (program, run); re-entrant
// for the recursive dispatch activations of the host-stack protocol.
template <class Hook>
class HostExecutor {
 public:
  HostExecutor(const HostProgram& hp, ExecContext& ctx, Hook& hook,
               int recursion_limit = 10000)
      : hp_(hp), ctx_(ctx), hook_(hook), recursion_limit_(recursion_limit) {}

  Slot call_function(int fn_idx, const Slot* args, int nargs) {
    if (++depth_ > recursion_limit_) {
      --depth_;
      throw VmError(VmError::Kind::RecursionLimit,
                    "host recursion limit (" + std::to_string(recursion_limit_) +
                        " activations) exceeded");
    }
    const HostFunction& f = hp_.functions[fn_idx];
    size_t base = regs_.size();
    regs_.resize(base + f.nregs);
    std::memcpy(regs_.data() + base, args, sizeof(Slot) * nargs);
    Slot result = run(f, regs_.data() + base);
    regs_.resize(base);
    --depth_;
    return result;
  }

  int depth() const { return depth_; }

  // Drops activation state while keeping pool capacity (between runs).
  void reset_run_state() {
    depth_ = 0;
    regs_.clear();
  }

  // Live frame access for hooks; only valid until the next activation.
  Slot* frame(size_t off) { return regs_.data() + off; }
  const std::vector<Slot>& pool() const { return regs_; }

 private:
  Slot run(const HostFunction& f, Slot* regs) {
    size_t ip = 0;
    while (true) {
      const HostInstr& I = f.code[ip];
      switch (I.op) {
        case HOp::Const:
          regs[I.dst] = I.imm;
          ++ip;
          break;
        case HOp::Move:
          regs[I.dst] = regs[I.a];
          ++ip;
          break;
        case HOp::IAdd: case HOp::ISub: case HOp::IMul:
        case HOp::ICmpLe: case HOp::ICmpLt: case HOp::ICmpEq:
          regs[I.dst] = host_binop(I.op, regs[I.a], I.b_is_imm ? I.imm : regs[I.b]);
          ++ip;
          break;
        case HOp::ArrayRead: {
          const Slot& arr = regs[I.a];
          if (arr.kind != SlotKind::Array)
            throw VmError(VmError::Kind::KindMismatch, "array_read on a non-array slot");
          int64_t idx = I.b_is_imm ? I.imm.v : regs[I.b].v;
          Slot s = ctx_.read(arr.v, idx);
          if (I.note == Note::FlagPopCheck) {
            check_flag_pop(s);
            hook_.count_flag_pop();
          }
          regs[I.dst] = s;
          ++ip;
          break;
        }
        case HOp::ArrayWrite: {
          const Slot& arr = regs[I.a];
          if (arr.kind != SlotKind::Array)
            throw VmError(VmError::Kind::KindMismatch, "array_write on a non-array slot");
          int64_t idx = I.b_is_imm ? I.imm.v : regs[I.b].v;
          if (I.note == Note::FlagPush) hook_.count_flag_push();
          ctx_.write(arr.v, idx, regs[I.c]);
          ++ip;
          break;
        }
        case HOp::Branch:
          ip = regs[I.a].v != 0 ? I.b : I.c;
          break;
        case HOp::Jump:
          ip = I.b;
          break;
        case HOp::Call: {
          const auto& argregs = f.arg_tables[I.c];
          if (argregs.size() > 16)
            throw VmError(VmError::Kind::CompilerBug, "too many host call arguments");
          Slot args[16];
          for (size_t j = 0; j < argregs.size(); ++j) args[j] = regs[argregs[j]];
          // The callee may reallocate regs_; recompute our base afterwards.
          size_t off = regs - regs_.data();
          Slot rv = call_function(I.a, args, (int)argregs.size());
          regs = regs_.data() + off;
          regs[I.dst] = rv;
          ++ip;
          break;
        }
        case HOp::Ret:
          return regs[I.a];
        case HOp::MkRet: {
          const Slot& s = regs[I.a];
          if (!s.is_int())
            throw VmError(VmError::Kind::KindMismatch, "mk_ret on a non-integer");
          regs[I.dst] = ret_slot(s.v);
          ++ip;
          break;
        }
        case HOp::RetTarget: {
          const Slot& s = regs[I.a];
          if (s.kind != SlotKind::RetAddr)
            throw VmError(VmError::Kind::FlagMismatch,
                          "return address expected on the user stack, found " + slot_str(s));
          regs[I.dst] = int_slot(s.v);
          ++ip;
          break;
        }
        case HOp::Trap:
          host_trap(I.imm.v, I.a >= 0 ? regs[I.a] : Slot{});
          break;
        case HOp::JitMergePoint: {
          // The hook may recurse into this executor (bridged activations),
          // growing the register pool; recompute the frame pointer.
          size_t off = regs - regs_.data();
          int64_t resume = hook_.on_merge_point(off);
          regs = regs_.data() + off;
          ip = resume < 0 ? ip + 1 : (size_t)resume;
          break;
        }
        case HOp::CanEnterJit: {
          size_t off = regs - regs_.data();
          hook_.on_can_enter_jit(off);
          regs = regs_.data() + off;
          ++ip;
          break;
        }
        case HOp::IsMj:
          regs[I.dst] = int_slot(hook_.is_mj() ? 1 : 0);
          ++ip;
          break;
      }
    }
  }

  const HostProgram& hp_;
  ExecContext& ctx_;
  Hook& hook_;
  int recursion_limit_;
  int depth_ = 0;
  std::vector<Slot> regs_;
};

// Runs a bytecode program on the host-IR interpreter with no JIT attached.
inline std::vector<int64_t> execute_host(const HostProgram& hp, const BytecodeProgram& p,
                                         int recursion_limit = 10000) {
  ExecContext ctx = ExecContext::for_program(p);
  NullHook hook;
  HostExecutor<NullHook> ex(hp, ctx, hook, recursion_limit);
  Slot args[7] = {array_slot(kArrOp), array_slot(kArrA), array_slot(kArrB),
                  array_slot(kArrStack), array_slot(kArrOut), int_slot(p.entry),
                  int_slot(0)};
  ex.call_function(hp.dispatch_fn, args, 7);
  return ctx.output();
}

}  // namespace hotpath::host
