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

#include <algorithm>
#include <map>
#include <memory>
#include <vector>

#include "hotpath/bytecode.hpp"
#include "hotpath/host/build_interp.hpp"
#include "hotpath/host/exec.hpp"
#include "hotpath/host/ir.hpp"
#include "hotpath/jit/ir.hpp"

namespace hotpath::jit {

struct MethodConfig {
  int max_if_nodes = 64;   // branch blow-up threshold
  bool then_first = true;  // backtracking order of conditional arms
};

enum class MethodAbort {
  None,
  NotEntry,      // asked to compile a pc that is not a function entry
  BranchBlowUp,  // too many conditionals; fall back to the trace strategy
  Unstructured,  // a loop with multiple entry points
  UnknownCallee, // call target not in the function table
  NotTraceable,  // host construct outside the recordable subset
};

struct MethodResult {
  std::shared_ptr<CompiledUnit> unit;
  MethodAbort abort = MethodAbort::None;
};

// Method compilation by tracing: drive the tracer over the interpreter
// symbolically, from the function's entry to every return. Conditionals
// fork the tracer (checkpoint, trace one arm to its end, restore, trace
// the other); loops split into entry/body/after parts; base-program calls
// stay calls. Values are symbolic: red registers carry trace registers,
// greens carry concrete slots, and sp stays an offset off the entry sp.
class MethodTracer {
 public:
  MethodTracer(const host::HostProgram& hp, const BytecodeProgram& program,
               MethodConfig cfg = {})
      : hp_(hp), prog_(program), cfg_(cfg),
        dispatch_(hp.functions[hp.dispatch_fn]) {
    for (size_t i = 0; i < dispatch_.code.size(); ++i)
      if (dispatch_.code[i].op == host::HOp::JitMergePoint) merge_ip_ = i;
  }

  MethodResult trace(int64_t entry_pc) {
    MethodResult res;
    const FunctionEntry* fn = prog_.function_at(entry_pc);
    if (!fn || fn->name == "main") {
      res.abort = MethodAbort::NotEntry;
      return res;
    }
    fn_begin_ = entry_pc;
    fn_end_ = (int64_t)prog_.code.size();
    for (const auto& f : prog_.functions)
      if (f.entry > entry_pc) fn_end_ = std::min(fn_end_, f.entry);

    if (!scan_loops()) {
      res.abort = MethodAbort::Unstructured;
      return res;
    }

    unit_ = std::make_shared<CompiledUnit>();
    unit_->strategy = Strategy::Method;
    unit_->entry_pc = entry_pc;
    unit_->fn_index = prog_.function_index_at(entry_pc);
    unit_->name = "method " + fn->name;
    next_reg_ = 0;
    unit_->base_reg = alloc_reg();

    SymState st;
    st.regs.assign(dispatch_.nregs, SymVal{});
    st.regs[host::kArrOp + 0] = SymVal::green(array_slot(host::kArrOp));
    st.regs[1] = SymVal::green(array_slot(host::kArrA));
    st.regs[2] = SymVal::green(array_slot(host::kArrB));
    st.regs[3] = SymVal::green(array_slot(host::kArrStack));
    st.regs[4] = SymVal::green(array_slot(host::kArrOut));
    st.regs[hp_.pc_reg] = SymVal::green(int_slot(entry_pc));
    st.regs[hp_.sp_reg] = SymVal::affine(unit_->base_reg, 0);
    st.ip = merge_ip_;

    abort_ = MethodAbort::None;
    int32_t entry_block = new_block();
    walk_path(st, entry_block, {});
    // Loop-after paths queued during body tracing (appended after the body
    // per the loop-splitting scheme).
    while (abort_ == MethodAbort::None && !after_queue_.empty()) {
      auto item = std::move(after_queue_.front());
      after_queue_.erase(after_queue_.begin());
      walk_path(item.state, item.block, item.loops);
    }
    if (abort_ != MethodAbort::None) {
      res.abort = abort_;
      return res;
    }
    unit_->nregs = next_reg_;
    verify_unit(*unit_);
    res.unit = unit_;
    return res;
  }

 private:
  struct SymVal {
    enum Kind : uint8_t { Green, Red, Affine } kind = Green;
    Slot val{};
    int32_t treg = -1;
    int32_t base = -1;
    int64_t delta = 0;

    static SymVal green(Slot s) {
      SymVal v;
      v.val = s;
      return v;
    }
    static SymVal red(int32_t r) {
      SymVal v;
      v.kind = Red;
      v.treg = r;
      return v;
    }
    static SymVal affine(int32_t base, int64_t delta) {
      SymVal v;
      v.kind = Affine;
      v.base = base;
      v.delta = delta;
      return v;
    }
  };

  struct SymState {
    std::vector<SymVal> regs;
    size_t ip = 0;

    int64_t pc(const host::HostProgram& hp) const { return regs[hp.pc_reg].val.v; }
  };

  // An open loop during tracing; shared so afters collected on any forked
  // arm land in one place.
  struct OpenLoop {
    int64_t head_pc;
    int64_t region_end;
    int32_t head_block;
    size_t loop_index;  // into unit_->loops
  };

  struct AfterItem {
    SymState state;
    int32_t block;
    std::vector<OpenLoop> loops;
  };

  int32_t alloc_reg() { return next_reg_++; }

  int32_t new_block() {
    if ((int64_t)unit_->blocks.size() > 4096) fail(MethodAbort::NotTraceable);
    unit_->blocks.push_back(TraceBlock{});
    return (int32_t)unit_->blocks.size() - 1;
  }

  void emit(int32_t blk, TraceOp op) {
    if (++emitted_ops_ > 500000) fail(MethodAbort::NotTraceable);
    unit_->blocks[blk].ops.push_back(op);
  }

  int32_t materialize(int32_t blk, SymVal& v) {
    switch (v.kind) {
      case SymVal::Red:
        return v.treg;
      case SymVal::Green: {
        int32_t r = alloc_reg();
        emit(blk, TraceOp{TOp::Const, Space::Stack, false, true, false, r, -1, -1, 0, -1,
                          v.val});
        v = SymVal::red(r);
        return r;
      }
      case SymVal::Affine: {
        int32_t r = alloc_reg();
        emit(blk, TraceOp{TOp::Add, Space::Stack, true, true, false, r, v.base, -1, 0, -1,
                          int_slot(v.delta)});
        v = SymVal::red(r);
        return r;
      }
    }
    return -1;
  }

  // Emits a load of the user-stack cell at sp+off into a fresh register.
  int32_t load_cell(int32_t blk, const SymVal& sp, int64_t off) {
    int32_t dst = alloc_reg();
    emit(blk, TraceOp{TOp::StackLoad, Space::Stack, false, true, false, dst, sp.base, -1,
                      (int32_t)(sp.delta + off), -1, Slot{}});
    return dst;
  }

  // Finds backward-jump targets inside the function; fails on loops with
  // extra entry edges.
  bool scan_loops() {
    loop_regions_.clear();
    for (int64_t pc = fn_begin_; pc < fn_end_; ++pc) {
      const Instruction& ins = prog_.code[pc];
      if ((ins.op == Opcode::JUMP || ins.op == Opcode::JUMP_IF) && ins.a <= pc &&
          ins.a >= fn_begin_) {
        auto& end = loop_regions_[ins.a];
        end = std::max(end, pc);
      }
    }
    for (const auto& [head, end] : loop_regions_) {
      for (int64_t pc = fn_begin_; pc < fn_end_; ++pc) {
        if (pc >= head && pc <= end) continue;
        const Instruction& ins = prog_.code[pc];
        if ((ins.op == Opcode::JUMP || ins.op == Opcode::JUMP_IF) && ins.a > head &&
            ins.a <= end)
          return false;  // jumps into the middle of the loop
      }
    }
    return true;
  }

  void fail(MethodAbort a) {
    if (abort_ == MethodAbort::None) abort_ = a;
  }

  // Traces one path until it returns, re-enters a loop, or aborts.
  // `loops` is the stack of open loops (innermost last).
  void walk_path(SymState st, int32_t blk, std::vector<OpenLoop> loops) {
    bool fresh_head = false;
    while (abort_ == MethodAbort::None) {
      int64_t pc = st.pc(hp_);
      if (pc < 0 || pc >= (int64_t)prog_.code.size()) return fail(MethodAbort::NotTraceable);

      // Loop bookkeeping relative to the innermost open loop. Skipped for
      // the arrival that just opened the loop: reaching the head again
      // after that is what makes a back edge.
      if (!loops.empty() && !fresh_head) {
        const OpenLoop& in = loops.back();
        if (pc == in.head_pc) {
          unit_->blocks[blk].term =
              Terminal{Term::JumpBlock, -1, in.head_block, -1, 0, -1, -1, 0, 0, 0};
          return;
        }
        if (pc < fn_begin_ || pc >= fn_end_ || pc < in.head_pc || pc > in.region_end) {
          // Leaving the loop: jump to a fresh after-trace, queued to be
          // traced once the body is finished.
          int32_t after = new_block();
          unit_->loops[in.loop_index].afters.push_back(after);
          unit_->blocks[blk].term =
              Terminal{Term::JumpBlock, -1, after, -1, 0, -1, -1, 0, 0, 0};
          std::vector<OpenLoop> outer(loops.begin(), loops.end() - 1);
          after_queue_.push_back(AfterItem{std::move(st), after, std::move(outer)});
          return;
        }
        for (size_t i = 0; i + 1 < loops.size(); ++i)
          if (pc == loops[i].head_pc) return fail(MethodAbort::Unstructured);
      }
      if (auto it = loop_regions_.find(pc); it != loop_regions_.end() && !fresh_head) {
        bool already_open = false;
        for (const auto& l : loops)
          if (l.head_pc == pc) already_open = true;
        if (!already_open) {
          // Split: end the current part at the loop entry, open the body.
          int32_t head = new_block();
          unit_->loops.push_back(LoopInfo{head, {}});
          unit_->blocks[blk].term =
              Terminal{Term::JumpBlock, -1, head, -1, 0, -1, -1, 0, 0, 0};
          loops.push_back(OpenLoop{pc, it->second, head, unit_->loops.size() - 1});
          blk = head;
          fresh_head = true;
          continue;
        }
      }
      fresh_head = false;

      const Instruction& ins = prog_.code[pc];
      const SymVal sp = st.regs[hp_.sp_reg];
      if (sp.kind != SymVal::Affine) return fail(MethodAbort::NotTraceable);

      switch (ins.op) {
        case Opcode::RETURN: {
          // Protocol-polymorphic return: the popped flag selects between
          // returning to the host caller and jumping to the pushed
          // return address.
          int32_t r_val = load_cell(blk, sp, -1);
          int32_t r_flag = load_cell(blk, sp, -2);
          Terminal t;
          t.kind = Term::Ret;
          t.a = r_val;
          t.flag_reg = r_flag;
          t.base_reg = sp.base;
          t.addr_off = (int32_t)(sp.delta - 3);
          t.sp_us = (int32_t)(sp.delta - 2);
          t.sp_hs = (int32_t)(sp.delta - 2);
          unit_->blocks[blk].term = t;
          return;
        }
        case Opcode::JUMP_IF: {
          if (++unit_->if_nodes > cfg_.max_if_nodes) return fail(MethodAbort::BranchBlowUp);
          int32_t cond = load_cell(blk, sp, -1);
          SymState base_st = st;
          base_st.regs[hp_.sp_reg] = SymVal::affine(sp.base, sp.delta - 1);
          int32_t bt = new_block(), be = new_block();
          Terminal t;
          t.kind = Term::If;
          t.a = cond;
          t.then_block = bt;   // fall-through: condition non-zero
          t.else_block = be;   // taken: condition zero
          unit_->blocks[blk].term = t;
          // Checkpoint/backtrack: each arm starts from a copy of the
          // tracer state saved before the branch.
          SymState then_st = base_st;
          then_st.regs[hp_.pc_reg] = SymVal::green(int_slot(pc + 1));
          SymState else_st = base_st;
          else_st.regs[hp_.pc_reg] = SymVal::green(int_slot(ins.a));
          if (cfg_.then_first) {
            walk_path(std::move(then_st), bt, loops);
            walk_path(std::move(else_st), be, loops);
          } else {
            walk_path(std::move(else_st), be, loops);
            walk_path(std::move(then_st), bt, loops);
          }
          return;
        }
        case Opcode::CALL: {
          // Leave the call in the residue (host-stack protocol) and keep
          // tracing the continuation with a fresh result register.
          const FunctionEntry* callee = prog_.function_at(ins.a);
          if (!callee) return fail(MethodAbort::UnknownCallee);
          int64_t k = ins.b;
          // Re-seat arguments one cell up, HS flag below them.
          for (int64_t i = 1; i <= k; ++i) {
            int32_t v = load_cell(blk, sp, -i);
            emit(blk, TraceOp{TOp::StackStore, Space::Stack, false, true, false, -1,
                              sp.base, v, (int32_t)(sp.delta - i + 1), -1, Slot{}});
          }
          emit(blk, TraceOp{TOp::PushFlag, Space::Stack, false, true, false, -1, sp.base,
                            -1, (int32_t)(sp.delta - k), -1, flag_hs()});
          CallInfo ci;
          ci.callee_entry = ins.a;
          ci.host_protocol = true;
          ci.dst = alloc_reg();
          ci.base_reg = sp.base;
          ci.sp_entry_delta = (int32_t)(sp.delta + 1);
          ci.sp_after_delta = (int32_t)(sp.delta - k + 1);
          unit_->calls.push_back(ci);
          ++unit_->call_sites;
          emit(blk, TraceOp{TOp::Call, Space::Stack, false, true, false, -1, -1, -1, 0,
                            (int32_t)unit_->calls.size() - 1, Slot{}});
          emit(blk, TraceOp{TOp::StackStore, Space::Stack, false, true, false, -1, sp.base,
                            ci.dst, (int32_t)(sp.delta - k), -1, Slot{}});
          st.regs[hp_.sp_reg] = SymVal::affine(sp.base, sp.delta - k + 1);
          st.regs[hp_.pc_reg] = SymVal::green(int_slot(pc + 1));
          continue;
        }
        case Opcode::HALT:
          return fail(MethodAbort::NotTraceable);
        default: {
          // Evaluate the handler's host IR symbolically; green operations
          // fold, red ones land in the residue.
          st.ip = merge_ip_ + 1;
          if (!walk_host_instruction(st, blk)) return;
          continue;
        }
      }
    }
  }

  // Walks host IR from st.ip until control returns to the merge point.
  // Returns false when the path aborted.
  bool walk_host_instruction(SymState& st, int32_t blk) {
    using host::HOp;
    int64_t fuel = 100000;
    while (fuel-- > 0) {
      const host::HostInstr& I = dispatch_.code[st.ip];
      switch (I.op) {
        case HOp::JitMergePoint:
          return true;  // back at the dispatch head: one instruction done
        case HOp::CanEnterJit:
          ++st.ip;
          break;
        case HOp::IsMj:
          st.regs[I.dst] = SymVal::green(int_slot(1));  // method context
          ++st.ip;
          break;
        case HOp::Const:
          st.regs[I.dst] = SymVal::green(I.imm);
          ++st.ip;
          break;
        case HOp::Move:
          st.regs[I.dst] = st.regs[I.a];
          ++st.ip;
          break;
        case HOp::IAdd: case HOp::ISub: case HOp::IMul:
        case HOp::ICmpLe: case HOp::ICmpLt: case HOp::ICmpEq: {
          SymVal& a = st.regs[I.a];
          SymVal bimm = I.b_is_imm ? SymVal::green(I.imm) : st.regs[I.b];
          bool a_green = a.kind == SymVal::Green;
          bool b_green = bimm.kind == SymVal::Green;
          if (a_green && b_green) {
            st.regs[I.dst] = SymVal::green(host::host_binop(I.op, a.val, bimm.val));
          } else if (a.kind == SymVal::Affine && b_green && bimm.val.is_int() &&
                     (I.op == HOp::IAdd || I.op == HOp::ISub)) {
            st.regs[I.dst] = SymVal::affine(
                a.base, I.op == HOp::IAdd ? a.delta + bimm.val.v : a.delta - bimm.val.v);
          } else {
            static constexpr TOp kMap[] = {TOp::Add, TOp::Sub, TOp::Mul,
                                           TOp::CmpLe, TOp::CmpLt, TOp::CmpEq};
            TOp top = kMap[(int)I.op - (int)HOp::IAdd];
            int32_t ra, rb = -1;
            bool b_is_imm = false;
            Slot imm{};
            if (b_green) {
              ra = materialize(blk, a);
              b_is_imm = true;
              imm = bimm.val;
            } else if (a_green && (top == TOp::Add || top == TOp::Mul || top == TOp::CmpEq)) {
              ra = materialize(blk, st.regs[I.b]);
              b_is_imm = true;
              imm = a.val;
            } else {
              ra = materialize(blk, a);
              rb = materialize(blk, I.b_is_imm ? bimm : st.regs[I.b]);
            }
            int32_t dst = alloc_reg();
            emit(blk, TraceOp{top, Space::Stack, b_is_imm, true, false, dst, ra, rb, 0, -1,
                              imm});
            st.regs[I.dst] = SymVal::red(dst);
          }
          ++st.ip;
          break;
        }
        case HOp::ArrayRead: {
          const SymVal& arr = st.regs[I.a];
          if (arr.kind != SymVal::Green || arr.val.kind != SlotKind::Array) {
            fail(MethodAbort::NotTraceable);
            return false;
          }
          int64_t id = arr.val.v;
          SymVal idx = I.b_is_imm ? SymVal::green(I.imm) : st.regs[I.b];
          if (id == host::kArrOp || id == host::kArrA || id == host::kArrB) {
            if (idx.kind != SymVal::Green) {
              fail(MethodAbort::NotTraceable);
              return false;
            }
            int64_t i = idx.val.v;
            if (i < 0 || i >= (int64_t)prog_.code.size()) {
              fail(MethodAbort::NotTraceable);
              return false;
            }
            const Instruction& ins = prog_.code[i];
            int64_t v = id == host::kArrOp ? (int64_t)ins.op : id == host::kArrA ? ins.a
                                                                                 : ins.b;
            st.regs[I.dst] = SymVal::green(int_slot(v));
            ++st.ip;
            break;
          }
          Space space = id == host::kArrStack ? Space::Stack : Space::Out;
          int32_t baser;
          int32_t off = 0;
          if (idx.kind == SymVal::Affine) {
            baser = idx.base;
            off = (int32_t)idx.delta;
          } else if (idx.kind == SymVal::Red) {
            baser = idx.treg;
          } else {
            SymVal tmp = idx;
            baser = materialize(blk, tmp);
          }
          int32_t dst = alloc_reg();
          emit(blk, TraceOp{TOp::StackLoad, space, false, true, false, dst, baser, -1, off,
                            -1, Slot{}});
          st.regs[I.dst] = SymVal::red(dst);
          ++st.ip;
          break;
        }
        case HOp::ArrayWrite: {
          const SymVal& arr = st.regs[I.a];
          if (arr.kind != SymVal::Green || arr.val.kind != SlotKind::Array) {
            fail(MethodAbort::NotTraceable);
            return false;
          }
          int64_t id = arr.val.v;
          if (id != host::kArrStack && id != host::kArrOut) {
            fail(MethodAbort::NotTraceable);
            return false;
          }
          Space space = id == host::kArrStack ? Space::Stack : Space::Out;
          SymVal idx = I.b_is_imm ? SymVal::green(I.imm) : st.regs[I.b];
          int32_t baser;
          int32_t off = 0;
          if (idx.kind == SymVal::Affine) {
            baser = idx.base;
            off = (int32_t)idx.delta;
          } else if (idx.kind == SymVal::Red) {
            baser = idx.treg;
          } else {
            SymVal tmp = idx;
            baser = materialize(blk, tmp);
          }
          const SymVal& v = st.regs[I.c];
          if (v.kind == SymVal::Green && v.val.is_flag()) {
            emit(blk, TraceOp{TOp::PushFlag, space, false, true, false, -1, baser, -1, off,
                              -1, v.val});
          } else if (v.kind == SymVal::Green) {
            emit(blk, TraceOp{TOp::StackStore, space, true, true, false, -1, baser, -1, off,
                              -1, v.val});
          } else {
            SymVal tmp = v;
            int32_t rv = materialize(blk, tmp);
            emit(blk, TraceOp{TOp::StackStore, space, false, true, false, -1, baser, rv, off,
                              -1, Slot{}});
          }
          ++st.ip;
          break;
        }
        case HOp::Branch: {
          const SymVal& c = st.regs[I.a];
          if (c.kind != SymVal::Green) {
            // Red branches belong to the JUMP_IF/RETURN handlers, which
            // are traced structurally, never through this path.
            fail(MethodAbort::NotTraceable);
            return false;
          }
          st.ip = c.val.v != 0 ? I.b : I.c;
          break;
        }
        case HOp::Jump:
          st.ip = I.b;
          break;
        case HOp::MkRet: {
          const SymVal& a = st.regs[I.a];
          if (a.kind != SymVal::Green) {
            fail(MethodAbort::NotTraceable);
            return false;
          }
          st.regs[I.dst] = SymVal::green(ret_slot(a.val.v));
          ++st.ip;
          break;
        }
        case HOp::RetTarget: {
          const SymVal& a = st.regs[I.a];
          if (a.kind != SymVal::Green || a.val.kind != SlotKind::RetAddr) {
            fail(MethodAbort::NotTraceable);
            return false;
          }
          st.regs[I.dst] = SymVal::green(int_slot(a.val.v));
          ++st.ip;
          break;
        }
        case HOp::Call:
        case HOp::Ret:
        case HOp::Trap:
          // The structural cases (CALL/RETURN/HALT opcodes) are handled
          // before the handler is entered; meeting these ops here means
          // the walk went somewhere unexpected.
          fail(MethodAbort::NotTraceable);
          return false;
      }
    }
    fail(MethodAbort::NotTraceable);
    return false;
  }

  const host::HostProgram& hp_;
  const BytecodeProgram& prog_;
  MethodConfig cfg_;
  const host::HostFunction& dispatch_;
  size_t merge_ip_ = 0;

  int64_t fn_begin_ = 0, fn_end_ = 0;
  std::map<int64_t, int64_t> loop_regions_;  // head pc -> latest back-edge pc
  std::shared_ptr<CompiledUnit> unit_;
  std::vector<AfterItem> after_queue_;
  int32_t next_reg_ = 0;
  int64_t emitted_ops_ = 0;
  MethodAbort abort_ = MethodAbort::None;
};

// Alg. 3 entry point: produces a method trace for the function entered at
// `entry_pc`, or nothing when `entry_pc` is not a method entry.
inline MethodResult jit_meta_method(const host::HostProgram& hp, const BytecodeProgram& p,
                                    int64_t entry_pc, MethodConfig cfg = {}) {
  return MethodTracer(hp, p, cfg).trace(entry_pc);
}

}  // namespace hotpath::jit
