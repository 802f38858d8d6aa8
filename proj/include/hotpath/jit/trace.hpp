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
#include <memory>
#include <vector>

#include "hotpath/host/build_interp.hpp"
#include "hotpath/host/exec.hpp"
#include "hotpath/jit/ir.hpp"
#include "hotpath/rt/stats.hpp"

namespace hotpath::jit {

// Decisions the recorder defers to the runtime.
struct TracerPolicy {
  virtual ~TracerPolicy() = default;
  // Candidate trace heads; re-reaching one with foreign greens counts
  // toward the non-looping-path abort.
  virtual bool is_trace_head(int64_t pc) const = 0;
  // Function entries assigned to the method strategy; a traced call to one
  // becomes a bridge node instead of being inlined.
  virtual bool is_method_target(int64_t pc) const = 0;
  // Arity of the function entered at `pc` (for bridge stack bookkeeping).
  virtual int64_t arity_at(int64_t pc) const = 0;
};

struct TracerConfig {
  int64_t max_residue_ops = 20000;
  int64_t max_foreign_head_visits = 32;
};

enum class TraceAbort {
  None,
  TooLong,         // residue cap exceeded
  NonLoopingPath,  // foreign trace heads revisited beyond the bound
  NotTraceable,    // host construct outside the recordable subset
  LeftDispatch,    // execution finished before the loop closed
};

struct RecordOutcome {
  std::shared_ptr<CompiledUnit> unit;  // set when the trace closed
  TraceAbort abort = TraceAbort::None;
  size_t resume_ip = 0;  // host instruction index execution continues from
};

// Records one hot loop of the base program by following the interpreter's
// execution from a merge point until the same green key is reached again.
// Green host operations execute and fold away; operations touching red
// state are appended to the residue; red branches become guards. The
// recorder mutates the live interpreter frame: recording is execution.
class TraceRecorder {
 public:
  TraceRecorder(const host::HostProgram& hp, host::ExecContext& ctx,
                const TracerPolicy& policy, const TracerConfig& cfg,
                rt::RunStats* stats = nullptr)
      : hp_(hp), ctx_(ctx), policy_(policy), cfg_(cfg), stats_(stats) {}

  // `regs` is the live dispatch frame, positioned at the JitMergePoint
  // whose ip is `merge_ip`; `entry_pc` is the green key being compiled.
  RecordOutcome record(Slot* root_regs, size_t merge_ip, int64_t entry_pc) {
    const host::HostFunction& f = hp_.functions[hp_.dispatch_fn];
    entry_pc_ = entry_pc;
    unit_ = std::make_shared<CompiledUnit>();
    unit_->strategy = Strategy::Trace;
    unit_->entry_pc = entry_pc;
    unit_->name = "trace@" + std::to_string(entry_pc);
    unit_->blocks.resize(1);
    next_reg_ = 0;
    unit_->base_reg = alloc_reg();  // sp at entry

    frames_.clear();
    frames_.push_back(Frame{});
    Frame& root = frames_.back();
    root.fn = &f;
    root.regs = root_regs;
    root.shadow.assign(f.nregs, Shadow::green());
    root.shadow[hp_.sp_reg] = Shadow::affine(unit_->base_reg, 0);

    ip_ = merge_ip + 1;  // start just past the merge point
    cur_pc_ = root_regs[hp_.pc_reg].v;
    cur_sp_delta_ = 0;
    recording_ = true;

    while (true) {
      Frame& fr = frames_.back();
      const host::HostInstr& I = fr.fn->code[ip_];
      switch (step(fr, I)) {
        case StepResult::Continue:
          break;
        case StepResult::Closed: {
          finish_close();
          RecordOutcome out;
          out.unit = unit_;
          out.resume_ip = ip_;
          return out;
        }
        case StepResult::Abort: {
          RecordOutcome out;
          out.abort = abort_;
          out.resume_ip = ip_;
          return out;
        }
      }
    }
  }

 private:
  // Shadow of a host register during recording: where its value will come
  // from when the trace replays.
  struct Shadow {
    enum Kind : uint8_t { Green, Red, Affine, RetTargetOf } kind = Green;
    int32_t treg = -1;    // Red: trace register; RetTargetOf: the RetAddr's register
    int64_t delta = 0;    // Affine: base + delta
    int32_t base = -1;    // Affine

    static Shadow green() { return Shadow{}; }
    static Shadow red(int32_t r) {
      Shadow s;
      s.kind = Red;
      s.treg = r;
      return s;
    }
    static Shadow affine(int32_t base, int64_t delta) {
      Shadow s;
      s.kind = Affine;
      s.base = base;
      s.delta = delta;
      return s;
    }
  };

  struct Frame {
    const host::HostFunction* fn = nullptr;
    Slot* regs = nullptr;                 // live registers (root: executor frame)
    std::vector<Slot> owned;              // nested frames own their storage
    std::vector<Shadow> shadow;
    size_t ret_ip = 0;                    // caller resume point
    int32_t ret_dst = -1;                 // caller register for the result
  };

  enum class StepResult { Continue, Closed, Abort };

  int32_t alloc_reg() { return next_reg_++; }

  TraceBlock& blk() { return unit_->blocks[0]; }

  void emit(TraceOp op) {
    blk().ops.push_back(op);
    if ((int64_t)blk().ops.size() > cfg_.max_residue_ops) too_long_ = true;
  }

  // Materializes a shadow into a trace register (greens become consts,
  // affine sp forms become adds off the base).
  int32_t materialize(Frame& fr, int32_t hreg) {
    Shadow& s = fr.shadow[hreg];
    switch (s.kind) {
      case Shadow::Red:
        return s.treg;
      case Shadow::Green: {
        int32_t r = alloc_reg();
        emit(TraceOp{TOp::Const, Space::Stack, false, true, false, r, -1, -1, 0, -1,
                     fr.regs[hreg]});
        s = Shadow::red(r);
        return r;
      }
      case Shadow::Affine: {
        int32_t r = alloc_reg();
        TraceOp op{TOp::Add, Space::Stack, true, true, false, r, s.base, -1, 0, -1,
                   int_slot(s.delta)};
        emit(op);
        s = Shadow::red(r);
        return r;
      }
      case Shadow::RetTargetOf:
        // Only the promotion path consumes these.
        not_traceable_ = true;
        return -1;
    }
    return -1;
  }

  int make_snapshot(Frame& fr, bool pc_from_reg, int32_t pc_reg_or_unused) {
    DeoptSnapshot s;
    const Shadow& sp = fr.shadow[hp_.sp_reg];
    s.base_reg = sp.kind == Shadow::Affine ? sp.base : unit_->base_reg;
    s.sp_delta = sp.kind == Shadow::Affine ? (int32_t)sp.delta : 0;
    if (pc_from_reg) {
      s.pc_is_reg = true;
      s.pc_reg = pc_reg_or_unused;
    } else {
      s.pc_const = cur_pc_;
    }
    unit_->snaps.push_back(s);
    ++unit_->guard_count;
    return (int)unit_->snaps.size() - 1;
  }

  // Snapshot for re-executing the current base instruction: sp as it was
  // when the handler started, pc at the instruction itself. Sound under
  // forced failures because the interpreter re-decides from scratch.
  int instr_snapshot() {
    DeoptSnapshot s;
    s.base_reg = unit_->base_reg;
    s.sp_delta = (int32_t)cur_sp_delta_;
    s.pc_const = cur_pc_;
    unit_->snaps.push_back(s);
    ++unit_->guard_count;
    return (int)unit_->snaps.size() - 1;
  }

  // Emits a guard pinning `hreg` to its current concrete value; afterwards
  // the register folds as green. This is promotion: the way a red value
  // becomes part of the trace's key assumptions.
  void pin(Frame& fr, int32_t hreg, bool post_state) {
    Shadow& s = fr.shadow[hreg];
    int32_t src;
    if (s.kind == Shadow::RetTargetOf) {
      // Pin the underlying RetAddr cell; the extracted int then folds.
      src = s.treg;
      int snap = post_state ? make_snapshot(fr, true, src) : instr_snapshot();
      TraceOp g{TOp::Guard, Space::Stack, false, true, true, -1, src, -1, 0, snap,
                ret_slot(fr.regs[hreg].v)};
      emit(g);
    } else {
      src = materialize(fr, hreg);
      if (src < 0) return;
      int snap = post_state ? make_snapshot(fr, true, src) : instr_snapshot();
      TraceOp g{TOp::Guard, Space::Stack, false, true, true, -1, src, -1, 0, snap,
                fr.regs[hreg]};
      emit(g);
    }
    s = Shadow::green();
  }

  // Promotes every hint-listed green that is currently red. The only green
  // that can turn red in the shipped interpreter is pc (via a user-stack
  // return), and pinning it is what keeps return-continuation traces sound.
  void promote_greens(Frame& fr) {
    for (int32_t g : fr.fn->greens) {
      if (fr.shadow[g].kind != Shadow::Green) pin(fr, g, /*post_state=*/true);
    }
  }

  bool is_red_array(const Slot& arr) const {
    return arr.v == host::kArrStack || arr.v == host::kArrOut;
  }

  StepResult finish_step() {
    if (too_long_) {
      abort_ = TraceAbort::TooLong;
      return StepResult::Abort;
    }
    if (not_traceable_) {
      abort_ = TraceAbort::NotTraceable;
      return StepResult::Abort;
    }
    return StepResult::Continue;
  }

  StepResult step(Frame& fr, const host::HostInstr& I) {
    using host::HOp;
    switch (I.op) {
      case HOp::JitMergePoint: {
        if (frames_.size() == 1) {
          promote_greens(fr);
          if (not_traceable_ || too_long_) return finish_step();
          int64_t pc = fr.regs[hp_.pc_reg].v;
          if (pc == entry_pc_) return StepResult::Closed;
          // Bridge instead of inlining when the callee belongs to the
          // method strategy.
          if (policy_.is_method_target(pc)) {
            if (!bridge_call(fr, pc)) return StepResult::Abort;
            return finish_step();
          }
          if (policy_.is_trace_head(pc)) {
            if (++foreign_heads_ > cfg_.max_foreign_head_visits) {
              abort_ = TraceAbort::NonLoopingPath;
              return StepResult::Abort;
            }
          }
          cur_pc_ = pc;
          const Shadow& sp = fr.shadow[hp_.sp_reg];
          cur_sp_delta_ = sp.kind == Shadow::Affine ? sp.delta : 0;
        }
        ++ip_;
        return finish_step();
      }
      case HOp::CanEnterJit:
        if (frames_.size() == 1) promote_greens(fr);
        ++ip_;
        return finish_step();
      case HOp::IsMj:
        fr.regs[I.dst] = int_slot(0);  // trace-compilation context
        fr.shadow[I.dst] = Shadow::green();
        ++ip_;
        return StepResult::Continue;
      case HOp::Const:
        fr.regs[I.dst] = I.imm;
        fr.shadow[I.dst] = Shadow::green();
        ++ip_;
        return StepResult::Continue;
      case HOp::Move:
        fr.regs[I.dst] = fr.regs[I.a];
        fr.shadow[I.dst] = fr.shadow[I.a];
        ++ip_;
        return StepResult::Continue;
      case HOp::IAdd: case HOp::ISub: case HOp::IMul:
      case HOp::ICmpLe: case HOp::ICmpLt: case HOp::ICmpEq: {
        // A loaded return address flowing into arithmetic gets promoted
        // here: guard it to its observed value, after which the backward
        // checks and the dispatch key fold green.
        if (fr.shadow[I.a].kind == Shadow::RetTargetOf) pin(fr, I.a, true);
        if (!I.b_is_imm && fr.shadow[I.b].kind == Shadow::RetTargetOf) pin(fr, I.b, true);
        Slot bval = I.b_is_imm ? I.imm : fr.regs[I.b];
        Shadow bsh = I.b_is_imm ? Shadow::green() : fr.shadow[I.b];
        Slot result = host::host_binop(I.op, fr.regs[I.a], bval);
        Shadow& ash = fr.shadow[I.a];
        Shadow out;
        bool a_green = ash.kind == Shadow::Green;
        bool b_green = I.b_is_imm || bsh.kind == Shadow::Green;
        if (a_green && b_green) {
          out = Shadow::green();
        } else if (ash.kind == Shadow::Affine && b_green && bval.is_int() &&
                   (I.op == HOp::IAdd || I.op == HOp::ISub)) {
          out = Shadow::affine(ash.base, I.op == HOp::IAdd ? ash.delta + bval.v
                                                           : ash.delta - bval.v);
        } else {
          // Residue with green operands folded to immediates.
          static constexpr TOp kMap[] = {TOp::Add, TOp::Sub, TOp::Mul,
                                         TOp::CmpLe, TOp::CmpLt, TOp::CmpEq};
          TOp top = kMap[(int)I.op - (int)HOp::IAdd];
          int32_t ra, rb = -1;
          bool b_imm = false;
          Slot imm{};
          if (b_green) {
            ra = materialize(fr, I.a);
            b_imm = true;
            imm = bval;
          } else if (a_green && (top == TOp::Add || top == TOp::Mul || top == TOp::CmpEq)) {
            // Commute the green to the immediate side.
            ra = materialize(fr, I.b);
            b_imm = true;
            imm = fr.regs[I.a];
          } else {
            ra = materialize(fr, I.a);
            rb = materialize(fr, I.b);
          }
          if (ra < 0 || (!b_imm && rb < 0)) return finish_step();
          int32_t dst = alloc_reg();
          emit(TraceOp{top, Space::Stack, b_imm, true, false, dst, ra, rb, 0, -1, imm});
          out = Shadow::red(dst);
          eq_src_[dst] = {-1, Slot{}};
          if (top == TOp::CmpEq && b_imm) eq_src_[dst] = {ra, imm};
        }
        fr.regs[I.dst] = result;
        fr.shadow[I.dst] = out;
        ++ip_;
        return finish_step();
      }
      case HOp::ArrayRead: {
        const Slot& arr = fr.regs[I.a];
        if (arr.kind != SlotKind::Array)
          throw VmError(VmError::Kind::KindMismatch, "array_read on a non-array slot");
        int64_t idx = I.b_is_imm ? I.imm.v : fr.regs[I.b].v;
        Slot val = ctx_.read(arr.v, idx);
        if (I.note == host::Note::FlagPopCheck) {
          host::check_flag_pop(val);
          if (stats_) ++stats_->flag_pops;
        }
        if (!is_red_array(arr)) {
          // Immutable program data: a green read when the index is green.
          bool idx_green = I.b_is_imm || fr.shadow[I.b].kind == Shadow::Green;
          if (!idx_green) {
            not_traceable_ = true;
            return finish_step();
          }
          fr.regs[I.dst] = val;
          fr.shadow[I.dst] = Shadow::green();
          ++ip_;
          return StepResult::Continue;
        }
        Space space = arr.v == host::kArrStack ? Space::Stack : Space::Out;
        int32_t baser;
        int32_t off = 0;
        if (!I.b_is_imm && fr.shadow[I.b].kind == Shadow::Affine) {
          baser = fr.shadow[I.b].base;
          off = (int32_t)fr.shadow[I.b].delta;
        } else if (!I.b_is_imm && fr.shadow[I.b].kind == Shadow::Red) {
          baser = fr.shadow[I.b].treg;
        } else {
          // Green or immediate index: materialize it.
          int32_t r = alloc_reg();
          emit(TraceOp{TOp::Const, Space::Stack, false, true, false, r, -1, -1, 0, -1,
                       int_slot(idx)});
          baser = r;
        }
        int32_t dst = alloc_reg();
        emit(TraceOp{TOp::StackLoad, space, false, true, false, dst, baser, -1, off, -1,
                     Slot{}});
        fr.regs[I.dst] = val;
        fr.shadow[I.dst] = Shadow::red(dst);
        ++ip_;
        return finish_step();
      }
      case HOp::ArrayWrite: {
        const Slot& arr = fr.regs[I.a];
        if (arr.kind != SlotKind::Array)
          throw VmError(VmError::Kind::KindMismatch, "array_write on a non-array slot");
        int64_t idx = I.b_is_imm ? I.imm.v : fr.regs[I.b].v;
        const Slot& val = fr.regs[I.c];
        if (!is_red_array(arr)) {
          not_traceable_ = true;
          return finish_step();
        }
        Space space = arr.v == host::kArrStack ? Space::Stack : Space::Out;
        int32_t baser;
        int32_t off = 0;
        if (!I.b_is_imm && fr.shadow[I.b].kind == Shadow::Affine) {
          baser = fr.shadow[I.b].base;
          off = (int32_t)fr.shadow[I.b].delta;
        } else if (!I.b_is_imm && fr.shadow[I.b].kind == Shadow::Red) {
          baser = fr.shadow[I.b].treg;
        } else {
          int32_t r = alloc_reg();
          emit(TraceOp{TOp::Const, Space::Stack, false, true, false, r, -1, -1, 0, -1,
                       int_slot(idx)});
          baser = r;
        }
        if (I.note == host::Note::FlagPush && stats_) ++stats_->flag_pushes;
        bool v_green = fr.shadow[I.c].kind == Shadow::Green;
        if (v_green && val.is_flag()) {
          emit(TraceOp{TOp::PushFlag, space, false, true, false, -1, baser, -1, off, -1, val});
        } else if (v_green) {
          emit(TraceOp{TOp::StackStore, space, true, true, false, -1, baser, -1, off, -1, val});
        } else {
          int32_t rv = materialize(fr, I.c);
          if (rv < 0) return finish_step();
          emit(TraceOp{TOp::StackStore, space, false, true, false, -1, baser, rv, off, -1,
                       Slot{}});
        }
        ctx_.write(arr.v, idx, val);
        ++ip_;
        return finish_step();
      }
      case HOp::Branch: {
        const Shadow& csh = fr.shadow[I.a];
        bool taken = fr.regs[I.a].v != 0;
        if (csh.kind == Shadow::Green) {
          ip_ = taken ? I.b : I.c;
          return StepResult::Continue;
        }
        // Red branch: guard the observed direction. When the condition is
        // a slot-equality against a constant and it held, pin the source
        // instead; later checks on the same value then fold away.
        auto eq = csh.kind == Shadow::Red ? eq_src_.find(csh.treg) : eq_src_.end();
        if (taken && eq != eq_src_.end() && eq->second.first >= 0) {
          int snap = instr_snapshot();
          emit(TraceOp{TOp::Guard, Space::Stack, false, true, true, -1, eq->second.first,
                       -1, 0, snap, eq->second.second});
          repin(fr, eq->second.first, eq->second.second);
        } else {
          int32_t cr = materialize(fr, I.a);
          if (cr < 0) return finish_step();
          int snap = instr_snapshot();
          emit(TraceOp{TOp::Guard, Space::Stack, false, taken, false, -1, cr, -1, 0, snap,
                       Slot{}});
        }
        ip_ = taken ? I.b : I.c;
        return finish_step();
      }
      case HOp::Jump:
        ip_ = I.b;
        return StepResult::Continue;
      case HOp::Call: {
        // Interpreter-level call: inline it (trace into the callee).
        const host::HostFunction& callee = hp_.functions[I.a];
        const auto& argregs = fr.fn->arg_tables[I.c];
        Frame nf;
        nf.fn = &callee;
        nf.owned.resize(callee.nregs);
        nf.shadow.assign(callee.nregs, Shadow::green());
        for (size_t j = 0; j < argregs.size(); ++j) {
          nf.owned[j] = fr.regs[argregs[j]];
          nf.shadow[j] = fr.shadow[argregs[j]];
        }
        nf.regs = nf.owned.data();
        nf.ret_ip = ip_ + 1;
        nf.ret_dst = I.dst;
        frames_.push_back(std::move(nf));
        frames_.back().regs = frames_.back().owned.data();
        ip_ = 0;
        return StepResult::Continue;
      }
      case HOp::Ret: {
        if (frames_.size() == 1) {
          // The dispatch loop ended while recording (HALT or a host-stack
          // return): there is no loop to close.
          abort_ = TraceAbort::LeftDispatch;
          return StepResult::Abort;
        }
        Slot v = fr.regs[I.a];
        Shadow sh = fr.shadow[I.a];
        size_t rip = fr.ret_ip;
        int32_t rdst = fr.ret_dst;
        frames_.pop_back();
        Frame& caller = frames_.back();
        caller.regs[rdst] = v;
        caller.shadow[rdst] = sh;
        ip_ = rip;
        return StepResult::Continue;
      }
      case HOp::MkRet: {
        const Slot& s = fr.regs[I.a];
        if (!s.is_int())
          throw VmError(VmError::Kind::KindMismatch, "mk_ret on a non-integer");
        fr.regs[I.dst] = ret_slot(s.v);
        if (fr.shadow[I.a].kind == Shadow::Green) {
          fr.shadow[I.dst] = Shadow::green();
          last_ret_pc_ = s.v;
        } else {
          not_traceable_ = true;
        }
        ++ip_;
        return finish_step();
      }
      case HOp::RetTarget: {
        const Slot& s = fr.regs[I.a];
        if (s.kind != SlotKind::RetAddr)
          throw VmError(VmError::Kind::FlagMismatch,
                        "return address expected on the user stack, found " + slot_str(s));
        fr.regs[I.dst] = int_slot(s.v);
        const Shadow& src = fr.shadow[I.a];
        if (src.kind == Shadow::Green) {
          fr.shadow[I.dst] = Shadow::green();
        } else if (src.kind == Shadow::Red) {
          Shadow sh;
          sh.kind = Shadow::RetTargetOf;
          sh.treg = src.treg;
          fr.shadow[I.dst] = sh;
        } else {
          not_traceable_ = true;
        }
        ++ip_;
        return finish_step();
      }
      case HOp::Trap:
        host::host_trap(I.imm.v, I.a >= 0 ? fr.regs[I.a] : Slot{});
    }
    return StepResult::Continue;
  }

  // After pinning a register to a constant, make its shadow (and the
  // shadow of any register holding the same trace register) green.
  void repin(Frame& fr, int32_t treg, const Slot&) {
    for (auto& sh : fr.shadow)
      if (sh.kind == Shadow::Red && sh.treg == treg) sh = Shadow::green();
  }

  // Emits a bridge call node for a method-assigned callee instead of
  // inlining its body, then executes the callee for real (without
  // recording) so recording can resume at the return continuation.
  bool bridge_call(Frame& fr, int64_t callee_pc) {
    int64_t arity = policy_.arity_at(callee_pc);
    if (arity < 0 || last_ret_pc_ < 0) {
      abort_ = TraceAbort::NotTraceable;
      return false;
    }
    const Shadow& sp = fr.shadow[hp_.sp_reg];
    if (sp.kind != Shadow::Affine) {
      abort_ = TraceAbort::NotTraceable;
      return false;
    }
    CallInfo ci;
    ci.callee_entry = callee_pc;
    ci.host_protocol = false;
    ci.ret_pc = last_ret_pc_;
    ci.base_reg = sp.base;
    ci.sp_entry_delta = (int32_t)sp.delta;
    ci.sp_after_delta = (int32_t)(sp.delta - arity - 1);
    unit_->calls.push_back(ci);
    ++unit_->call_sites;
    emit(TraceOp{TOp::Call, Space::Stack, false, true, false, -1, -1, -1, 0,
                 (int32_t)unit_->calls.size() - 1, Slot{}});

    // Run the callee to completion in plain (non-recording) mode: until
    // control is back at the return continuation with the matching sp.
    int64_t want_sp = fr.regs[hp_.sp_reg].v - arity - 1;
    recording_ = false;
    bool ok = plain_run_until(fr, ci.ret_pc, want_sp);
    recording_ = true;
    if (!ok) {
      abort_ = TraceAbort::NotTraceable;
      return false;
    }
    // Resume recording at the continuation.
    fr.shadow[hp_.sp_reg] = Shadow::affine(ci.base_reg, ci.sp_after_delta);
    fr.shadow[hp_.pc_reg] = Shadow::green();
    cur_pc_ = fr.regs[hp_.pc_reg].v;
    cur_sp_delta_ = ci.sp_after_delta;
    return true;
  }

  // Plain interpretation inside the recorder, used to step across a
  // bridged call. Only the root dispatch frame is involved: the callee
  // runs under the user-stack protocol.
  bool plain_run_until(Frame& fr, int64_t stop_pc, int64_t stop_sp) {
    using host::HOp;
    const host::HostFunction& f = *fr.fn;
    int64_t fuel = 200000000;
    while (fuel-- > 0) {
      const host::HostInstr& I = f.code[ip_];
      switch (I.op) {
        case HOp::JitMergePoint:
          if (fr.regs[hp_.pc_reg].v == stop_pc && fr.regs[hp_.sp_reg].v == stop_sp)
            return true;
          ++ip_;
          break;
        case HOp::CanEnterJit:
          ++ip_;
          break;
        case HOp::IsMj:
          fr.regs[I.dst] = int_slot(0);
          ++ip_;
          break;
        case HOp::Const: fr.regs[I.dst] = I.imm; ++ip_; break;
        case HOp::Move: fr.regs[I.dst] = fr.regs[I.a]; ++ip_; break;
        case HOp::IAdd: case HOp::ISub: case HOp::IMul:
        case HOp::ICmpLe: case HOp::ICmpLt: case HOp::ICmpEq:
          fr.regs[I.dst] = host::host_binop(I.op, fr.regs[I.a],
                                            I.b_is_imm ? I.imm : fr.regs[I.b]);
          ++ip_;
          break;
        case HOp::ArrayRead: {
          int64_t idx = I.b_is_imm ? I.imm.v : fr.regs[I.b].v;
          Slot s = ctx_.read(fr.regs[I.a].v, idx);
          if (I.note == host::Note::FlagPopCheck) {
            host::check_flag_pop(s);
            if (stats_) ++stats_->flag_pops;
          }
          fr.regs[I.dst] = s;
          ++ip_;
          break;
        }
        case HOp::ArrayWrite: {
          int64_t idx = I.b_is_imm ? I.imm.v : fr.regs[I.b].v;
          if (I.note == host::Note::FlagPush && stats_) ++stats_->flag_pushes;
          ctx_.write(fr.regs[I.a].v, idx, fr.regs[I.c]);
          ++ip_;
          break;
        }
        case HOp::Branch: ip_ = fr.regs[I.a].v != 0 ? I.b : I.c; break;
        case HOp::Jump: ip_ = I.b; break;
        case HOp::MkRet: fr.regs[I.dst] = ret_slot(fr.regs[I.a].v); ++ip_; break;
        case HOp::RetTarget: {
          const Slot& s = fr.regs[I.a];
          if (s.kind != SlotKind::RetAddr)
            throw VmError(VmError::Kind::FlagMismatch,
                          "return address expected on the user stack, found " + slot_str(s));
          fr.regs[I.dst] = int_slot(s.v);
          ++ip_;
          break;
        }
        case HOp::Call:
        case HOp::Ret:
          // The user-stack protocol never host-recurses; leaving the
          // dispatch function here means the bridge bookkeeping is wrong.
          return false;
        case HOp::Trap:
          host::host_trap(I.imm.v, I.a >= 0 ? fr.regs[I.a] : Slot{});
      }
    }
    return false;
  }

  void finish_close() {
    Terminal t;
    t.kind = Term::JumpEntry;
    const Shadow& sp = frames_[0].shadow[hp_.sp_reg];
    t.sp_roll = sp.kind == Shadow::Affine ? (int32_t)sp.delta : 0;
    blk().term = t;
    unit_->nregs = next_reg_;
    verify_unit(*unit_);
  }

  const host::HostProgram& hp_;
  host::ExecContext& ctx_;
  const TracerPolicy& policy_;
  TracerConfig cfg_;
  rt::RunStats* stats_;

  std::shared_ptr<CompiledUnit> unit_;
  std::vector<Frame> frames_;
  size_t ip_ = 0;
  int64_t entry_pc_ = -1;
  int64_t cur_pc_ = -1;
  int64_t cur_sp_delta_ = 0;
  int64_t last_ret_pc_ = -1;
  int32_t next_reg_ = 0;
  int64_t foreign_heads_ = 0;
  bool recording_ = true;
  bool too_long_ = false;
  bool not_traceable_ = false;
  TraceAbort abort_ = TraceAbort::None;
  // For registers produced by icmp_eq against an immediate: the compared
  // source and immediate, so a taken branch can pin the source directly.
  std::map<int32_t, std::pair<int32_t, Slot>> eq_src_;
};

}  // namespace hotpath::jit
