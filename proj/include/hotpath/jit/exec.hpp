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

#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "hotpath/host/exec.hpp"
#include "hotpath/jit/ir.hpp"
#include "hotpath/rt/stats.hpp"

namespace hotpath::jit {

// Why a compiled unit handed control back.
struct ExitReason {
  enum Kind { Returned, GuardFail, JumpOut } kind = Returned;
  Slot value{};
  int64_t pc = -1;
  int64_t sp = -1;
};

// Test hook: force guard failures. `dynamic_n` counts guard evaluations
// globally (the CLI surface); unit/static index/occurrence is the finer
// programmatic form used by the deopt sweep.
struct ForceGuardFail {
  int64_t dynamic_n = 0;  // fail the Nth guard evaluation (1-based; 0 = off)
  const CompiledUnit* unit = nullptr;
  int gidx = -1;
  int64_t occurrence = 1;

  bool armed() const { return dynamic_n > 0 || unit != nullptr; }
};

// Services a unit needs from the runtime to cross unit boundaries. The
// engine implements this; tests may run bridge-free units with nullptr.
struct BridgeHost {
  virtual ~BridgeHost() = default;
  // Host-stack protocol call: the HS flag and arguments are already on the
  // user stack; activate the callee and return its value.
  virtual Slot bridge_hs_call(int64_t callee_entry, int64_t callee_sp) = 0;
  // User-stack protocol bridge out of a trace: the RetAddr/US flag and
  // arguments are on the stack. Runs the callee's method unit if one
  // exists and routes its returned value back; returns false when no unit
  // is available (the caller must exit to the interpreter instead).
  virtual bool bridge_us_call(const CallInfo& ci, int64_t callee_sp) = 0;
};

// Register-machine executor over compiled units.
class UnitExecutor {
 public:
  UnitExecutor(host::ExecContext& ctx, rt::RunStats& stats, BridgeHost* bridge = nullptr,
               ForceGuardFail* force = nullptr)
      : ctx_(ctx), stats_(stats), bridge_(bridge), force_(force) {}

  void reset_run_state() { regs_.clear(); }

  ExitReason execute(const CompiledUnit& u, int64_t entry_sp) {
    ++stats_.unit_entries;
    size_t base = regs_.size();
    regs_.resize(base + u.nregs);
    regs_[base + u.base_reg] = int_slot(entry_sp);
    ExitReason r = run(u, base);
    regs_.resize(base);
    return r;
  }

 private:
  Slot& reg(size_t base, int32_t r) { return regs_[base + r]; }

  bool guard_holds(const CompiledUnit& u, const TraceOp& op, size_t base) {
    ++stats_.guards_executed;
    bool ok;
    const Slot& s = reg(base, op.a);
    if (op.is_eq) ok = (s == op.imm);
    else ok = ((s.v != 0) == op.expect);
    if (force_ && force_->armed()) {
      bool force_this = false;
      if (force_->dynamic_n > 0 && (int64_t)stats_.guards_executed == force_->dynamic_n)
        force_this = true;
      // Static guard indices coincide with snapshot indices (one snapshot
      // per guard, allocated in emission order).
      if (force_->unit == &u && force_->gidx == op.aux && --force_->occurrence == 0) {
        force_this = true;
        force_->unit = nullptr;
      }
      if (force_this && ok) {
        ++stats_.deopts_forced;
        ok = false;
      }
    }
    // A passing guard over a protocol-flag constant is a traced RETURN
    // consuming its flag. On failure the interpreter re-executes the
    // return and counts the pop itself.
    if (ok && op.is_eq && op.imm.is_flag()) ++stats_.flag_pops;
    return ok;
  }

  ExitReason deopt(const CompiledUnit& u, const DeoptSnapshot& s, size_t base) {
    ++stats_.guard_fails;
    ExitReason r;
    r.kind = ExitReason::GuardFail;
    r.pc = s.pc_is_reg ? reg(base, s.pc_reg).v : s.pc_const;
    r.sp = reg(base, s.base_reg).v + s.sp_delta;
    if (r.pc < 0 || r.sp < 0 || r.sp > (int64_t)ctx_.arrays[host::kArrStack].size())
      throw VmError(VmError::Kind::BadSnapshot,
                    "deopt snapshot out of bounds (pc=" + std::to_string(r.pc) +
                        " sp=" + std::to_string(r.sp) + ") in " + u.name);
    return r;
  }

  ExitReason run(const CompiledUnit& u, size_t base) {
    int32_t b = 0;
    while (true) {
      const TraceBlock& blk = u.blocks[b];
      for (size_t i = 0; i < blk.ops.size(); ++i) {
        const TraceOp& op = blk.ops[i];
        ++stats_.trace_ops;
        switch (op.op) {
          case TOp::Const:
            reg(base, op.dst) = op.imm;
            break;
          case TOp::Move:
            reg(base, op.dst) = reg(base, op.a);
            break;
          case TOp::Add: case TOp::Sub: case TOp::Mul:
          case TOp::CmpLe: case TOp::CmpLt: case TOp::CmpEq: {
            static constexpr host::HOp kMap[] = {
                host::HOp::IAdd, host::HOp::ISub, host::HOp::IMul,
                host::HOp::ICmpLe, host::HOp::ICmpLt, host::HOp::ICmpEq};
            host::HOp h = kMap[(int)op.op - (int)TOp::Add];
            reg(base, op.dst) =
                host::host_binop(h, reg(base, op.a), op.b_is_imm ? op.imm : reg(base, op.b));
            break;
          }
          case TOp::StackLoad: {
            int64_t idx = reg(base, op.a).v + op.off;
            reg(base, op.dst) =
                ctx_.read(op.space == Space::Stack ? host::kArrStack : host::kArrOut, idx);
            break;
          }
          case TOp::StackStore: {
            int64_t idx = reg(base, op.a).v + op.off;
            ctx_.write(op.space == Space::Stack ? host::kArrStack : host::kArrOut, idx,
                       op.b_is_imm ? op.imm : reg(base, op.b));
            break;
          }
          case TOp::PushFlag: {
            int64_t idx = reg(base, op.a).v + op.off;
            ++stats_.flag_pushes;
            ctx_.write(host::kArrStack, idx, op.imm);
            break;
          }
          case TOp::Guard:
            if (!guard_holds(u, op, base)) return deopt(u, u.snaps[op.aux], base);
            break;
          case TOp::Call: {
            const CallInfo& ci = u.calls[op.aux];
            if (!bridge_)
              throw VmError(VmError::Kind::CompilerBug,
                            "unit " + u.name + " needs a bridge host");
            int64_t callee_sp = reg(base, ci.base_reg).v + ci.sp_entry_delta;
            if (ci.host_protocol) {
              Slot v = bridge_->bridge_hs_call(ci.callee_entry, callee_sp);
              if (ci.dst >= 0) reg(base, ci.dst) = v;
            } else {
              if (!bridge_->bridge_us_call(ci, callee_sp)) {
                // Callee not compiled: leave the trace; the interpreter
                // resumes at the callee entry with the frame in place.
                ExitReason r;
                r.kind = ExitReason::JumpOut;
                r.pc = ci.callee_entry;
                r.sp = callee_sp;
                return r;
              }
            }
            break;
          }
        }
      }
      const Terminal& t = blk.term;
      switch (t.kind) {
        case Term::JumpEntry: {
          Slot& sp = reg(base, u.base_reg);
          sp = int_slot(sp.v + t.sp_roll);
          b = 0;
          continue;
        }
        case Term::JumpBlock:
          b = t.then_block;
          continue;
        case Term::If:
          b = reg(base, t.a).v != 0 ? t.then_block : t.else_block;
          continue;
        case Term::Ret: {
          const Slot& flag = reg(base, t.flag_reg);
          ++stats_.flag_pops;
          if (!flag.is_flag())
            throw VmError(VmError::Kind::FlagMismatch,
                          "return in " + u.name + " popped " + slot_str(flag) +
                              " where a protocol flag was expected");
          int64_t spv = reg(base, t.base_reg).v;
          if (flag.kind == SlotKind::FlagHs) {
            ExitReason r;
            r.kind = ExitReason::Returned;
            r.value = reg(base, t.a);
            r.sp = spv + t.sp_hs;
            return r;
          }
          Slot addr = ctx_.read(host::kArrStack, spv + t.addr_off);
          if (addr.kind != SlotKind::RetAddr)
            throw VmError(VmError::Kind::FlagMismatch,
                          "return in " + u.name + " found " + slot_str(addr) +
                              " where a return address was expected");
          ctx_.write(host::kArrStack, spv + t.addr_off, reg(base, t.a));
          ExitReason r;
          r.kind = ExitReason::JumpOut;
          r.pc = addr.v;
          r.sp = spv + t.sp_us;
          return r;
        }
        case Term::RetValue: {
          ExitReason r;
          r.kind = ExitReason::Returned;
          r.value = reg(base, t.a);
          r.sp = reg(base, u.base_reg).v;
          return r;
        }
      }
    }
  }

  host::ExecContext& ctx_;
  rt::RunStats& stats_;
  BridgeHost* bridge_;
  ForceGuardFail* force_;
  std::vector<Slot> regs_;
};

// Compiled-unit registry: trace units keyed by loop-head pc, method units
// also reachable by function index. Concurrent readers, exclusive insert.
class UnitRegistry {
 public:
  void install(std::shared_ptr<CompiledUnit> u) {
    std::unique_lock lk(mu_);
    by_pc_[u->entry_pc] = u;
    if ((int64_t)mask_.size() <= u->entry_pc) mask_.resize(u->entry_pc + 1, 0);
    mask_[u->entry_pc] = 1;
    units_.push_back(u);
  }

  // Fast path: no lock, the mask is monotone within a run.
  bool maybe_has(int64_t pc) const {
    return pc >= 0 && pc < (int64_t)mask_.size() && mask_[pc];
  }

  std::shared_ptr<CompiledUnit> lookup(int64_t pc, rt::RunStats* stats = nullptr) const {
    if (stats) ++stats->registry_lookups;
    std::shared_lock lk(mu_);
    auto it = by_pc_.find(pc);
    return it == by_pc_.end() ? nullptr : it->second;
  }

  // Pre-resolves a unit exit target so later transfers skip the lookup.
  void link(CompiledUnit& from, int64_t exit_pc) {
    auto target = lookup(exit_pc);
    if (!target) return;
    std::unique_lock lk(mu_);
    links_[{&from, exit_pc}] = target;
  }

  std::shared_ptr<CompiledUnit> linked(const CompiledUnit& from, int64_t exit_pc) const {
    std::shared_lock lk(mu_);
    auto it = links_.find({const_cast<CompiledUnit*>(&from), exit_pc});
    return it == links_.end() ? nullptr : it->second;
  }

  std::vector<std::shared_ptr<CompiledUnit>> all() const {
    std::shared_lock lk(mu_);
    return units_;
  }

  void clear() {
    std::unique_lock lk(mu_);
    by_pc_.clear();
    links_.clear();
    mask_.clear();
    units_.clear();
  }

  size_t size() const {
    std::shared_lock lk(mu_);
    return units_.size();
  }

 private:
  struct KeyHash {
    size_t operator()(const std::pair<CompiledUnit*, int64_t>& k) const {
      return std::hash<void*>()(k.first) ^ std::hash<int64_t>()(k.second * 1000003);
    }
  };
  mutable std::shared_mutex mu_;
  std::unordered_map<int64_t, std::shared_ptr<CompiledUnit>> by_pc_;
  std::unordered_map<std::pair<CompiledUnit*, int64_t>, std::shared_ptr<CompiledUnit>, KeyHash>
      links_;
  std::vector<uint8_t> mask_;
  std::vector<std::shared_ptr<CompiledUnit>> units_;
};

}  // namespace hotpath::jit
