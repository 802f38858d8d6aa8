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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hotpath/bytecode.hpp"
#include "hotpath/host/build_interp.hpp"
#include "hotpath/host/exec.hpp"
#include "hotpath/host/validate.hpp"
#include "hotpath/jit/exec.hpp"
#include "hotpath/jit/fold.hpp"
#include "hotpath/jit/method.hpp"
#include "hotpath/jit/trace.hpp"
#include "hotpath/rt/policy.hpp"
#include "hotpath/rt/stats.hpp"

namespace hotpath::rt {

struct EngineConfig {
  Mode mode = Mode::InterpOnly;
  int64_t threshold = 100;
  jit::TracerConfig tracer{};
  jit::MethodConfig method{};
  int host_recursion_limit = 10000;
  std::map<std::string, std::string> hybrid_overrides;  // name -> trace|method
  jit::ForceGuardFail force{};
};

// The runtime: hotness profiling at can_enter_jit sites, compile-on-reach
// at merge points, dispatch between the interpreter and compiled units,
// guard-failure resume, and the stack-hybridization bridges that let the
// two kinds of compiled code call each other.
class Engine : jit::BridgeHost, jit::TracerPolicy {
 public:
  Engine(BytecodeProgram program, EngineConfig cfg)
      : prog_(std::move(program)), cfg_(cfg), hp_(host::build_interpreter()) {
    auto diags = host::validate_interpreter(hp_);
    if (!diags.empty())
      throw VmError(VmError::Kind::CompilerBug,
                    "interpreter definition failed validation: " + diags[0]);
    for (size_t i = 0; i < hp_.functions[hp_.dispatch_fn].code.size(); ++i)
      if (hp_.functions[hp_.dispatch_fn].code[i].op == host::HOp::JitMergePoint)
        merge_ip_ = i;
    prepare();
    ctx_ = host::ExecContext::for_program(prog_);
    host_exec_.emplace(hp_, ctx_, hook_, cfg_.host_recursion_limit);
    unit_exec_.emplace(ctx_, stats_, static_cast<jit::BridgeHost*>(this), &cfg_.force);
    exec_ = &*host_exec_;
    units_exec_ = &*unit_exec_;
  }

  // One full program execution. Compiled units and hotness persist across
  // runs; call reset_jit() between iterations for cold measurements.
  std::vector<int64_t> run() {
    ctx_.reset_run_state();
    host_exec_->reset_run_state();
    unit_exec_->reset_run_state();
    bridge_depth_ = 0;
    Slot args[7] = {array_slot(host::kArrOp),    array_slot(host::kArrA),
                    array_slot(host::kArrB),     array_slot(host::kArrStack),
                    array_slot(host::kArrOut),   int_slot(prog_.entry),
                    int_slot(0)};
    host_exec_->call_function(hp_.dispatch_fn, args, 7);
    stats_.base_calls = stats_.flag_pushes;
    return ctx_.output();
  }

  void reset_jit() {
    registry_.clear();
    counts_.assign(prog_.code.size(), 0);
    encounters_.assign(prog_.code.size(), 0);
    first_entry_encounter_.assign(prog_.code.size(), 0);
    head_flag_.assign(prog_.code.size(), 0);
    blacklist_.clear();
    abort_counts_.clear();
    effective_ = base_strategies_;
    pending_pc_ = -1;
    stats_ = RunStats{};
  }

  RunStats& stats() { return stats_; }
  const jit::UnitRegistry& registry() const { return registry_; }
  jit::UnitRegistry& registry() { return registry_; }
  const BytecodeProgram& program() const { return prog_; }
  const host::HostProgram& host_program() const { return hp_; }
  host::ExecContext& context() { return ctx_; }
  EngineConfig& config() { return cfg_; }

  // Instrumentation for the threshold-protocol checks.
  int64_t encounters_of(int64_t pc) const { return encounters_[pc]; }
  int64_t first_entry_encounter(int64_t pc) const { return first_entry_encounter_[pc]; }

  // Flag-balance readouts (stack-hybridization integrity).
  bool flags_balanced() const { return stats_.flag_pushes == stats_.flag_pops; }
  int64_t live_stack_flags() const {
    int64_t n = 0;
    for (int64_t i = 0; i < last_halt_sp_; ++i)
      if (ctx_.arrays[host::kArrStack][i].is_flag()) ++n;
    return n;
  }

 private:
  struct Hook {
    Engine* e;
    int64_t on_merge_point(size_t off) { return e->merge(off); }
    void on_can_enter_jit(size_t off) { e->tick(off); }
    bool is_mj() const { return false; }
    void count_flag_push() { ++e->stats_.flag_pushes; }
    void count_flag_pop() { ++e->stats_.flag_pops; }
  };
  friend struct Hook;

  void prepare() {
    verify_targets(prog_);
    counts_.assign(prog_.code.size(), 0);
    encounters_.assign(prog_.code.size(), 0);
    first_entry_encounter_.assign(prog_.code.size(), 0);
    head_flag_.assign(prog_.code.size(), 0);
    // Resolve the per-function strategy for this run's mode.
    for (const auto& f : prog_.functions) {
      if (f.name == "main") continue;
      jit::Strategy s;
      switch (cfg_.mode) {
        case Mode::InterpOnly:
        case Mode::TraceOnly:
          s = jit::Strategy::Trace;
          break;
        case Mode::MethodOnly:
          s = jit::Strategy::Method;
          break;
        case Mode::Hybrid: {
          auto it = cfg_.hybrid_overrides.find(f.name);
          s = (it != cfg_.hybrid_overrides.end() && it->second == "method")
                  ? jit::Strategy::Method
                  : jit::Strategy::Trace;
          break;
        }
      }
      base_strategies_[f.entry] = s;
    }
    for (const auto& [name, strat] : cfg_.hybrid_overrides) {
      if (!prog_.function_named(name))
        throw CompileError("strategy override names unknown function '" + name + "'");
      (void)strat;
    }
    effective_ = base_strategies_;
  }

  bool compilation_enabled() const { return cfg_.mode != Mode::InterpOnly; }

  // Hotness profiling at backward transfers (loop back-edges, calls,
  // returns). Crossing the threshold files a compile request consumed at
  // the next merge point.
  void tick(size_t off) {
    int64_t pc = exec_->frame(off)[hp_.pc_reg].v;
    if (!compilation_enabled()) return;
    head_flag_[pc] = 1;
    if (blacklist_.count(pc) || registry_.maybe_has(pc)) return;
    if (++counts_[pc] == cfg_.threshold) {
      auto strat = strategy_for_key(pc);
      if (!strat) return;
      if (pending_pc_ >= 0 && pending_pc_ != pc) {
        --counts_[pc];  // another request is outstanding; re-cross later
        return;
      }
      pending_pc_ = pc;
      pending_strategy_ = *strat;
    }
  }

  // Which strategy compiles the key at `pc`, if any.
  std::optional<jit::Strategy> strategy_for_key(int64_t pc) {
    auto it = effective_.find(pc);
    if (it != effective_.end()) {
      // Function entry: the assigned strategy decides.
      if (cfg_.mode == Mode::TraceOnly) return jit::Strategy::Trace;
      return it->second;
    }
    // Interior key (loop head / return continuation): trace strategy,
    // except in method-only mode where only functions are compiled.
    if (cfg_.mode == Mode::MethodOnly) return std::nullopt;
    return jit::Strategy::Trace;
  }

  int64_t merge(size_t off) {
    ++stats_.interpreted_steps;
    Slot* regs = exec_->frame(off);
    int64_t pc = regs[hp_.pc_reg].v;
    if (head_flag_[pc]) ++encounters_[pc];
    if (prog_.code[pc].op == Opcode::HALT) last_halt_sp_ = regs[hp_.sp_reg].v;

    if (pending_pc_ == pc) {
      int64_t resume = compile_pending(off);
      if (resume >= 0) return resume;
    }

    if (registry_.maybe_has(pc)) {
      auto unit = registry_.lookup(pc, &stats_);
      if (unit) return run_units(std::move(unit), off);
    }
    return -1;
  }

  // Compile-on-reach: the thread that crossed the threshold compiles at
  // the merge point where the key's greens are live.
  int64_t compile_pending(size_t off) {
    int64_t pc = pending_pc_;
    jit::Strategy strat = pending_strategy_;
    pending_pc_ = -1;
    if (strat == jit::Strategy::Method) {
      jit::MethodResult r = jit::jit_meta_method(hp_, prog_, pc, cfg_.method);
      if (r.unit) {
        ++stats_.compiles;
        ++stats_.compiles_method;
        registry_.install(std::make_shared<jit::CompiledUnit>(jit::fold_constants(*r.unit)));
      } else {
        ++stats_.compile_aborts;
        // Branch blow-up (and kin): fall back to the trace strategy for
        // this function; a second failure blacklists the key.
        effective_[pc] = jit::Strategy::Trace;
        counts_[pc] = 0;
        if (++abort_counts_[pc] >= 2) {
          blacklist_.insert(pc);
          ++stats_.blacklists;
        }
      }
      return -1;
    }
    jit::TraceRecorder rec(hp_, ctx_, *this, cfg_.tracer, &stats_);
    jit::RecordOutcome out = rec.record(exec_->frame(off), merge_ip_, pc);
    if (out.unit) {
      ++stats_.compiles;
      ++stats_.compiles_trace;
      registry_.install(std::make_shared<jit::CompiledUnit>(jit::fold_constants(*out.unit)));
    } else {
      ++stats_.compile_aborts;
      if (out.abort == jit::TraceAbort::TooLong || ++abort_counts_[pc] >= 2) {
        blacklist_.insert(pc);
        ++stats_.blacklists;
      } else {
        counts_[pc] = 0;  // cool down, retry after another threshold
      }
    }
    return (int64_t)out.resume_ip;
  }

  // Runs a unit and any units its exits chain to, then resumes the
  // interpreter with the final pc/sp.
  int64_t run_units(std::shared_ptr<jit::CompiledUnit> unit, size_t off) {
    int64_t pc = exec_->frame(off)[hp_.pc_reg].v;
    if (head_flag_[pc] && first_entry_encounter_[pc] == 0)
      first_entry_encounter_[pc] = encounters_[pc];
    int64_t sp = exec_->frame(off)[hp_.sp_reg].v;
    while (true) {
      jit::ExitReason r = units_exec_->execute(*unit, sp);
      switch (r.kind) {
        case jit::ExitReason::GuardFail:
          on_guard_fail(r, off);
          return -1;
        case jit::ExitReason::JumpOut: {
          std::shared_ptr<jit::CompiledUnit> next = registry_.linked(*unit, r.pc);
          if (!next && registry_.maybe_has(r.pc)) {
            next = registry_.lookup(r.pc, &stats_);
            if (next) registry_.link(*unit, r.pc);
          }
          if (next && next->strategy == jit::Strategy::Trace) {
            // Trace linking: chain directly without an interpreter trip.
            unit = std::move(next);
            sp = r.sp;
            continue;
          }
          Slot* regs = exec_->frame(off);
          regs[hp_.pc_reg] = int_slot(r.pc);
          regs[hp_.sp_reg] = int_slot(r.sp);
          return -1;
        }
        case jit::ExitReason::Returned:
          throw VmError(VmError::Kind::CompilerBug,
                        "unit returned a value to the dispatch loop");
      }
    }
  }

  // Deoptimization: rebuild the interpreter state the snapshot describes
  // and continue interpreting from there.
  void on_guard_fail(const jit::ExitReason& r, size_t off) {
    if (r.pc < 0 || r.pc >= (int64_t)prog_.code.size())
      throw VmError(VmError::Kind::BadSnapshot, "deopt pc out of range");
    Slot* regs = exec_->frame(off);
    regs[hp_.pc_reg] = int_slot(r.pc);
    regs[hp_.sp_reg] = int_slot(r.sp);
  }

  // ---- BridgeHost ----------------------------------------------------

  // A method-compiled call site: the HS flag and arguments are on the user
  // stack. Enter the callee's method unit when it exists, otherwise a
  // recursive interpreter activation (which may itself enter units).
  Slot bridge_hs_call(int64_t callee_entry, int64_t callee_sp) override {
    BridgeDepth depth(this);
    auto unit = registry_.lookup(callee_entry, &stats_);
    if (unit && unit->strategy == jit::Strategy::Method) {
      jit::ExitReason r = units_exec_->execute(*unit, callee_sp);
      if (r.kind != jit::ExitReason::Returned)
        throw VmError(VmError::Kind::CompilerBug,
                      "host-protocol call did not return a value");
      return r.value;
    }
    Slot args[7] = {array_slot(host::kArrOp),    array_slot(host::kArrA),
                    array_slot(host::kArrB),     array_slot(host::kArrStack),
                    array_slot(host::kArrOut),   int_slot(callee_entry),
                    int_slot(callee_sp)};
    return exec_->call_function(hp_.dispatch_fn, args, 7);
  }

  // A trace calling a method-assigned function: the US flag and return
  // address are on the user stack. Run the method unit and let its
  // user-stack return land back on the trace's continuation.
  bool bridge_us_call(const jit::CallInfo& ci, int64_t callee_sp) override {
    BridgeDepth depth(this);
    auto unit = registry_.lookup(ci.callee_entry, &stats_);
    if (!unit || unit->strategy != jit::Strategy::Method) return false;
    jit::ExitReason r = units_exec_->execute(*unit, callee_sp);
    if (r.kind != jit::ExitReason::JumpOut || r.pc != ci.ret_pc)
      throw VmError(VmError::Kind::CompilerBug,
                    "bridged call did not return to its continuation");
    return true;
  }

  // Host-level activations made by compiled code count against the same
  // recursion limit as the interpreter's own host-stack protocol.
  struct BridgeDepth {
    Engine* e;
    explicit BridgeDepth(Engine* e) : e(e) {
      if (++e->bridge_depth_ > e->cfg_.host_recursion_limit)
        throw VmError(VmError::Kind::RecursionLimit,
                      "host recursion limit (" +
                          std::to_string(e->cfg_.host_recursion_limit) +
                          " activations) exceeded in compiled code");
    }
    ~BridgeDepth() { --e->bridge_depth_; }
  };
  friend struct BridgeDepth;

  // ---- TracerPolicy --------------------------------------------------

  bool is_trace_head(int64_t pc) const override { return head_flag_[pc] != 0; }

  bool is_method_target(int64_t pc) const override {
    auto it = effective_.find(pc);
    return it != effective_.end() && it->second == jit::Strategy::Method;
  }

  int64_t arity_at(int64_t pc) const override {
    const FunctionEntry* f = prog_.function_at(pc);
    return f ? f->arity : -1;
  }

  BytecodeProgram prog_;
  EngineConfig cfg_;
  host::HostProgram hp_;
  size_t merge_ip_ = 0;
  host::ExecContext ctx_;
  Hook hook_{this};
  std::optional<host::HostExecutor<Hook>> host_exec_;
  std::optional<jit::UnitExecutor> unit_exec_;
  host::HostExecutor<Hook>* exec_ = nullptr;
  jit::UnitExecutor* units_exec_ = nullptr;

  jit::UnitRegistry registry_;
  RunStats stats_;
  std::vector<int64_t> counts_;
  std::vector<int64_t> encounters_;
  std::vector<int64_t> first_entry_encounter_;
  std::vector<uint8_t> head_flag_;
  std::set<int64_t> blacklist_;
  std::map<int64_t, int> abort_counts_;
  std::map<int64_t, jit::Strategy> base_strategies_;  // fn entry pc -> strategy
  std::map<int64_t, jit::Strategy> effective_;
  int64_t pending_pc_ = -1;
  jit::Strategy pending_strategy_ = jit::Strategy::Trace;
  int64_t last_halt_sp_ = -1;
  int bridge_depth_ = 0;
};

}  // namespace hotpath::rt
