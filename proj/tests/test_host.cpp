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

#include <gtest/gtest.h>

#include "hotpath/bench/corpus.hpp"
#include "hotpath/host/build_interp.hpp"
#include "hotpath/host/exec.hpp"
#include "hotpath/host/validate.hpp"
#include "hotpath/mml/compile.hpp"
#include "hotpath/mml/parse.hpp"
#include "hotpath/mml/reference.hpp"

namespace hp = hotpath;
using namespace hotpath::host;

namespace {

// Forces is_mj to a constant and counts protocol flags.
struct ForcedHook {
  bool mj = false;
  int64_t pushes = 0, pops = 0;
  int32_t sp_reg = -1;
  int64_t last_sp = -1;
  const std::vector<hp::Slot>* pool = nullptr;  // executor register pool
  int64_t on_merge_point(size_t off) {
    if (sp_reg >= 0 && pool) last_sp = (*pool)[off + sp_reg].v;
    return -1;
  }
  void on_can_enter_jit(size_t) {}
  bool is_mj() const { return mj; }
  void count_flag_push() { ++pushes; }
  void count_flag_pop() { ++pops; }
};

std::vector<int64_t> run_forced(const HostProgram& hp_prog, const hp::BytecodeProgram& p,
                                bool mj, ForcedHook* out_hook = nullptr) {
  ExecContext ctx = ExecContext::for_program(p);
  ForcedHook hook;
  hook.mj = mj;
  hook.sp_reg = hp_prog.sp_reg;
  HostExecutor<ForcedHook> ex(hp_prog, ctx, hook, 20000);
  hook.pool = &ex.pool();
  hp::Slot args[7] = {hp::array_slot(kArrOp),    hp::array_slot(kArrA),
                      hp::array_slot(kArrB),     hp::array_slot(kArrStack),
                      hp::array_slot(kArrOut),   hp::int_slot(p.entry),
                      hp::int_slot(0)};
  ex.call_function(hp_prog.dispatch_fn, args, 7);
  if (out_hook) *out_hook = hook;
  // Flag balance: everything pushed was popped, and the live stack (below
  // the final sp, captured at the HALT dispatch) holds no flags.
  EXPECT_EQ(hook.pushes, hook.pops);
  EXPECT_EQ(hook.last_sp, 0);
  for (int64_t i = 0; i < hook.last_sp; ++i)
    EXPECT_FALSE(ctx.arrays[kArrStack][i].is_flag());
  return ctx.output();
}

}  // namespace

TEST(HostInterp, SmallestProgram) {
  hp::BytecodeProgram p;
  p.code = {{hp::Opcode::CONST, 42, 0}, {hp::Opcode::PRINT, 0, 0}, {hp::Opcode::HALT, 0, 0}};
  HostProgram hp_prog = build_interpreter();
  EXPECT_EQ(execute_host(hp_prog, p), (std::vector<int64_t>{42}));
}

TEST(HostInterp, DifferentialAgainstReferenceOnCorpus) {
  HostProgram hp_prog = build_interpreter();
  for (const auto& cp : hotpath::bench::corpus()) {
    auto bound = hotpath::mml::parse(cp.source);
    auto expected = hotpath::mml::run_reference(bound);
    auto bc = hotpath::mml::compile(bound);
    hotpath::mml::check_stack_balance(bc);
    auto got = execute_host(hp_prog, bc);
    EXPECT_EQ(got, expected) << cp.name;
  }
}

TEST(HostInterp, StyleEquivalence) {
  // Host-stack style (is_mj always true) and user-stack style (always
  // false) are observationally equivalent.
  HostProgram hp_prog = build_interpreter();
  for (const auto& cp : hotpath::bench::corpus()) {
    auto bc = hotpath::mml::compile(hotpath::mml::parse(cp.source));
    auto us = run_forced(hp_prog, bc, false);
    auto hs = run_forced(hp_prog, bc, true);
    EXPECT_EQ(us, hs) << cp.name;
  }
}

TEST(HostInterp, FlagBalanceCountsCalls) {
  HostProgram hp_prog = build_interpreter();
  auto bc = hotpath::mml::compile(hotpath::mml::parse(
      "let rec f n = if n <= 0 then 0 else f (n-1) in print_int (f 5)"));
  ForcedHook hook;
  run_forced(hp_prog, bc, false, &hook);
  EXPECT_EQ(hook.pushes, 6);  // 1 outer call + 5 recursive
  EXPECT_EQ(hook.pops, 6);
}

TEST(HostInterp, HostRecursionLimitIsDistinct) {
  // Forced host-stack style turns base recursion into host recursion.
  HostProgram hp_prog = build_interpreter();
  auto bc = hotpath::mml::compile(hotpath::mml::parse(
      "let rec f n = if n <= 0 then 0 else f (n-1) in print_int (f 9000)"));
  ExecContext ctx = ExecContext::for_program(bc);
  ForcedHook hook;
  hook.mj = true;
  HostExecutor<ForcedHook> ex(hp_prog, ctx, hook, 1000);
  hp::Slot args[7] = {hp::array_slot(kArrOp),  hp::array_slot(kArrA),
                      hp::array_slot(kArrB),   hp::array_slot(kArrStack),
                      hp::array_slot(kArrOut), hp::int_slot(bc.entry),
                      hp::int_slot(0)};
  try {
    ex.call_function(hp_prog.dispatch_fn, args, 7);
    FAIL() << "expected host recursion limit";
  } catch (const hp::VmError& e) {
    EXPECT_EQ(e.kind, hp::VmError::Kind::RecursionLimit);
  }
}

TEST(HostInterp, InvalidPcSignalsBug) {
  hp::BytecodeProgram p;
  p.code = {{hp::Opcode::JUMP, 999, 0}};
  HostProgram hp_prog = build_interpreter();
  EXPECT_THROW(execute_host(hp_prog, p), hp::VmError);
}

TEST(HostInterp, StackUnderflowSignalsBug) {
  hp::BytecodeProgram p;
  p.code = {{hp::Opcode::ADD, 0, 0}, {hp::Opcode::HALT, 0, 0}};
  HostProgram hp_prog = build_interpreter();
  EXPECT_THROW(execute_host(hp_prog, p), hp::VmError);
}

TEST(HostInterp, FlagMismatchIsFatal) {
  // RETURN over a hand-made stack with no protocol flag below the result.
  hp::BytecodeProgram p;
  p.code = {{hp::Opcode::CONST, 1, 0}, {hp::Opcode::CONST, 2, 0}, {hp::Opcode::RETURN, 0, 0}};
  HostProgram hp_prog = build_interpreter();
  try {
    execute_host(hp_prog, p);
    FAIL() << "expected flag mismatch";
  } catch (const hp::VmError& e) {
    EXPECT_EQ(e.kind, hp::VmError::Kind::FlagMismatch);
  }
}

TEST(Validate, ShippedInterpreterIsClean) {
  HostProgram hp_prog = build_interpreter();
  auto diags = validate_interpreter(hp_prog);
  EXPECT_TRUE(diags.empty()) << (diags.empty() ? "" : diags[0]);
}

TEST(Validate, MissingMergePoint) {
  HostProgram hp_prog = build_interpreter();
  auto& code = hp_prog.functions[0].code;
  for (auto& ins : code)
    if (ins.op == HOp::JitMergePoint) ins.op = HOp::CanEnterJit;
  auto diags = validate_interpreter(hp_prog);
  ASSERT_FALSE(diags.empty());
  EXPECT_NE(diags[0].find("no merge point"), std::string::npos);
}

TEST(Validate, ColorConflict) {
  HostProgram hp_prog = build_interpreter();
  auto& f = hp_prog.functions[0];
  f.greens.push_back(f.reds[0]);
  auto diags = validate_interpreter(hp_prog);
  bool found = false;
  for (const auto& d : diags)
    if (d.find("color conflict") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(Validate, MissingCanEnterJit) {
  HostProgram hp_prog = build_interpreter();
  auto& f = hp_prog.functions[0];
  for (auto& b : f.blocks)
    if (b.label == "ret_cej")
      for (int32_t i = b.begin; i < b.end; ++i)
        if (f.code[i].op == HOp::CanEnterJit) {
          f.code[i].op = HOp::Jump;
          f.code[i].b = i + 1;
        }
  auto diags = validate_interpreter(hp_prog);
  bool found = false;
  for (const auto& d : diags)
    if (d.find("ret handler") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(Validate, IsMjOutsideCallHandler) {
  HostProgram hp_prog = build_interpreter();
  auto& f = hp_prog.functions[0];
  // Graft an IsMj into the PRINT handler.
  for (auto& b : f.blocks)
    if (b.label == "h_print") f.code[b.begin].op = HOp::IsMj;
  auto diags = validate_interpreter(hp_prog);
  bool found = false;
  for (const auto& d : diags)
    if (d.find("is_mj outside") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(HostDump, IsStableAndLineOriented) {
  HostProgram hp_prog = build_interpreter();
  std::string d = dump_host(hp_prog);
  EXPECT_NE(d.find("jit_merge_point(greens=[p_op,p_a,p_b,pc], reds=[stk,out,sp])"),
            std::string::npos);
  EXPECT_NE(d.find(" dispatch:"), std::string::npos);
  EXPECT_EQ(d, dump_host(build_interpreter()));
}
