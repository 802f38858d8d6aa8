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

#include <random>

#include "hotpath/jit/exec.hpp"
#include "hotpath/jit/fold.hpp"
#include "hotpath/mml/compile.hpp"
#include "hotpath/mml/parse.hpp"
#include "hotpath/rt/engine.hpp"

namespace hp = hotpath;
using namespace hotpath::jit;

namespace {

// Scratch context with an empty program and a writable stack.
hp::host::ExecContext scratch_ctx(int64_t stack_cells = 64) {
  hp::BytecodeProgram p;
  p.code = {{hp::Opcode::HALT, 0, 0}};
  auto ctx = hp::host::ExecContext::for_program(p);
  ctx.arrays[hp::host::kArrStack].assign(stack_cells, hp::int_slot(0));
  return ctx;
}

CompiledUnit simple_unit() {
  CompiledUnit u;
  u.strategy = Strategy::Method;  // RetValue terminal, no guards
  u.name = "t";
  u.entry_pc = 0;
  u.base_reg = 0;
  u.blocks.resize(1);
  return u;
}

TraceOp op_const(int32_t dst, int64_t v) {
  return TraceOp{TOp::Const, Space::Stack, false, true, false, dst, -1, -1, 0, -1,
                 hp::int_slot(v)};
}
TraceOp op_bin(TOp t, int32_t dst, int32_t a, int32_t b) {
  return TraceOp{t, Space::Stack, false, true, false, dst, a, b, 0, -1, {}};
}
TraceOp op_bin_imm(TOp t, int32_t dst, int32_t a, int64_t imm) {
  return TraceOp{t, Space::Stack, true, true, false, dst, a, -1, 0, -1, hp::int_slot(imm)};
}

}  // namespace

TEST(Fold, ConstantArithmetic) {
  CompiledUnit u = simple_unit();
  u.nregs = 4;
  auto& ops = u.blocks[0].ops;
  ops.push_back(op_const(1, 2));
  ops.push_back(op_const(2, 3));
  ops.push_back(op_bin(TOp::Add, 3, 1, 2));
  u.blocks[0].term = Terminal{Term::RetValue, 3, -1, -1, 0, -1, -1, 0, 0, 0};
  CompiledUnit f = fold_constants(u);
  ASSERT_EQ(f.blocks[0].ops.back().op, TOp::Const);
  EXPECT_EQ(f.blocks[0].ops.back().imm, hp::int_slot(5));
}

TEST(Fold, StaticallyTrueGuardRemoved) {
  CompiledUnit u = simple_unit();
  u.strategy = Strategy::Trace;
  u.nregs = 2;
  u.snaps.push_back(DeoptSnapshot{false, 0, -1, 0, 0});
  u.guard_count = 1;
  auto& ops = u.blocks[0].ops;
  ops.push_back(op_const(1, 7));
  TraceOp g{TOp::Guard, Space::Stack, false, true, true, -1, 1, -1, 0, 0, hp::int_slot(7)};
  ops.push_back(g);
  u.blocks[0].term = Terminal{Term::RetValue, 1, -1, -1, 0, -1, -1, 0, 0, 0};
  CompiledUnit f = fold_constants(u);
  for (const auto& op : f.blocks[0].ops) EXPECT_NE(op.op, TOp::Guard);
}

TEST(Fold, AddZeroBecomesMove) {
  CompiledUnit u = simple_unit();
  u.nregs = 3;
  auto& ops = u.blocks[0].ops;
  // r1 comes from memory: unknown at fold time.
  ops.push_back(TraceOp{TOp::StackLoad, Space::Stack, false, true, false, 1, 0, -1, 0, -1, {}});
  ops.push_back(op_bin_imm(TOp::Add, 2, 1, 0));
  u.blocks[0].term = Terminal{Term::RetValue, 2, -1, -1, 0, -1, -1, 0, 0, 0};
  CompiledUnit f = fold_constants(u);
  EXPECT_EQ(f.blocks[0].ops.back().op, TOp::Move);
  EXPECT_EQ(f.blocks[0].ops.back().a, 1);
}

TEST(Verify, ReadBeforeWriteIsCompilerBug) {
  CompiledUnit u = simple_unit();
  u.nregs = 3;
  u.blocks[0].ops.push_back(op_bin(TOp::Add, 2, 0, 1));  // r1 never written
  u.blocks[0].term = Terminal{Term::RetValue, 2, -1, -1, 0, -1, -1, 0, 0, 0};
  try {
    verify_unit(u);
    FAIL() << "expected a verifier error";
  } catch (const hp::VmError& e) {
    EXPECT_EQ(e.kind, hp::VmError::Kind::CompilerBug);
  }
}

TEST(Verify, GuardInMethodUnitRejected) {
  CompiledUnit u = simple_unit();
  u.nregs = 2;
  u.snaps.push_back(DeoptSnapshot{false, 0, -1, 0, 0});
  u.blocks[0].ops.push_back(op_const(1, 1));
  u.blocks[0].ops.push_back(
      TraceOp{TOp::Guard, Space::Stack, false, true, false, -1, 1, -1, 0, 0, {}});
  u.blocks[0].term = Terminal{Term::RetValue, 1, -1, -1, 0, -1, -1, 0, 0, 0};
  EXPECT_THROW(verify_unit(u), hp::VmError);
}

TEST(Execute, FirstGuardFalseDeoptsWithoutEffects) {
  // Unit: guard r0 == 99 (entry sp), then a store that must never run.
  CompiledUnit u = simple_unit();
  u.strategy = Strategy::Trace;
  u.nregs = 2;
  u.snaps.push_back(DeoptSnapshot{false, 7, -1, 0, 0});
  u.guard_count = 1;
  auto& ops = u.blocks[0].ops;
  TraceOp g{TOp::Guard, Space::Stack, false, true, true, -1, 0, -1, 0, 0, hp::int_slot(99)};
  ops.push_back(g);
  ops.push_back(TraceOp{TOp::StackStore, Space::Stack, true, true, false, -1, 0, -1, 0, -1,
                        hp::int_slot(123)});
  u.blocks[0].term = Terminal{Term::JumpEntry, -1, -1, -1, 0, -1, -1, 0, 0, 0};
  verify_unit(u);

  auto ctx = scratch_ctx();
  hp::rt::RunStats stats;
  UnitExecutor ex(ctx, stats);
  ExitReason r = ex.execute(u, /*entry_sp=*/5);
  EXPECT_EQ(r.kind, ExitReason::GuardFail);
  EXPECT_EQ(r.pc, 7);
  EXPECT_EQ(r.sp, 5);
  EXPECT_EQ(ctx.arrays[hp::host::kArrStack][5].v, 0);  // store did not run
  EXPECT_EQ(stats.guard_fails, 1u);
}

TEST(Execute, RetProtocolSelectsByFlag) {
  // Unit mimicking a compiled return: reads value and flag off the stack.
  CompiledUnit u = simple_unit();
  u.nregs = 3;
  auto& ops = u.blocks[0].ops;
  ops.push_back(TraceOp{TOp::StackLoad, Space::Stack, false, true, false, 1, 0, -1, -1, -1, {}});
  ops.push_back(TraceOp{TOp::StackLoad, Space::Stack, false, true, false, 2, 0, -1, -2, -1, {}});
  Terminal t;
  t.kind = Term::Ret;
  t.a = 1;
  t.flag_reg = 2;
  t.base_reg = 0;
  t.addr_off = -3;
  t.sp_us = -2;
  t.sp_hs = -2;
  u.blocks[0].term = t;
  verify_unit(u);

  {  // host-stack flag: Returned
    auto ctx = scratch_ctx();
    auto& stk = ctx.arrays[hp::host::kArrStack];
    stk[1] = hp::flag_hs();
    stk[2] = hp::int_slot(41);
    hp::rt::RunStats stats;
    UnitExecutor ex(ctx, stats);
    ExitReason r = ex.execute(u, 3);
    EXPECT_EQ(r.kind, ExitReason::Returned);
    EXPECT_EQ(r.value, hp::int_slot(41));
    EXPECT_EQ(r.sp, 1);
    EXPECT_EQ(stats.flag_pops, 1u);
  }
  {  // user-stack flag: JumpOut to the pushed return address
    auto ctx = scratch_ctx();
    auto& stk = ctx.arrays[hp::host::kArrStack];
    stk[0] = hp::ret_slot(17);
    stk[1] = hp::flag_us();
    stk[2] = hp::int_slot(41);
    hp::rt::RunStats stats;
    UnitExecutor ex(ctx, stats);
    ExitReason r = ex.execute(u, 3);
    EXPECT_EQ(r.kind, ExitReason::JumpOut);
    EXPECT_EQ(r.pc, 17);
    EXPECT_EQ(r.sp, 1);
    EXPECT_EQ(ctx.arrays[hp::host::kArrStack][0], hp::int_slot(41));
  }
  {  // no flag at all: fatal
    auto ctx = scratch_ctx();
    ctx.arrays[hp::host::kArrStack][2] = hp::int_slot(41);
    hp::rt::RunStats stats;
    UnitExecutor ex(ctx, stats);
    EXPECT_THROW(ex.execute(u, 3), hp::VmError);
  }
}

TEST(Execute, MalformedSnapshotIsFatal) {
  CompiledUnit u = simple_unit();
  u.strategy = Strategy::Trace;
  u.nregs = 1;
  u.snaps.push_back(DeoptSnapshot{false, 0, -1, 0, 1000});  // sp far past the stack
  u.guard_count = 1;
  u.blocks[0].ops.push_back(
      TraceOp{TOp::Guard, Space::Stack, false, true, true, -1, 0, -1, 0, 0, hp::int_slot(99)});
  u.blocks[0].term = Terminal{Term::JumpEntry, -1, -1, -1, 0, -1, -1, 0, 0, 0};
  auto ctx = scratch_ctx(8);
  hp::rt::RunStats stats;
  UnitExecutor ex(ctx, stats);
  try {
    ex.execute(u, 0);
    FAIL() << "expected a snapshot error";
  } catch (const hp::VmError& e) {
    EXPECT_EQ(e.kind, hp::VmError::Kind::BadSnapshot);
  }
}

TEST(Registry, LinkSkipsLookups) {
  // Two trace units: A jumps out to B's key; after link(), chaining does
  // not consult the registry.
  auto mk = [](int64_t pc) {
    auto u = std::make_shared<CompiledUnit>(simple_unit());
    u->strategy = Strategy::Trace;
    u->entry_pc = pc;
    u->nregs = 1;
    u->name = "u" + std::to_string(pc);
    return u;
  };
  auto a = mk(10), b = mk(20);
  UnitRegistry reg;
  reg.install(a);
  reg.install(b);
  hp::rt::RunStats stats;
  EXPECT_EQ(reg.linked(*a, 20), nullptr);
  EXPECT_NE(reg.lookup(20, &stats), nullptr);
  EXPECT_EQ(stats.registry_lookups, 1u);
  reg.link(*a, 20);
  EXPECT_EQ(reg.linked(*a, 20), b);
  // Linked transfers do not touch the lookup counter.
  EXPECT_EQ(stats.registry_lookups, 1u);
  // Absent targets stay absent.
  EXPECT_EQ(reg.lookup(99, &stats), nullptr);
}

TEST(Fold, RandomizedExecutionEquivalence) {
  // Random linear units over a small register file and a scratch stack:
  // fold_constants must preserve behaviour exactly.
  std::mt19937 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    CompiledUnit u = simple_unit();
    u.strategy = Strategy::Trace;
    u.nregs = 8;
    auto& ops = u.blocks[0].ops;
    // Seed a few registers from the stack so not everything is constant.
    for (int32_t r = 1; r <= 2; ++r)
      ops.push_back(
          TraceOp{TOp::StackLoad, Space::Stack, false, true, false, r, 0, -1, -r, -1, {}});
    int defined = 3;
    for (int i = 3; i < 8; ++i) {
      int kind = rng() % 5;
      int32_t a = (int32_t)(rng() % defined);
      if (kind == 0) {
        ops.push_back(op_const(i, (int64_t)(rng() % 100) - 50));
      } else if (kind == 1) {
        ops.push_back(op_bin_imm((TOp)((int)TOp::Add + rng() % 3), i, a,
                                 (int64_t)(rng() % 7) - 3));
      } else if (kind == 2) {
        int32_t b = (int32_t)(rng() % defined);
        ops.push_back(op_bin((TOp)((int)TOp::Add + rng() % 6), i, a, b));
      } else if (kind == 3) {
        ops.push_back(TraceOp{TOp::Move, Space::Stack, false, true, false, i, a, -1, 0, -1, {}});
      } else {
        // A guard over an existing register with a random expectation.
        u.snaps.push_back(DeoptSnapshot{false, (int64_t)(rng() % 50), -1, 0, 0});
        ++u.guard_count;
        ops.push_back(TraceOp{TOp::Guard, Space::Stack, false, (rng() % 2) == 0, false, -1,
                              a, -1, 0, (int32_t)u.snaps.size() - 1, {}});
        ops.push_back(op_const(i, 1));
      }
      ++defined;
    }
    // Store a couple of results so memory effects are comparable.
    ops.push_back(TraceOp{TOp::StackStore, Space::Stack, false, true, false, -1, 0, 6, 1, -1, {}});
    ops.push_back(TraceOp{TOp::StackStore, Space::Stack, false, true, false, -1, 0, 7, 2, -1, {}});
    u.blocks[0].term = Terminal{Term::RetValue, 7, -1, -1, 0, -1, -1, 0, 0, 0};
    // RetValue in a trace-strategy unit is fine for this harness.
    u.strategy = Strategy::Trace;
    verify_unit(u);
    CompiledUnit f = fold_constants(u);

    auto run = [&](const CompiledUnit& unit, hp::host::ExecContext& ctx) {
      hp::rt::RunStats stats;
      UnitExecutor ex(ctx, stats);
      return ex.execute(unit, 8);
    };
    auto ctx1 = scratch_ctx(32);
    auto ctx2 = scratch_ctx(32);
    for (int64_t i = 0; i < 8; ++i) {
      int64_t v = (int64_t)(rng() % 1000) - 500;
      ctx1.arrays[hp::host::kArrStack][i] = hp::int_slot(v);
      ctx2.arrays[hp::host::kArrStack][i] = hp::int_slot(v);
    }
    ExitReason r1 = run(u, ctx1);
    ExitReason r2 = run(f, ctx2);
    ASSERT_EQ(r1.kind, r2.kind) << trial;
    ASSERT_EQ(r1.value, r2.value) << trial;
    ASSERT_EQ(r1.pc, r2.pc) << trial;
    ASSERT_EQ(r1.sp, r2.sp) << trial;
    ASSERT_EQ(ctx1.arrays[hp::host::kArrStack], ctx2.arrays[hp::host::kArrStack]) << trial;
  }
}
