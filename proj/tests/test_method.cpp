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

#include "hotpath/host/build_interp.hpp"
#include "hotpath/jit/method.hpp"
#include "hotpath/mml/compile.hpp"
#include "hotpath/mml/parse.hpp"
#include "hotpath/mml/reference.hpp"
#include "hotpath/rt/engine.hpp"

namespace hp = hotpath;
using namespace hotpath::jit;

namespace {

hp::BytecodeProgram compile_src(const std::string& src) {
  return hp::mml::compile(hp::mml::parse(src));
}

MethodResult method_trace(const hp::BytecodeProgram& bc, const std::string& fn,
                          MethodConfig cfg = {}) {
  static hp::host::HostProgram hp_prog = hp::host::build_interpreter();
  return jit_meta_method(hp_prog, bc, bc.function_named(fn)->entry, cfg);
}

// A hand-assembled function with one while-shaped loop:
//   loop(n): acc = 0; while (0 < n) { acc += n; n -= 1 }; return acc
hp::BytecodeProgram loop_program() {
  using hp::Opcode;
  hp::BytecodeProgram p;
  p.code = {
      {Opcode::CONST, 0, 0},    // 0: acc
      {Opcode::CONST, 0, 0},    // 1: loop head
      {Opcode::LOAD, 2, 0},     // 2: n
      {Opcode::LT, 0, 0},       // 3: 0 < n
      {Opcode::JUMP_IF, 14, 0}, // 4: exit when the loop is done
      {Opcode::LOAD, 0, 0},     // 5: acc
      {Opcode::LOAD, 2, 0},     // 6: n
      {Opcode::ADD, 0, 0},      // 7
      {Opcode::STORE, 0, 0},    // 8: acc = acc + n
      {Opcode::LOAD, 1, 0},     // 9: n
      {Opcode::CONST, 1, 0},    // 10
      {Opcode::SUB, 0, 0},      // 11
      {Opcode::STORE, 1, 0},    // 12: n = n - 1
      {Opcode::JUMP, 1, 0},     // 13: back edge
      {Opcode::STORE, 0, 0},    // 14: epilogue
      {Opcode::RETURN, 0, 0},   // 15
      {Opcode::CONST, 5, 0},    // 16: main
      {Opcode::CALL, 0, 1},     // 17
      {Opcode::PRINT, 0, 0},    // 18
      {Opcode::HALT, 0, 0},     // 19
  };
  p.functions = {{"loop", 0, 1}, {"main", 16, 0}};
  p.entry = 16;
  hp::verify_targets(p);
  hp::mml::check_stack_balance(p);
  return p;
}

}  // namespace

TEST(Method, FibStructureOneIfTwoCalls) {
  auto bc = compile_src(
      "let rec fib n = if n <= 1 then 1 else fib (n-1) + fib (n-2) in print_int (fib 10)");
  MethodResult r = method_trace(bc, "fib");
  ASSERT_NE(r.unit, nullptr);
  EXPECT_EQ(r.unit->if_nodes, 1);
  EXPECT_EQ(r.unit->call_sites, 2);
  EXPECT_EQ(r.unit->loops.size(), 0u);
  // No guards in a method unit: all paths are covered.
  for (const auto& b : r.unit->blocks)
    for (const auto& op : b.ops) EXPECT_NE(op.op, TOp::Guard);
}

TEST(Method, StraightLineFunctionHasNoIfNodes) {
  auto bc = compile_src("let rec square x = x * x in print_int (square 12)");
  MethodResult r = method_trace(bc, "square");
  ASSERT_NE(r.unit, nullptr);
  EXPECT_EQ(r.unit->if_nodes, 0);
  EXPECT_EQ(r.unit->call_sites, 0);
  EXPECT_EQ(r.unit->blocks.size(), 1u);
  EXPECT_EQ(r.unit->blocks[0].term.kind, Term::Ret);
}

TEST(Method, NonEntryStartReturnsNothing) {
  auto bc = compile_src("let rec f n = n in print_int (f 3)");
  static hp::host::HostProgram hp_prog = hp::host::build_interpreter();
  MethodResult r = jit_meta_method(hp_prog, bc, bc.function_named("f")->entry + 1);
  EXPECT_EQ(r.unit, nullptr);
  EXPECT_EQ(r.abort, MethodAbort::NotEntry);
}

TEST(Method, NestedConditionals) {
  auto bc = compile_src(
      "let rec f a b = if a <= 0 then (if b <= 0 then 1 else 2) else 3 in "
      "print_int (f 1 1)");
  MethodResult r = method_trace(bc, "f");
  ASSERT_NE(r.unit, nullptr);
  EXPECT_EQ(r.unit->if_nodes, 2);
  // One arm of the outer conditional contains the inner one.
  const auto& entry = r.unit->blocks[0];
  ASSERT_EQ(entry.term.kind, Term::If);
  auto count_ifs_below = [&](int32_t blk, auto&& self) -> int {
    const auto& b = r.unit->blocks[blk];
    if (b.term.kind == Term::If)
      return 1 + self(b.term.then_block, self) + self(b.term.else_block, self);
    if (b.term.kind == Term::JumpBlock) return self(b.term.then_block, self);
    return 0;
  };
  int below = count_ifs_below(entry.term.then_block, count_ifs_below) +
              count_ifs_below(entry.term.else_block, count_ifs_below);
  EXPECT_EQ(below, 1);
}

TEST(Method, BranchBlowUpAborts) {
  // 65 sequential conditionals exceed the default threshold of 64.
  std::string body = "0";
  for (int i = 0; i < 65; ++i)
    body = "(if n <= " + std::to_string(i) + " then 1 else " + body + ")";
  auto bc = compile_src("let rec f n = " + body + " in print_int (f 70)");
  MethodResult r = method_trace(bc, "f");
  EXPECT_EQ(r.unit, nullptr);
  EXPECT_EQ(r.abort, MethodAbort::BranchBlowUp);
  // 64 sequential conditionals fit.
  std::string body2 = "0";
  for (int i = 0; i < 64; ++i)
    body2 = "(if n <= " + std::to_string(i) + " then 1 else " + body2 + ")";
  auto bc2 = compile_src("let rec f n = " + body2 + " in print_int (f 70)");
  EXPECT_NE(method_trace(bc2, "f").unit, nullptr);
}

TEST(Method, LoopSplitsIntoThreeParts) {
  auto bc = loop_program();
  MethodResult r = method_trace(bc, "loop");
  ASSERT_NE(r.unit, nullptr);
  ASSERT_EQ(r.unit->loops.size(), 1u);
  const LoopInfo& loop = r.unit->loops[0];
  // tr.1: the entry part ends by jumping to the loop head.
  ASSERT_EQ(r.unit->blocks[0].term.kind, Term::JumpBlock);
  EXPECT_EQ(r.unit->blocks[0].term.then_block, loop.head_block);
  // tr.2: some path from the head jumps back to the head.
  bool has_back_edge = false;
  for (size_t i = 1; i < r.unit->blocks.size(); ++i) {
    const auto& b = r.unit->blocks[i];
    if (b.term.kind == Term::JumpBlock && b.term.then_block == loop.head_block)
      has_back_edge = true;
  }
  EXPECT_TRUE(has_back_edge);
  // tr.3: exactly one after-trace, ending in the return.
  ASSERT_EQ(loop.afters.size(), 1u);
  EXPECT_EQ(r.unit->blocks[loop.afters[0]].term.kind, Term::Ret);
}

TEST(Method, LoopProgramExecutesCorrectly) {
  auto bc = loop_program();
  hp::rt::EngineConfig cfg;
  cfg.mode = hp::rt::Mode::MethodOnly;
  cfg.threshold = 1;
  hp::rt::Engine e(bc, cfg);
  EXPECT_EQ(e.run(), (std::vector<int64_t>{15}));
  EXPECT_EQ(e.stats().compiles_method, 1u);
  auto out = e.run();  // second run enters the compiled unit immediately
  EXPECT_EQ(out, (std::vector<int64_t>{15}));
  EXPECT_GT(e.stats().unit_entries, 0u);
}

TEST(Method, TwoExitLoopGetsTwoAfterTraces) {
  using hp::Opcode;
  // loop(n): while (0 < n) { if n == 3 return 99; n -= 1 }; return 7
  hp::BytecodeProgram p;
  p.code = {
      {Opcode::CONST, 0, 0},     // 0: head: [n, 0]
      {Opcode::LOAD, 1, 0},      // 1: [n, 0, n]
      {Opcode::LT, 0, 0},        // 2: [n, 0<n]
      {Opcode::JUMP_IF, 14, 0},  // 3: exit 1 when n <= 0
      {Opcode::LOAD, 0, 0},      // 4: [n, n]
      {Opcode::CONST, 3, 0},     // 5: [n, n, 3]
      {Opcode::EQ, 0, 0},        // 6: [n, n==3]
      {Opcode::JUMP_IF, 9, 0},   // 7: when n != 3 keep looping
      {Opcode::JUMP, 16, 0},     // 8: exit 2 (n == 3)
      {Opcode::LOAD, 0, 0},      // 9: [n, n]
      {Opcode::CONST, 1, 0},     // 10
      {Opcode::SUB, 0, 0},       // 11: [n, n-1]
      {Opcode::STORE, 0, 0},     // 12: n = n-1
      {Opcode::JUMP, 0, 0},      // 13: back edge
      {Opcode::CONST, 7, 0},     // 14: exit 1 value
      {Opcode::JUMP, 17, 0},     // 15
      {Opcode::CONST, 99, 0},    // 16: exit 2 value
      {Opcode::STORE, 0, 0},     // 17: epilogue
      {Opcode::RETURN, 0, 0},    // 18
      {Opcode::CONST, 9, 0},     // 19: main
      {Opcode::CALL, 0, 1},      // 20
      {Opcode::PRINT, 0, 0},     // 21
      {Opcode::HALT, 0, 0},      // 22
  };
  p.functions = {{"loop", 0, 1}, {"main", 19, 0}};
  p.entry = 19;
  hp::verify_targets(p);
  hp::mml::check_stack_balance(p);
  MethodResult r = method_trace(p, "loop");
  ASSERT_NE(r.unit, nullptr);
  ASSERT_EQ(r.unit->loops.size(), 1u);
  EXPECT_EQ(r.unit->loops[0].afters.size(), 2u);

  hp::rt::EngineConfig cfg;
  cfg.mode = hp::rt::Mode::MethodOnly;
  cfg.threshold = 1;
  hp::rt::Engine e(p, cfg);
  EXPECT_EQ(e.run(), (std::vector<int64_t>{99}));  // hits n == 3 on the way down
}

TEST(Method, EmptyBodyLoopIsJustBackEdge) {
  using hp::Opcode;
  // A loop whose body is a bare backward jump (traced, never executed).
  hp::BytecodeProgram p;
  p.code = {
      {Opcode::LOAD, 0, 0},     // 0: [n, n]
      {Opcode::JUMP_IF, 3, 0},  // 1: when n == 0, skip to the exit
      {Opcode::JUMP, 2, 0},     // 2: degenerate loop
      {Opcode::CONST, 42, 0},   // 3: [n, 42]
      {Opcode::STORE, 0, 0},    // 4: [42]
      {Opcode::RETURN, 0, 0},   // 5
      {Opcode::CONST, 0, 0},    // 6: main
      {Opcode::CALL, 0, 1},     // 7
      {Opcode::PRINT, 0, 0},    // 8
      {Opcode::HALT, 0, 0},     // 9
  };
  p.functions = {{"f", 0, 1}, {"main", 6, 0}};
  p.entry = 6;
  MethodResult r = method_trace(p, "f");
  ASSERT_NE(r.unit, nullptr);
  ASSERT_EQ(r.unit->loops.size(), 1u);
  const auto& head = r.unit->blocks[r.unit->loops[0].head_block];
  EXPECT_TRUE(head.ops.empty());
  EXPECT_EQ(head.term.kind, Term::JumpBlock);
  EXPECT_EQ(head.term.then_block, r.unit->loops[0].head_block);
}

TEST(Method, CallSitesMatchStaticCallCount) {
  struct Case { const char* src; const char* fn; int calls; };
  for (const Case& c : {
           Case{"let rec f n = f (f n) in print_int (f 1)", "f", 2},
           Case{"let rec g n = n in let rec f n = g n + g (g n) in print_int (f 1)", "f", 3},
           Case{"let rec fib n = if n <= 1 then 1 else fib (n-1) + fib (n-2) in "
                "print_int (fib 3)",
                "fib", 2},
       }) {
    auto bc = compile_src(c.src);
    MethodResult r = method_trace(bc, c.fn);
    ASSERT_NE(r.unit, nullptr) << c.src;
    EXPECT_EQ(r.unit->call_sites, c.calls) << c.src;
  }
}

TEST(Method, BacktrackOrderDoesNotChangeBehaviour) {
  const char* src =
      "let rec ack m n = if m = 0 then n + 1 else if n = 0 then ack (m-1) 1 else "
      "ack (m-1) (ack m (n-1)) in print_int (ack 2 3)";
  auto expected = hp::mml::run_reference(hp::mml::parse(src));
  for (bool then_first : {true, false}) {
    hp::rt::EngineConfig cfg;
    cfg.mode = hp::rt::Mode::MethodOnly;
    cfg.threshold = 5;
    cfg.method.then_first = then_first;
    hp::rt::Engine e(compile_src(src), cfg);
    EXPECT_EQ(e.run(), expected) << then_first;
  }
}

TEST(Method, UnknownCalleeAborts) {
  using hp::Opcode;
  hp::BytecodeProgram p;
  p.code = {
      {Opcode::LOAD, 0, 0},    // 0: f(n)
      {Opcode::CALL, 3, 1},    // 1: target is not a function entry
      {Opcode::STORE, 0, 0},   // 2
      {Opcode::RETURN, 0, 0},  // 3
      {Opcode::CONST, 1, 0},   // 4: main
      {Opcode::CALL, 0, 1},    // 5
      {Opcode::PRINT, 0, 0},   // 6
      {Opcode::HALT, 0, 0},    // 7
  };
  p.functions = {{"f", 0, 1}, {"main", 4, 0}};
  p.entry = 4;
  static hp::host::HostProgram hp_prog = hp::host::build_interpreter();
  MethodResult r = jit_meta_method(hp_prog, p, 0);
  EXPECT_EQ(r.unit, nullptr);
  EXPECT_EQ(r.abort, MethodAbort::UnknownCallee);
}

TEST(Method, UnstructuredLoopAborts) {
  using hp::Opcode;
  // A backward jump whose region is entered from outside (at pc 4).
  hp::BytecodeProgram p;
  p.code = {
      {Opcode::LOAD, 0, 0},     // 0
      {Opcode::JUMP_IF, 4, 0},  // 1: jumps into the middle of the loop below
      {Opcode::CONST, 0, 0},    // 2: loop head
      {Opcode::POP, 0, 0},      // 3
      {Opcode::CONST, 1, 0},    // 4: jump target from outside
      {Opcode::POP, 0, 0},      // 5
      {Opcode::JUMP, 2, 0},     // 6: back edge to 2
      {Opcode::HALT, 0, 0},     // 7: main
  };
  p.functions = {{"f", 0, 1}, {"main", 7, 0}};
  p.entry = 7;
  static hp::host::HostProgram hp_prog = hp::host::build_interpreter();
  MethodResult r = jit_meta_method(hp_prog, p, 0);
  EXPECT_EQ(r.unit, nullptr);
  EXPECT_EQ(r.abort, MethodAbort::Unstructured);
}

TEST(Method, MethodOnlyModeMatchesReference) {
  for (const char* src : {
           "let rec fib n = if n <= 1 then 1 else fib (n-1) + fib (n-2) in "
           "print_int (fib 14)",
           "let rec sum acc n = if n <= 1 then acc else sum (acc+n) (n-1) in "
           "print_int (sum 0 300)",
           "let rec tak x y z = if x <= y then z else tak (tak (x-1) y z) (tak (y-1) z x) "
           "(tak (z-1) x y) in print_int (tak 9 5 2)",
       }) {
    auto expected = hp::mml::run_reference(hp::mml::parse(src));
    hp::rt::EngineConfig cfg;
    cfg.mode = hp::rt::Mode::MethodOnly;
    cfg.threshold = 10;
    hp::rt::Engine e(compile_src(src), cfg);
    EXPECT_EQ(e.run(), expected) << src;
    EXPECT_GT(e.stats().compiles_method, 0u) << src;
    EXPECT_EQ(e.stats().guard_fails, 0u) << src;  // method units have no guards
  }
}

TEST(Method, DumpShowsTreeStructure) {
  auto bc = compile_src(
      "let rec fib n = if n <= 1 then 1 else fib (n-1) + fib (n-2) in print_int (fib 10)");
  MethodResult r = method_trace(bc, "fib");
  ASSERT_NE(r.unit, nullptr);
  std::string d = dump_unit(*r.unit);
  EXPECT_NE(d.find("method fib"), std::string::npos);
  EXPECT_NE(d.find("if %"), std::string::npos);
  EXPECT_NE(d.find("call @"), std::string::npos);
  EXPECT_NE(d.find("ret %"), std::string::npos);
}
