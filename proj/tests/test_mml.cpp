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

#include "hotpath/bytecode.hpp"
#include "hotpath/mml/compile.hpp"
#include "hotpath/mml/parse.hpp"
#include "hotpath/mml/reference.hpp"

namespace hp = hotpath;
using namespace hotpath::mml;

namespace {

// Independent oracles, written directly against the mathematical
// definitions so they share nothing with the interpreter under test.
int64_t oracle_fib(int64_t n) { return n <= 1 ? 1 : oracle_fib(n - 1) + oracle_fib(n - 2); }
int64_t oracle_sum_tail(int64_t acc, int64_t n) { return n <= 1 ? acc : oracle_sum_tail(acc + n, n - 1); }
int64_t oracle_tak(int64_t x, int64_t y, int64_t z) {
  if (x <= y) return z;
  return oracle_tak(oracle_tak(x - 1, y, z), oracle_tak(y - 1, z, x), oracle_tak(z - 1, x, y));
}

const char* kSumFib = R"(
let rec fib n =
  if n <= 1 then 1 else
    fib (n-1) + fib (n-2) in

let rec sum i n =
  if i <= 1 then n else
  let m = fib 10 in
    sum (i-1) (n+m) in

print_int (sum 1000 0)
)";

const char* kSumTak = R"(
let rec tak x y z =
  if x <= y then z else
    tak (tak (x-1) y z)
        (tak (y-1) z x)
        (tak (z-1) x y) in

let rec sum i n =
  if i <= 1 then n else
  let m = tak 12 6 4 in
    sum (i-1) (n + m) in

print_int (sum 100 0)
)";

}  // namespace

TEST(Parse, SmallestProgram) {
  BoundProgram p = parse("print_int 42");
  ASSERT_EQ(p.functions.size(), 0u);
  ASSERT_EQ(p.main->kind, ExprKind::PrintInt);
  EXPECT_EQ(p.main->kids[0]->int_val, 42);
}

TEST(Parse, SumFibShape) {
  BoundProgram p = parse(kSumFib);
  ASSERT_EQ(p.functions.size(), 2u);
  EXPECT_EQ(p.functions[0].name, "fib");
  EXPECT_EQ(p.functions[0].arity, 1);
  EXPECT_EQ(p.functions[1].name, "sum");
  EXPECT_EQ(p.functions[1].arity, 2);
  EXPECT_EQ(p.main->kind, ExprKind::PrintInt);
}

TEST(Parse, SyntaxErrorHasPosition) {
  try {
    parse("let x = in 3");
    FAIL() << "expected a parse error";
  } catch (const hp::ParseError& e) {
    EXPECT_EQ(e.line, 1);
    EXPECT_GT(e.col, 1);
  }
}

TEST(Parse, UnboundVariable) {
  EXPECT_THROW(parse("print_int (x + 1)"), hp::ParseError);
  EXPECT_THROW(parse("let rec f n = g n in print_int (f 1)"), hp::ParseError);
}

TEST(Parse, ArityMismatch) {
  EXPECT_THROW(parse("let rec f a b = a + b in print_int (f 1)"), hp::ParseError);
}

TEST(Parse, CommentsAndOperators) {
  BoundProgram p = parse("(* a (* nested *) comment *) print_int (1 + 2 * 3 - 4)");
  EXPECT_EQ(run_reference(p), (std::vector<int64_t>{3}));
}

TEST(Reference, Fib10) {
  BoundProgram p = parse(
      "let rec fib n = if n <= 1 then 1 else fib (n-1) + fib (n-2) in print_int (fib 10)");
  EXPECT_EQ(run_reference(p), (std::vector<int64_t>{oracle_fib(10)}));
  EXPECT_EQ(oracle_fib(10), 89);
}

TEST(Reference, SumTail) {
  BoundProgram p = parse(
      "let rec sum acc n = if n <= 1 then acc else sum (acc+n) (n-1) in print_int (sum 0 4)");
  EXPECT_EQ(run_reference(p), (std::vector<int64_t>{oracle_sum_tail(0, 4)}));
  EXPECT_EQ(oracle_sum_tail(0, 4), 9);
}

TEST(Reference, Tak) {
  BoundProgram p = parse(
      "let rec tak x y z = if x <= y then z else tak (tak (x-1) y z) (tak (y-1) z x) "
      "(tak (z-1) x y) in print_int (tak 1 0 0)");
  EXPECT_EQ(run_reference(p), (std::vector<int64_t>{oracle_tak(1, 0, 0)}));
  EXPECT_EQ(oracle_tak(1, 0, 0), 0);
}

TEST(Reference, RecursionLimitIsDistinct) {
  BoundProgram p = parse("let rec f n = f (n+1) in print_int (f 0)");
  try {
    run_reference(p, 1000);
    FAIL() << "expected recursion limit";
  } catch (const hp::VmError& e) {
    EXPECT_EQ(e.kind, hp::VmError::Kind::RecursionLimit);
  }
}

TEST(Compile, SmallestProgram) {
  BoundProgram p = parse("print_int 42");
  hp::BytecodeProgram bc = compile(p);
  // print_int's unit result plus the top-level discard.
  std::vector<hp::Instruction> expect = {
      {hp::Opcode::CONST, 42, 0}, {hp::Opcode::PRINT, 0, 0}, {hp::Opcode::CONST, 0, 0},
      {hp::Opcode::POP, 0, 0},    {hp::Opcode::HALT, 0, 0},
  };
  EXPECT_EQ(bc.code, expect);
}

TEST(Compile, ConditionalUsesLeThenJumpIf) {
  BoundProgram p = parse(
      "let rec f n = if n <= 1 then 1 else f (n-1) in print_int (f 3)");
  hp::BytecodeProgram bc = compile(p);
  // Hand-compiled body of f per the compiler's own conventions:
  //   LOAD n; CONST 1; LE; JUMP_IF else; CONST 1 (then); JUMP end;
  //   else: LOAD n; CONST 1; SUB; CALL f 1; end: epilogue
  std::vector<hp::Instruction> body(bc.code.begin(), bc.code.begin() + 13);
  std::vector<hp::Instruction> expect = {
      {hp::Opcode::LOAD, 0, 0}, {hp::Opcode::CONST, 1, 0},  {hp::Opcode::LE, 0, 0},
      {hp::Opcode::JUMP_IF, 6, 0}, {hp::Opcode::CONST, 1, 0}, {hp::Opcode::JUMP, 10, 0},
      {hp::Opcode::LOAD, 0, 0}, {hp::Opcode::CONST, 1, 0},  {hp::Opcode::SUB, 0, 0},
      {hp::Opcode::CALL, 0, 1}, {hp::Opcode::STORE, 0, 0},  {hp::Opcode::RETURN, 0, 0},
      {hp::Opcode::CONST, 3, 0},
  };
  EXPECT_EQ(body, expect);
  int le_pos = -1, jif_pos = -1;
  for (size_t i = 0; i < bc.code.size(); ++i) {
    if (bc.code[i].op == hp::Opcode::LE && le_pos < 0) le_pos = (int)i;
    if (bc.code[i].op == hp::Opcode::JUMP_IF && jif_pos < 0) jif_pos = (int)i;
  }
  EXPECT_EQ(jif_pos, le_pos + 1);
}

TEST(Compile, SumTakFunctionTable) {
  hp::BytecodeProgram bc = compile(parse(kSumTak));
  ASSERT_NE(bc.function_named("tak"), nullptr);
  ASSERT_NE(bc.function_named("sum"), nullptr);
  ASSERT_NE(bc.function_named("main"), nullptr);
  EXPECT_EQ(bc.function_named("main")->entry, bc.entry);
  EXPECT_EQ(bc.function_named("tak")->arity, 3);
}

TEST(Compile, StackBalanceAcrossPrograms) {
  for (const char* src : {kSumFib, kSumTak,
                          "let rec f a b c = if a < b then a * c else f (a-1) b (c+a) in "
                          "print_int (f 10 2 0)",
                          "let x = 1 in let y = x + 2 in print_int (x + y); print_int 0"}) {
    hp::BytecodeProgram bc = compile(parse(src));
    EXPECT_NO_THROW(check_stack_balance(bc)) << src;
  }
}

TEST(Disasm, PinnedSmallListing) {
  hp::BytecodeProgram p;
  p.code = {{hp::Opcode::CONST, 42, 0}, {hp::Opcode::PRINT, 0, 0}, {hp::Opcode::HALT, 0, 0}};
  EXPECT_EQ(hp::disassemble(p), "0: CONST 42\n1: PRINT\n2: HALT\n");
}

TEST(Disasm, EmptyProgram) {
  EXPECT_EQ(hp::disassemble(hp::BytecodeProgram{}), "");
}

TEST(Disasm, RoundTrip) {
  for (const char* src : {kSumFib, kSumTak, "print_int 42"}) {
    hp::BytecodeProgram bc = compile(parse(src));
    hp::BytecodeProgram back = hp::assemble(hp::disassemble(bc));
    EXPECT_EQ(bc, back) << src;
  }
}

TEST(Disasm, CallTargetsMatchFunctionTable) {
  hp::BytecodeProgram bc = compile(parse(kSumFib));
  for (const auto& ins : bc.code) {
    if (ins.op == hp::Opcode::CALL) {
      EXPECT_NE(bc.function_at(ins.a), nullptr);
    }
  }
}
