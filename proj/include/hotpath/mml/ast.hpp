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
#include <string>
#include <vector>

namespace hotpath::mml {

// Expression tree for the ML-like source language. Values are unit,
// booleans and integers; functions are first-order and bound by
// `let rec` at the top level.
enum class ExprKind {
  IntLit,
  BoolLit,
  UnitLit,
  Var,
  BinOp,
  If,       // kids: cond, then, else
  Let,      // let name = kids[0] in kids[1]
  LetRec,   // let rec name params = kids[0] in kids[1]
  Call,     // callee `name`, kids = arguments
  PrintInt, // kids[0]
  Seq,      // kids[0]; kids[1]
};

enum class BinOpKind { Add, Sub, Mul, Lt, Le, Eq };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  ExprKind kind;
  int line = 0, col = 0;

  int64_t int_val = 0;            // IntLit / BoolLit
  std::string name;               // Var / Let / LetRec / Call
  std::vector<std::string> params; // LetRec
  BinOpKind binop = BinOpKind::Add;
  std::vector<ExprPtr> kids;

  // Filled by the binder.
  int slot = -1;      // Var: frame slot; Let: slot of the bound variable
  int fn_index = -1;  // Call / LetRec: index into the function list

  Expr(ExprKind k, int line, int col) : kind(k), line(line), col(col) {}
};

struct Ast {
  ExprPtr root;
};

// Output of the binder: the top-level `let rec` chain flattened into a
// function list plus the trailing main expression. Variable references
// inside bodies carry resolved frame slots.
struct FnDef {
  std::string name;
  int arity = 0;
  const Expr* body = nullptr;
};

struct BoundProgram {
  Ast ast;
  std::vector<FnDef> functions;
  const Expr* main = nullptr;
};

}  // namespace hotpath::mml
