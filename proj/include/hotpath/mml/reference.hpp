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

#include <vector>

#include "hotpath/mml/ast.hpp"
#include "hotpath/slot.hpp"

namespace hotpath::mml {

// Big-step AST evaluator. This is the ground truth every execution mode is
// checked against; it shares nothing with the bytecode path beyond the
// binder's slot assignment.
class ReferenceInterp {
 public:
  explicit ReferenceInterp(const BoundProgram& p, int depth_limit = 50000)
      : prog_(p), depth_limit_(depth_limit) {}

  std::vector<int64_t> run() {
    out_.clear();
    std::vector<int64_t> frame;
    eval(prog_.main, frame);
    return out_;
  }

 private:
  int64_t eval(const Expr* e, std::vector<int64_t>& frame) {
    switch (e->kind) {
      case ExprKind::IntLit:
      case ExprKind::BoolLit:
        return e->int_val;
      case ExprKind::UnitLit:
        return 0;
      case ExprKind::Var:
        return frame[e->slot];
      case ExprKind::BinOp: {
        int64_t a = eval(e->kids[0].get(), frame);
        int64_t b = eval(e->kids[1].get(), frame);
        switch (e->binop) {
          case BinOpKind::Add: return wrap_add(a, b);
          case BinOpKind::Sub: return wrap_sub(a, b);
          case BinOpKind::Mul: return wrap_mul(a, b);
          case BinOpKind::Lt: return a < b ? 1 : 0;
          case BinOpKind::Le: return a <= b ? 1 : 0;
          case BinOpKind::Eq: return a == b ? 1 : 0;
        }
        return 0;
      }
      case ExprKind::If:
        return eval(e->kids[0].get(), frame) != 0 ? eval(e->kids[1].get(), frame)
                                                  : eval(e->kids[2].get(), frame);
      case ExprKind::Let: {
        int64_t v = eval(e->kids[0].get(), frame);
        frame.push_back(v);
        int64_t r = eval(e->kids[1].get(), frame);
        frame.pop_back();
        return r;
      }
      case ExprKind::LetRec:
        // Definitions were hoisted by the binder; evaluate the continuation.
        return eval(e->kids[1].get(), frame);
      case ExprKind::Call: {
        const FnDef& f = prog_.functions[e->fn_index];
        std::vector<int64_t> callee_frame;
        callee_frame.reserve(f.arity + 4);
        for (const auto& k : e->kids) callee_frame.push_back(eval(k.get(), frame));
        if (++depth_ > depth_limit_) {
          --depth_;
          throw VmError(VmError::Kind::RecursionLimit,
                        "reference interpreter recursion depth limit (" +
                            std::to_string(depth_limit_) + ") exceeded");
        }
        int64_t r = eval(f.body, callee_frame);
        --depth_;
        return r;
      }
      case ExprKind::PrintInt: {
        int64_t v = eval(e->kids[0].get(), frame);
        out_.push_back(v);
        return 0;
      }
      case ExprKind::Seq:
        eval(e->kids[0].get(), frame);
        return eval(e->kids[1].get(), frame);
    }
    return 0;
  }

  const BoundProgram& prog_;
  int depth_limit_;
  int depth_ = 0;
  std::vector<int64_t> out_;
};

inline std::vector<int64_t> run_reference(const BoundProgram& p, int depth_limit = 50000) {
  return ReferenceInterp(p, depth_limit).run();
}

}  // namespace hotpath::mml
