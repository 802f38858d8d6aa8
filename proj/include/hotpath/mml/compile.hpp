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

#include <string>
#include <vector>

#include "hotpath/bytecode.hpp"
#include "hotpath/mml/ast.hpp"

namespace hotpath::mml {

// Compiles the bound AST to stack bytecode.
//
// Conventions:
//  - all LOAD/STORE operands are depths relative to the current stack top,
//    resolved here by tracking the static stack height; there is no frame
//    base register at run time
//  - a function is entered with its k arguments on top of the stack and
//    must end each path with exactly one result above the caller's
//    call-protocol cells, which the epilogue (STORE/POPs) guarantees
//  - conditionals emit JUMP_IF (branch taken when the popped value is 0)
//    with the then-branch on the fall-through path
//  - functions are laid out before the top-level code, so every call site
//    transfers backwards
class Compiler {
 public:
  BytecodeProgram compile(const BoundProgram& p) {
    prog_ = BytecodeProgram{};
    fn_entries_.assign(p.functions.size(), 0);

    // First pass records entry addresses; call sites reference them
    // directly, and definition order makes every callee address known
    // before its call sites are reached.
    for (size_t i = 0; i < p.functions.size(); ++i) {
      const FnDef& f = p.functions[i];
      fn_entries_[i] = (int64_t)prog_.code.size();
      prog_.functions.push_back(FunctionEntry{f.name, fn_entries_[i], f.arity});
      height_ = f.arity;
      emit_expr(f.body);
      emit_epilogue(f.arity);
    }

    prog_.entry = (int64_t)prog_.code.size();
    prog_.functions.push_back(FunctionEntry{"main", prog_.entry, 0});
    height_ = 0;
    emit_expr(p.main);
    emit(Opcode::POP);  // discard the program result
    emit(Opcode::HALT);

    verify_targets(prog_);
    return prog_;
  }

 private:
  int64_t emit(Opcode op, int64_t a = 0, int64_t b = 0) {
    prog_.code.push_back(Instruction{op, a, b});
    return (int64_t)prog_.code.size() - 1;
  }

  void emit_epilogue(int arity) {
    // Stack here: [arg0 .. argk-1, result]. Collapse to [result] so
    // RETURN sees the value directly above the caller's protocol cells.
    emit(Opcode::STORE, arity - 1);
    for (int i = 0; i < arity - 1; ++i) emit(Opcode::POP);
    emit(Opcode::RETURN);
    height_ = 0;
  }

  void emit_expr(const Expr* e) {
    switch (e->kind) {
      case ExprKind::IntLit:
      case ExprKind::BoolLit:
        emit(Opcode::CONST, e->int_val);
        ++height_;
        return;
      case ExprKind::UnitLit:
        emit(Opcode::CONST, 0);
        ++height_;
        return;
      case ExprKind::Var:
        emit(Opcode::LOAD, height_ - 1 - e->slot);
        ++height_;
        return;
      case ExprKind::BinOp: {
        emit_expr(e->kids[0].get());
        emit_expr(e->kids[1].get());
        switch (e->binop) {
          case BinOpKind::Add: emit(Opcode::ADD); break;
          case BinOpKind::Sub: emit(Opcode::SUB); break;
          case BinOpKind::Mul: emit(Opcode::MUL); break;
          case BinOpKind::Lt: emit(Opcode::LT); break;
          case BinOpKind::Le: emit(Opcode::LE); break;
          case BinOpKind::Eq: emit(Opcode::EQ); break;
        }
        --height_;
        return;
      }
      case ExprKind::If: {
        emit_expr(e->kids[0].get());
        int64_t jif = emit(Opcode::JUMP_IF, 0);
        --height_;
        int h0 = height_;
        emit_expr(e->kids[1].get());
        int64_t jend = emit(Opcode::JUMP, 0);
        int h_then = height_;
        height_ = h0;
        prog_.code[jif].a = (int64_t)prog_.code.size();
        emit_expr(e->kids[2].get());
        if (height_ != h_then)
          throw CompileError("branch arms disagree on stack height");
        prog_.code[jend].a = (int64_t)prog_.code.size();
        return;
      }
      case ExprKind::Let: {
        emit_expr(e->kids[0].get());
        emit_expr(e->kids[1].get());
        // [.., bound, result] -> [.., result]
        emit(Opcode::STORE, 0);
        --height_;
        return;
      }
      case ExprKind::LetRec:
        // Top-level chain: the definition itself was compiled up front.
        emit_expr(e->kids[1].get());
        return;
      case ExprKind::Call: {
        for (const auto& k : e->kids) emit_expr(k.get());
        emit(Opcode::CALL, fn_entries_[e->fn_index], (int64_t)e->kids.size());
        height_ -= (int)e->kids.size();
        ++height_;
        return;
      }
      case ExprKind::PrintInt: {
        emit_expr(e->kids[0].get());
        emit(Opcode::PRINT);
        emit(Opcode::CONST, 0);  // print_int evaluates to unit
        return;
      }
      case ExprKind::Seq: {
        emit_expr(e->kids[0].get());
        emit(Opcode::POP);
        --height_;
        emit_expr(e->kids[1].get());
        return;
      }
    }
  }

  BytecodeProgram prog_;
  std::vector<int64_t> fn_entries_;
  int height_ = 0;
};

inline BytecodeProgram compile(const BoundProgram& p) { return Compiler().compile(p); }

// Abstract interpretation of compiled functions: walks every path tracking
// the stack height and checks the frame discipline (consistent heights at
// joins, exactly one result above the frame at RETURN, height 0 at HALT).
inline void check_stack_balance(const BytecodeProgram& p) {
  for (const auto& f : p.functions) {
    std::vector<int> height_at(p.code.size(), -1);
    std::vector<std::pair<int64_t, int>> work;
    int start_h = (int)f.arity;  // main has arity 0
    work.push_back({f.entry, start_h});
    while (!work.empty()) {
      auto [pc, h] = work.back();
      work.pop_back();
      while (true) {
        if (pc < 0 || pc >= (int64_t)p.code.size())
          throw CompileError("walk escaped program in " + f.name);
        if (height_at[pc] != -1) {
          if (height_at[pc] != h)
            throw CompileError("inconsistent stack height at " + std::to_string(pc) +
                               " in " + f.name);
          break;
        }
        height_at[pc] = h;
        const auto& ins = p.code[pc];
        switch (ins.op) {
          case Opcode::CONST: ++h; ++pc; break;
          case Opcode::LOAD:
            if (ins.a >= h) throw CompileError("LOAD below frame in " + f.name);
            ++h; ++pc;
            break;
          case Opcode::STORE:
            --h;
            if (ins.a >= h) throw CompileError("STORE below frame in " + f.name);
            ++pc;
            break;
          case Opcode::ADD: case Opcode::SUB: case Opcode::MUL:
          case Opcode::LT: case Opcode::LE: case Opcode::EQ:
            h -= 1; ++pc;
            if (h < 1) throw CompileError("operand underflow in " + f.name);
            break;
          case Opcode::JUMP: pc = ins.a; break;
          case Opcode::JUMP_IF:
            --h;
            work.push_back({ins.a, h});
            ++pc;
            break;
          case Opcode::CALL:
            h -= (int)ins.b;
            if (h < 0) throw CompileError("call argument underflow in " + f.name);
            ++h; ++pc;
            break;
          case Opcode::RETURN:
            if (h != 1)
              throw CompileError("RETURN with height " + std::to_string(h) + " in " + f.name);
            goto path_done;
          case Opcode::POP: --h; ++pc; break;
          case Opcode::DUP: ++h; ++pc; break;
          case Opcode::PRINT: --h; ++pc; break;
          case Opcode::HALT:
            if (h != 0)
              throw CompileError("HALT with height " + std::to_string(h) + " in " + f.name);
            goto path_done;
        }
        if (h < 0) throw CompileError("stack underflow in " + f.name);
      }
    path_done:;
    }
  }
}

}  // namespace hotpath::mml
