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

#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "hotpath/mml/ast.hpp"
#include "hotpath/slot.hpp"

namespace hotpath::mml {

namespace detail {

enum class Tok {
  Int, Ident,
  Let, Rec, In, If, Then, Else, True, False, PrintInt,
  Plus, Minus, Star, Lt, Le, Eq, Semi, LParen, RParen, Unit,
  Eof,
};

struct Token {
  Tok kind;
  int64_t int_val = 0;
  std::string text;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= src_.size()) {
      t.kind = Tok::Eof;
      return t;
    }
    char c = src_[pos_];
    if (std::isdigit((unsigned char)c)) {
      int64_t v = 0;
      while (pos_ < src_.size() && std::isdigit((unsigned char)src_[pos_])) {
        v = v * 10 + (src_[pos_] - '0');
        advance();
      }
      t.kind = Tok::Int;
      t.int_val = v;
      return t;
    }
    if (std::isalpha((unsigned char)c) || c == '_') {
      std::string id;
      while (pos_ < src_.size() &&
             (std::isalnum((unsigned char)src_[pos_]) || src_[pos_] == '_' || src_[pos_] == '\'')) {
        id += src_[pos_];
        advance();
      }
      t.text = id;
      if (id == "let") t.kind = Tok::Let;
      else if (id == "rec") t.kind = Tok::Rec;
      else if (id == "in") t.kind = Tok::In;
      else if (id == "if") t.kind = Tok::If;
      else if (id == "then") t.kind = Tok::Then;
      else if (id == "else") t.kind = Tok::Else;
      else if (id == "true") t.kind = Tok::True;
      else if (id == "false") t.kind = Tok::False;
      else if (id == "print_int") t.kind = Tok::PrintInt;
      else t.kind = Tok::Ident;
      return t;
    }
    switch (c) {
      case '+': advance(); t.kind = Tok::Plus; return t;
      case '-': advance(); t.kind = Tok::Minus; return t;
      case '*': advance(); t.kind = Tok::Star; return t;
      case ';': advance(); t.kind = Tok::Semi; return t;
      case '=': advance(); t.kind = Tok::Eq; return t;
      case '<':
        advance();
        if (pos_ < src_.size() && src_[pos_] == '=') {
          advance();
          t.kind = Tok::Le;
        } else {
          t.kind = Tok::Lt;
        }
        return t;
      case '(':
        advance();
        if (pos_ < src_.size() && src_[pos_] == ')') {
          advance();
          t.kind = Tok::Unit;
          return t;
        }
        t.kind = Tok::LParen;
        return t;
      case ')': advance(); t.kind = Tok::RParen; return t;
      default:
        throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '(' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        int depth = 0;
        int sl = line_, sc = col_;
        while (pos_ < src_.size()) {
          if (src_[pos_] == '(' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
            ++depth; advance(); advance();
          } else if (src_[pos_] == '*' && pos_ + 1 < src_.size() && src_[pos_ + 1] == ')') {
            --depth; advance(); advance();
            if (depth == 0) break;
          } else {
            advance();
          }
        }
        if (depth != 0) throw ParseError(sl, sc, "unterminated comment");
      } else {
        break;
      }
    }
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) { cur_ = lex_.next(); }

  ExprPtr parse_program() {
    ExprPtr e = expr();
    expect(Tok::Eof, "trailing input after expression");
    return e;
  }

 private:
  ExprPtr mk(ExprKind k, const Token& at) {
    return std::make_unique<Expr>(k, at.line, at.col);
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(cur_.line, cur_.col, msg);
  }

  void bump() { cur_ = lex_.next(); }

  void expect(Tok k, const std::string& msg) {
    if (cur_.kind != k) fail(msg);
    bump();
  }

  // expr := let | if | seq
  ExprPtr expr() {
    if (cur_.kind == Tok::Let) return let_expr();
    return seq_expr();
  }

  ExprPtr let_expr() {
    Token at = cur_;
    bump();  // let
    bool is_rec = false;
    if (cur_.kind == Tok::Rec) {
      is_rec = true;
      bump();
    }
    if (cur_.kind != Tok::Ident) fail("expected a binding name after 'let'");
    std::string name = cur_.text;
    bump();
    if (is_rec) {
      std::vector<std::string> params;
      while (cur_.kind == Tok::Ident) {
        params.push_back(cur_.text);
        bump();
      }
      if (params.empty()) fail("'let rec' needs at least one parameter");
      expect(Tok::Eq, "expected '=' in let rec");
      ExprPtr body = expr();
      expect(Tok::In, "expected 'in' after function body");
      ExprPtr cont = expr();
      ExprPtr e = mk(ExprKind::LetRec, at);
      e->name = name;
      e->params = std::move(params);
      e->kids.push_back(std::move(body));
      e->kids.push_back(std::move(cont));
      return e;
    }
    expect(Tok::Eq, "expected '=' in let binding");
    ExprPtr value = expr();
    expect(Tok::In, "expected 'in' after let binding");
    ExprPtr cont = expr();
    ExprPtr e = mk(ExprKind::Let, at);
    e->name = name;
    e->kids.push_back(std::move(value));
    e->kids.push_back(std::move(cont));
    return e;
  }

  ExprPtr if_expr() {
    Token at = cur_;
    bump();  // if
    ExprPtr c = expr();
    expect(Tok::Then, "expected 'then'");
    ExprPtr t = expr();
    expect(Tok::Else, "expected 'else'");
    ExprPtr f = expr();
    ExprPtr e = mk(ExprKind::If, at);
    e->kids.push_back(std::move(c));
    e->kids.push_back(std::move(t));
    e->kids.push_back(std::move(f));
    return e;
  }

  ExprPtr seq_expr() {
    ExprPtr e = cmp_expr();
    if (cur_.kind == Tok::Semi) {
      Token at = cur_;
      bump();
      ExprPtr rest = expr();
      ExprPtr s = mk(ExprKind::Seq, at);
      s->kids.push_back(std::move(e));
      s->kids.push_back(std::move(rest));
      return s;
    }
    return e;
  }

  ExprPtr cmp_expr() {
    if (cur_.kind == Tok::If) return if_expr();
    ExprPtr lhs = add_expr();
    if (cur_.kind == Tok::Le || cur_.kind == Tok::Lt || cur_.kind == Tok::Eq) {
      Token at = cur_;
      BinOpKind k = cur_.kind == Tok::Le   ? BinOpKind::Le
                    : cur_.kind == Tok::Lt ? BinOpKind::Lt
                                           : BinOpKind::Eq;
      bump();
      ExprPtr rhs = add_expr();
      ExprPtr e = mk(ExprKind::BinOp, at);
      e->binop = k;
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      return e;
    }
    return lhs;
  }

  ExprPtr add_expr() {
    ExprPtr lhs = mul_expr();
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      Token at = cur_;
      BinOpKind k = cur_.kind == Tok::Plus ? BinOpKind::Add : BinOpKind::Sub;
      bump();
      ExprPtr rhs = mul_expr();
      ExprPtr e = mk(ExprKind::BinOp, at);
      e->binop = k;
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr mul_expr() {
    ExprPtr lhs = unary_expr();
    while (cur_.kind == Tok::Star) {
      Token at = cur_;
      bump();
      ExprPtr rhs = unary_expr();
      ExprPtr e = mk(ExprKind::BinOp, at);
      e->binop = BinOpKind::Mul;
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr unary_expr() {
    if (cur_.kind == Tok::Minus) {
      Token at = cur_;
      bump();
      ExprPtr v = unary_expr();
      if (v->kind == ExprKind::IntLit) {
        v->int_val = -v->int_val;
        return v;
      }
      ExprPtr zero = mk(ExprKind::IntLit, at);
      zero->int_val = 0;
      ExprPtr e = mk(ExprKind::BinOp, at);
      e->binop = BinOpKind::Sub;
      e->kids.push_back(std::move(zero));
      e->kids.push_back(std::move(v));
      return e;
    }
    return app_expr();
  }

  bool starts_atom() const {
    switch (cur_.kind) {
      case Tok::Int:
      case Tok::Ident:
      case Tok::True:
      case Tok::False:
      case Tok::Unit:
      case Tok::LParen:
        return true;
      default:
        return false;
    }
  }

  // Function application by juxtaposition: `f x y`. The callee must be a
  // plain identifier (functions are first-order).
  ExprPtr app_expr() {
    if (cur_.kind == Tok::PrintInt) {
      Token at = cur_;
      bump();
      ExprPtr arg = atom();
      ExprPtr e = mk(ExprKind::PrintInt, at);
      e->kids.push_back(std::move(arg));
      return e;
    }
    Token head_tok = cur_;
    ExprPtr head = atom();
    if (head->kind == ExprKind::Var && starts_atom()) {
      ExprPtr call = mk(ExprKind::Call, head_tok);
      call->name = head->name;
      while (starts_atom()) call->kids.push_back(atom());
      return call;
    }
    return head;
  }

  ExprPtr atom() {
    Token at = cur_;
    switch (cur_.kind) {
      case Tok::Int: {
        bump();
        ExprPtr e = mk(ExprKind::IntLit, at);
        e->int_val = at.int_val;
        return e;
      }
      case Tok::True:
      case Tok::False: {
        bool v = cur_.kind == Tok::True;
        bump();
        ExprPtr e = mk(ExprKind::BoolLit, at);
        e->int_val = v ? 1 : 0;
        return e;
      }
      case Tok::Unit: {
        bump();
        return mk(ExprKind::UnitLit, at);
      }
      case Tok::Ident: {
        std::string n = cur_.text;
        bump();
        ExprPtr e = mk(ExprKind::Var, at);
        e->name = n;
        return e;
      }
      case Tok::LParen: {
        bump();
        ExprPtr e = expr();
        expect(Tok::RParen, "expected ')'");
        return e;
      }
      default:
        fail("expected an expression");
    }
  }

  Lexer lex_;
  Token cur_;
};

// Resolves variables to frame slots and calls to function-table indices.
// Top-level `let rec` definitions become the program's functions; a
// function is visible in its own body and in everything after it.
class Binder {
 public:
  BoundProgram bind(Ast ast) {
    BoundProgram out;
    out.ast = std::move(ast);
    Expr* e = out.ast.root.get();
    // Walk the top-level let rec chain.
    while (e->kind == ExprKind::LetRec) {
      if (fn_index(out, e->name) >= 0)
        throw ParseError(e->line, e->col, "duplicate function '" + e->name + "'");
      e->fn_index = (int)out.functions.size();
      out.functions.push_back(FnDef{e->name, (int)e->params.size(), e->kids[0].get()});
      e = e->kids[1].get();
    }
    out.main = e;
    for (size_t i = 0; i < out.functions.size(); ++i) {
      auto& f = out.functions[i];
      Scope sc;
      const Expr* def = find_def(out.ast.root.get(), f.name);
      for (const auto& p : def->params) sc.push(p);
      bind_expr(out, const_cast<Expr*>(f.body), sc, (int)i + 1);
    }
    Scope sc;
    bind_expr(out, const_cast<Expr*>(out.main), sc, (int)out.functions.size());
    return out;
  }

 private:
  struct Scope {
    std::vector<std::string> names;
    void push(const std::string& n) { names.push_back(n); }
    void pop() { names.pop_back(); }
    int lookup(const std::string& n) const {
      for (int i = (int)names.size() - 1; i >= 0; --i)
        if (names[i] == n) return i;
      return -1;
    }
  };

  static int fn_index(const BoundProgram& p, const std::string& name) {
    for (size_t i = 0; i < p.functions.size(); ++i)
      if (p.functions[i].name == name) return (int)i;
    return -1;
  }

  static const Expr* find_def(const Expr* root, const std::string& name) {
    const Expr* e = root;
    while (e->kind == ExprKind::LetRec) {
      if (e->name == name) return e;
      e = e->kids[1].get();
    }
    return nullptr;
  }

  // visible_fns: functions with index < visible_fns are in scope (a
  // function sees itself and everything defined before it).
  void bind_expr(BoundProgram& p, Expr* e, Scope& sc, int visible_fns) {
    switch (e->kind) {
      case ExprKind::IntLit:
      case ExprKind::BoolLit:
      case ExprKind::UnitLit:
        return;
      case ExprKind::Var: {
        int s = sc.lookup(e->name);
        if (s < 0) {
          if (fn_index(p, e->name) >= 0)
            throw ParseError(e->line, e->col,
                             "function '" + e->name + "' used as a value");
          throw ParseError(e->line, e->col, "unbound variable '" + e->name + "'");
        }
        e->slot = s;
        return;
      }
      case ExprKind::BinOp:
        bind_expr(p, e->kids[0].get(), sc, visible_fns);
        bind_expr(p, e->kids[1].get(), sc, visible_fns);
        return;
      case ExprKind::If:
        for (auto& k : e->kids) bind_expr(p, k.get(), sc, visible_fns);
        return;
      case ExprKind::Let:
        bind_expr(p, e->kids[0].get(), sc, visible_fns);
        e->slot = (int)sc.names.size();
        sc.push(e->name);
        bind_expr(p, e->kids[1].get(), sc, visible_fns);
        sc.pop();
        return;
      case ExprKind::LetRec:
        throw ParseError(e->line, e->col,
                         "function definitions are only allowed at the top level");
      case ExprKind::Call: {
        int fi = fn_index(p, e->name);
        if (fi < 0 || fi >= visible_fns) {
          if (sc.lookup(e->name) >= 0)
            throw ParseError(e->line, e->col,
                             "'" + e->name + "' is a variable, not a function");
          throw ParseError(e->line, e->col, "unbound function '" + e->name + "'");
        }
        if ((int)e->kids.size() != p.functions[fi].arity)
          throw ParseError(e->line, e->col,
                           "wrong number of arguments to '" + e->name + "' (expected " +
                               std::to_string(p.functions[fi].arity) + ", got " +
                               std::to_string(e->kids.size()) + ")");
        e->fn_index = fi;
        for (auto& k : e->kids) bind_expr(p, k.get(), sc, visible_fns);
        return;
      }
      case ExprKind::PrintInt:
        bind_expr(p, e->kids[0].get(), sc, visible_fns);
        return;
      case ExprKind::Seq:
        bind_expr(p, e->kids[0].get(), sc, visible_fns);
        bind_expr(p, e->kids[1].get(), sc, visible_fns);
        return;
    }
  }
};

}  // namespace detail

// Parses and binds a source program. Raises ParseError (with position) on
// syntax errors and on unbound names.
inline BoundProgram parse(const std::string& source) {
  detail::Parser p(source);
  Ast ast{p.parse_program()};
  return detail::Binder().bind(std::move(ast));
}

}  // namespace hotpath::mml
