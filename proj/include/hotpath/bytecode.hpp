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

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hotpath/slot.hpp"

namespace hotpath {

// Stack-machine ISA. One instruction per program-counter step; operands
// are embedded in the instruction, so jump/call targets are instruction
// indices.
enum class Opcode : uint8_t {
  CONST,    // push a
  LOAD,     // push stack[sp-1-a]           (a = depth below the top)
  STORE,    // v = pop; stack[sp-1-a] = v   (a = depth after the pop)
  ADD, SUB, MUL,
  LT, LE, EQ,
  JUMP,     // pc = a
  JUMP_IF,  // v = pop; if v == 0 then pc = a else fall through
  CALL,     // a = callee entry, b = arity
  RETURN,
  POP,
  DUP,
  PRINT,    // v = pop; append v to the output stream
  HALT,
};

inline const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::CONST: return "CONST";
    case Opcode::LOAD: return "LOAD";
    case Opcode::STORE: return "STORE";
    case Opcode::ADD: return "ADD";
    case Opcode::SUB: return "SUB";
    case Opcode::MUL: return "MUL";
    case Opcode::LT: return "LT";
    case Opcode::LE: return "LE";
    case Opcode::EQ: return "EQ";
    case Opcode::JUMP: return "JUMP";
    case Opcode::JUMP_IF: return "JUMP_IF";
    case Opcode::CALL: return "CALL";
    case Opcode::RETURN: return "RETURN";
    case Opcode::POP: return "POP";
    case Opcode::DUP: return "DUP";
    case Opcode::PRINT: return "PRINT";
    case Opcode::HALT: return "HALT";
  }
  return "?";
}

// Number of meaningful operands for the textual form.
inline int opcode_operands(Opcode op) {
  switch (op) {
    case Opcode::CONST:
    case Opcode::LOAD:
    case Opcode::STORE:
    case Opcode::JUMP:
    case Opcode::JUMP_IF:
      return 1;
    case Opcode::CALL:
      return 2;
    default:
      return 0;
  }
}

struct Instruction {
  Opcode op = Opcode::HALT;
  int64_t a = 0;
  int64_t b = 0;

  friend bool operator==(const Instruction& x, const Instruction& y) {
    return x.op == y.op && x.a == y.a && x.b == y.b;
  }
};

struct FunctionEntry {
  std::string name;
  int64_t entry = 0;
  int64_t arity = 0;

  friend bool operator==(const FunctionEntry& x, const FunctionEntry& y) {
    return x.name == y.name && x.entry == y.entry && x.arity == y.arity;
  }
};

struct BytecodeProgram {
  std::vector<Instruction> code;
  std::vector<FunctionEntry> functions;  // includes the top-level "main" entry
  int64_t entry = 0;

  const FunctionEntry* function_at(int64_t pc) const {
    for (const auto& f : functions)
      if (f.entry == pc) return &f;
    return nullptr;
  }
  int function_index_at(int64_t pc) const {
    for (size_t i = 0; i < functions.size(); ++i)
      if (functions[i].entry == pc) return static_cast<int>(i);
    return -1;
  }
  const FunctionEntry* function_named(const std::string& name) const {
    for (const auto& f : functions)
      if (f.name == name) return &f;
    return nullptr;
  }

  friend bool operator==(const BytecodeProgram& x, const BytecodeProgram& y) {
    return x.code == y.code && x.functions == y.functions && x.entry == y.entry;
  }
};

// Checks the static invariants: operand targets in range, call targets are
// function entries with matching arity.
inline void verify_targets(const BytecodeProgram& p) {
  auto in_range = [&](int64_t t) { return t >= 0 && t < (int64_t)p.code.size(); };
  for (size_t pc = 0; pc < p.code.size(); ++pc) {
    const auto& ins = p.code[pc];
    switch (ins.op) {
      case Opcode::JUMP:
      case Opcode::JUMP_IF:
        if (!in_range(ins.a))
          throw CompileError("jump target out of range at " + std::to_string(pc));
        break;
      case Opcode::CALL: {
        if (!in_range(ins.a))
          throw CompileError("call target out of range at " + std::to_string(pc));
        const FunctionEntry* f = p.function_at(ins.a);
        if (!f)
          throw CompileError("call target is not a function entry at " + std::to_string(pc));
        if (f->arity != ins.b)
          throw CompileError("arity mismatch calling " + f->name + " at " + std::to_string(pc));
        break;
      }
      default:
        break;
    }
  }
  if (!p.code.empty() && !(p.entry >= 0 && p.entry < (int64_t)p.code.size()))
    throw CompileError("entry point out of range");
}

// Textual listing, one instruction per line. Directive lines carry the
// entry point and function table so a listing round-trips exactly; they
// are omitted for plain instruction sequences.
inline std::string disassemble(const BytecodeProgram& p) {
  std::ostringstream os;
  if (p.entry != 0)
    os << ".entry " << p.entry << "\n";
  for (const auto& f : p.functions)
    os << ".func " << f.name << " " << f.entry << " " << f.arity << "\n";
  for (size_t pc = 0; pc < p.code.size(); ++pc) {
    const auto& ins = p.code[pc];
    os << pc << ": " << opcode_name(ins.op);
    int n = opcode_operands(ins.op);
    if (n >= 1) os << " " << ins.a;
    if (n >= 2) os << " " << ins.b;
    if (pc + 1 != p.code.size()) os << "\n";
  }
  if (!p.code.empty()) os << "\n";
  return os.str();
}

inline std::optional<Opcode> opcode_from_name(const std::string& s) {
  for (int i = 0; i <= (int)Opcode::HALT; ++i)
    if (s == opcode_name((Opcode)i)) return (Opcode)i;
  return std::nullopt;
}

// Parses the disassemble format back into a program.
inline BytecodeProgram assemble(const std::string& text) {
  BytecodeProgram p;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == ".entry") {
      if (!(ls >> p.entry)) throw ParseError(lineno, 1, "malformed .entry");
      continue;
    }
    if (tok == ".func") {
      FunctionEntry f;
      if (!(ls >> f.name >> f.entry >> f.arity))
        throw ParseError(lineno, 1, "malformed .func");
      p.functions.push_back(f);
      continue;
    }
    // "addr: MNEMONIC [a [b]]"
    if (tok.empty() || tok.back() != ':')
      throw ParseError(lineno, 1, "expected address label");
    int64_t addr = 0;
    try {
      addr = std::stoll(tok.substr(0, tok.size() - 1));
    } catch (...) {
      throw ParseError(lineno, 1, "bad address label");
    }
    if (addr != (int64_t)p.code.size())
      throw ParseError(lineno, 1, "non-contiguous address " + std::to_string(addr));
    std::string mnem;
    if (!(ls >> mnem)) throw ParseError(lineno, 1, "missing mnemonic");
    auto op = opcode_from_name(mnem);
    if (!op) throw ParseError(lineno, 1, "unknown mnemonic " + mnem);
    Instruction ins;
    ins.op = *op;
    int n = opcode_operands(*op);
    if (n >= 1 && !(ls >> ins.a)) throw ParseError(lineno, 1, "missing operand");
    if (n >= 2 && !(ls >> ins.b)) throw ParseError(lineno, 1, "missing operand");
    p.code.push_back(ins);
  }
  return p;
}

}  // namespace hotpath
