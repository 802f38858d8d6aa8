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
#include <stdexcept>
#include <string>

namespace hotpath {

// Runtime values are tagged 64-bit slots. The tag is what lets the
// call/return protocol distinguish data from control bookkeeping on the
// user stack, and it is what makes the flag-balance checks mechanical.
enum class SlotKind : uint8_t {
  Int,      // plain integer (booleans are 0/1, unit is 0)
  RetAddr,  // bytecode return address pushed by a user-stack call
  FlagUs,   // "caller used the user-stack protocol"
  FlagHs,   // "caller used the host-stack protocol"
  Array,    // handle into the execution context's array table
};

struct Slot {
  int64_t v = 0;
  SlotKind kind = SlotKind::Int;

  bool is_int() const { return kind == SlotKind::Int; }
  bool is_flag() const { return kind == SlotKind::FlagUs || kind == SlotKind::FlagHs; }

  friend bool operator==(const Slot& a, const Slot& b) {
    return a.kind == b.kind && a.v == b.v;
  }
};

inline Slot int_slot(int64_t v) { return Slot{v, SlotKind::Int}; }
inline Slot ret_slot(int64_t pc) { return Slot{pc, SlotKind::RetAddr}; }
inline Slot flag_us() { return Slot{0, SlotKind::FlagUs}; }
inline Slot flag_hs() { return Slot{0, SlotKind::FlagHs}; }
inline Slot array_slot(int64_t id) { return Slot{id, SlotKind::Array}; }

inline const char* slot_kind_name(SlotKind k) {
  switch (k) {
    case SlotKind::Int: return "int";
    case SlotKind::RetAddr: return "ret";
    case SlotKind::FlagUs: return "US";
    case SlotKind::FlagHs: return "HS";
    case SlotKind::Array: return "arr";
  }
  return "?";
}

inline std::string slot_str(const Slot& s) {
  switch (s.kind) {
    case SlotKind::Int: return std::to_string(s.v);
    case SlotKind::RetAddr: return "ret@" + std::to_string(s.v);
    case SlotKind::FlagUs: return "US";
    case SlotKind::FlagHs: return "HS";
    case SlotKind::Array: return "arr#" + std::to_string(s.v);
  }
  return "?";
}

// Base-language arithmetic wraps (two's complement), so every execution
// path agrees on overflow behaviour.
inline int64_t wrap_add(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) + static_cast<uint64_t>(b));
}
inline int64_t wrap_sub(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) - static_cast<uint64_t>(b));
}
inline int64_t wrap_mul(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) * static_cast<uint64_t>(b));
}

// Errors in the base program's source.
struct ParseError : std::runtime_error {
  int line, col;
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + msg),
        line(line), col(col) {}
};

struct CompileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Errors raised by the execution machinery. Kind distinguishes resource
// limits (expected, e.g. recursion depth) from invariant violations that
// indicate a bug in the interpreter definition or a compiled unit.
struct VmError : std::runtime_error {
  enum class Kind {
    StackUnderflow,
    StackOverflow,
    BadPc,
    KindMismatch,
    FlagMismatch,
    RecursionLimit,
    BadSnapshot,
    CompilerBug,
  };
  Kind kind;
  VmError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind(kind) {}
};

}  // namespace hotpath
