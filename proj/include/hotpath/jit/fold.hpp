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

#include <map>

#include "hotpath/host/exec.hpp"
#include "hotpath/jit/ir.hpp"

namespace hotpath::jit {

// Canonicalizing constant-fold pass over a unit. Tracing already folds
// green operations; this pass re-verifies the result and cleans up what
// the recorder left behind: operations whose operands all became
// constants, statically-true guards, and identity arithmetic. Memory
// operations are never removed. Constant knowledge is tracked per block
// and dropped at block boundaries.
inline CompiledUnit fold_constants(const CompiledUnit& in) {
  CompiledUnit u = in;
  for (auto& blk : u.blocks) {
    std::map<int32_t, Slot> known;
    std::vector<TraceOp> out;
    out.reserve(blk.ops.size());
    auto value_of = [&](int32_t r) -> const Slot* {
      auto it = known.find(r);
      return it == known.end() ? nullptr : &it->second;
    };
    for (TraceOp op : blk.ops) {
      switch (op.op) {
        case TOp::Const:
          known[op.dst] = op.imm;
          out.push_back(op);
          continue;
        case TOp::Move:
          if (const Slot* v = value_of(op.a)) {
            known[op.dst] = *v;
            out.push_back(TraceOp{TOp::Const, Space::Stack, false, true, false,
                                  op.dst, -1, -1, 0, -1, *v});
          } else {
            known.erase(op.dst);
            out.push_back(op);
          }
          continue;
        case TOp::Add: case TOp::Sub: case TOp::Mul:
        case TOp::CmpLe: case TOp::CmpLt: case TOp::CmpEq: {
          const Slot* va = value_of(op.a);
          const Slot* vb = op.b_is_imm ? &op.imm : value_of(op.b);
          if (va && vb) {
            static constexpr host::HOp kMap[] = {
                host::HOp::IAdd, host::HOp::ISub, host::HOp::IMul,
                host::HOp::ICmpLe, host::HOp::ICmpLt, host::HOp::ICmpEq};
            bool folded = false;
            try {
              Slot r = host::host_binop(kMap[(int)op.op - (int)TOp::Add], *va, *vb);
              known[op.dst] = r;
              out.push_back(TraceOp{TOp::Const, Space::Stack, false, true, false,
                                    op.dst, -1, -1, 0, -1, r});
              folded = true;
            } catch (const VmError&) {
              // Would trap at run time; keep the op so it still does.
            }
            if (folded) continue;
          }
          // Identity forms: x+0, x-0, x*1 become moves.
          if (vb) {
            int64_t k = vb->v;
            bool is_int = vb->is_int();
            if (is_int &&
                ((op.op == TOp::Add && k == 0) || (op.op == TOp::Sub && k == 0) ||
                 (op.op == TOp::Mul && k == 1))) {
              known.erase(op.dst);
              out.push_back(TraceOp{TOp::Move, Space::Stack, false, true, false,
                                    op.dst, op.a, -1, 0, -1, Slot{}});
              continue;
            }
          }
          known.erase(op.dst);
          out.push_back(op);
          continue;
        }
        case TOp::StackLoad:
          known.erase(op.dst);
          out.push_back(op);
          continue;
        case TOp::StackStore:
          if (!op.b_is_imm) {
            if (const Slot* v = value_of(op.b)) {
              op.b_is_imm = true;
              op.imm = *v;
              op.b = -1;
            }
          }
          out.push_back(op);
          continue;
        case TOp::PushFlag:
          out.push_back(op);
          continue;
        case TOp::Guard: {
          const Slot* v = value_of(op.a);
          if (v) {
            bool holds = op.is_eq ? (*v == op.imm) : ((v->v != 0) == op.expect);
            if (holds) continue;  // statically true: drop
          }
          out.push_back(op);
          continue;
        }
        case TOp::Call:
          // A unit boundary: the callee can touch the stack arbitrarily,
          // but register knowledge survives (registers are private).
          if (op.aux >= 0 && u.calls[op.aux].dst >= 0) known.erase(u.calls[op.aux].dst);
          out.push_back(op);
          continue;
      }
    }
    blk.ops = std::move(out);
  }
  verify_unit(u);
  return u;
}

}  // namespace hotpath::jit
