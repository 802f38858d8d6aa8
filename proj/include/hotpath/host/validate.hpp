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

#include <set>
#include <string>
#include <vector>

#include "hotpath/host/ir.hpp"

namespace hotpath::host {

// Static checks on an interpreter definition. Returns diagnostics; empty
// means the definition is annotated the way the JIT machinery expects:
//  - exactly one JitMergePoint, at the head of the dispatch loop
//  - green/red hint lists disjoint, naming live registers
//  - CanEnterJit on the handlers that perform backward pc transfers
//  - IsMj confined to the CALL handler
inline std::vector<std::string> validate_interpreter(const HostProgram& hp) {
  std::vector<std::string> diags;
  if (hp.dispatch_fn < 0 || hp.dispatch_fn >= (int)hp.functions.size()) {
    diags.push_back("no dispatch function designated");
    return diags;
  }
  const HostFunction& f = hp.functions[hp.dispatch_fn];

  int merge_points = 0;
  int32_t merge_at = -1;
  for (size_t i = 0; i < f.code.size(); ++i) {
    if (f.code[i].op == HOp::JitMergePoint) {
      ++merge_points;
      merge_at = (int32_t)i;
    }
  }
  if (merge_points == 0) diags.push_back("no merge point on dispatch loop");
  if (merge_points > 1) diags.push_back("multiple merge points in dispatch function");
  if (merge_points == 1) {
    const BlockInfo* blk = f.block_of(merge_at);
    if (!blk || blk->label != "dispatch" || blk->begin != merge_at)
      diags.push_back("merge point is not at the dispatch loop head");
  }

  std::set<int32_t> greens(f.greens.begin(), f.greens.end());
  std::set<int32_t> reds(f.reds.begin(), f.reds.end());
  for (int32_t g : greens)
    if (reds.count(g))
      diags.push_back("color conflict: register '" + f.reg_names[g] +
                      "' listed both green and red");
  std::set<int32_t> used;
  for (const auto& I : f.code) {
    if (I.a >= 0) used.insert(I.a);
    if (!I.b_is_imm && I.b >= 0 &&
        (I.op == HOp::IAdd || I.op == HOp::ISub || I.op == HOp::IMul ||
         I.op == HOp::ICmpLe || I.op == HOp::ICmpLt || I.op == HOp::ICmpEq ||
         I.op == HOp::ArrayRead || I.op == HOp::ArrayWrite))
      used.insert(I.b);
    if (I.op == HOp::ArrayWrite && I.c >= 0) used.insert(I.c);
    if (I.op == HOp::Call)
      for (int32_t r : f.arg_tables[I.c]) used.insert(r);
  }
  for (int32_t r : greens)
    if (!used.count(r))
      diags.push_back("green register '" + f.reg_names[r] + "' is never used");
  for (int32_t r : reds)
    if (!used.count(r))
      diags.push_back("red register '" + f.reg_names[r] + "' is never used");
  if (greens.empty()) diags.push_back("merge point lists no green registers");

  auto label_has = [&](const std::string& prefix, HOp op) {
    for (const auto& b : f.blocks) {
      if (b.label.rfind(prefix, 0) != 0) continue;
      for (int32_t i = b.begin; i < b.end; ++i)
        if (f.code[i].op == op) return true;
    }
    return false;
  };

  // IsMj belongs to the CALL handler and nowhere else.
  for (const auto& b : f.blocks) {
    for (int32_t i = b.begin; i < b.end; ++i) {
      if (f.code[i].op == HOp::IsMj && b.label.rfind("h_call", 0) != 0)
        diags.push_back("is_mj outside the CALL handler (in block '" + b.label + "')");
    }
  }

  // Backward pc transfers happen in JUMP, JUMP_IF, CALL (user-stack arm)
  // and RETURN (user-stack arm); each must announce a trace head.
  for (const char* h : {"jump", "jif", "call", "ret"}) {
    if (!label_has(std::string(h) + "_cej", HOp::CanEnterJit))
      diags.push_back(std::string("no can_enter_jit on the backward transfer of the ") +
                      h + " handler");
  }

  return diags;
}

}  // namespace hotpath::host
