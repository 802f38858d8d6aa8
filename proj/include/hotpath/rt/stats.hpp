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
#include <sstream>
#include <string>

namespace hotpath::rt {

struct RunStats {
  uint64_t interpreted_steps = 0;
  uint64_t trace_ops = 0;
  uint64_t guard_fails = 0;
  uint64_t guards_executed = 0;
  uint64_t compiles = 0;
  uint64_t compiles_trace = 0;
  uint64_t compiles_method = 0;
  uint64_t compile_aborts = 0;
  uint64_t blacklists = 0;
  uint64_t unit_entries = 0;
  uint64_t base_calls = 0;
  uint64_t flag_pushes = 0;
  uint64_t flag_pops = 0;
  uint64_t registry_lookups = 0;
  uint64_t deopts_forced = 0;

  void add(const RunStats& o) {
    interpreted_steps += o.interpreted_steps;
    trace_ops += o.trace_ops;
    guard_fails += o.guard_fails;
    guards_executed += o.guards_executed;
    compiles += o.compiles;
    compiles_trace += o.compiles_trace;
    compiles_method += o.compiles_method;
    compile_aborts += o.compile_aborts;
    blacklists += o.blacklists;
    unit_entries += o.unit_entries;
    base_calls += o.base_calls;
    flag_pushes += o.flag_pushes;
    flag_pops += o.flag_pops;
    registry_lookups += o.registry_lookups;
    deopts_forced += o.deopts_forced;
  }

  std::string key_value_lines() const {
    std::ostringstream os;
    os << "interpreted_steps=" << interpreted_steps << "\n"
       << "trace_ops=" << trace_ops << "\n"
       << "guard_fails=" << guard_fails << "\n"
       << "compiles=" << compiles << "\n"
       << "blacklists=" << blacklists << "\n"
       << "guards_executed=" << guards_executed << "\n"
       << "compiles_trace=" << compiles_trace << "\n"
       << "compiles_method=" << compiles_method << "\n"
       << "compile_aborts=" << compile_aborts << "\n"
       << "unit_entries=" << unit_entries << "\n"
       << "base_calls=" << base_calls << "\n"
       << "flag_pushes=" << flag_pushes << "\n"
       << "flag_pops=" << flag_pops << "\n"
       << "registry_lookups=" << registry_lookups << "\n";
    return os.str();
  }
};

}  // namespace hotpath::rt
