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
#include <sstream>
#include <string>

#include "hotpath/slot.hpp"

namespace hotpath::rt {

enum class Mode { InterpOnly, TraceOnly, MethodOnly, Hybrid };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::InterpOnly: return "interp";
    case Mode::TraceOnly: return "trace";
    case Mode::MethodOnly: return "method";
    case Mode::Hybrid: return "hybrid";
  }
  return "?";
}

inline Mode mode_from_name(const std::string& s) {
  if (s == "interp" || s == "interp-only") return Mode::InterpOnly;
  if (s == "trace" || s == "trace-only") return Mode::TraceOnly;
  if (s == "method" || s == "method-only") return Mode::MethodOnly;
  if (s == "hybrid") return Mode::Hybrid;
  throw CompileError("unknown mode '" + s + "'");
}

// Per-function strategy assignment for hybrid runs. Functions not listed
// default to the trace strategy (the primary compiler).
struct StrategyPolicy {
  Mode mode = Mode::InterpOnly;
  std::map<std::string, std::string> overrides;  // name -> "trace" | "method"
};

// Line-oriented strategy file: `function-name = trace|method`, '#' starts
// a comment.
inline std::map<std::string, std::string> parse_strategy_file(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string name, eq, strat;
    if (!(ls >> name)) continue;
    if (!(ls >> eq >> strat) || eq != "=" || (strat != "trace" && strat != "method"))
      throw ParseError(lineno, 1, "expected 'name = trace|method'");
    out[name] = strat;
  }
  return out;
}

}  // namespace hotpath::rt
