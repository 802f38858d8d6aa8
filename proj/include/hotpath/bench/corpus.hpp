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
#include <utility>
#include <vector>

namespace hotpath::bench {

// Per-function strategy assignment used when a program runs in hybrid
// mode and no strategy file overrides it. Functions not listed default
// to the trace strategy.
struct CorpusProgram {
  std::string name;
  std::string source;
  std::vector<std::pair<std::string, std::string>> hybrid_assignment;
  // True for the benchmarks with straight-line control flow (the trace
  // strategy's home turf); false for the path-divergent ones.
  bool straight_control_flow = true;
};

// The built-in benchmark corpus. Workload sizes are desk scale: each
// program finishes an interpreter-only run in seconds, and recursion
// depths stay below the host-stack recursion limit in every mode. The
// loop bound lives in the final line of each source.
inline const std::vector<CorpusProgram>& corpus() {
  static const std::vector<CorpusProgram> programs = {
      // Straight control flow -------------------------------------------------
      {"fib-tail",
       "let rec fibt a b n =\n"
       "  if n <= 0 then a else\n"
       "    fibt b (a+b) (n-1) in\n"
       "print_int (fibt 1 1 6000)\n",
       {}},
      {"sum",
       "let rec sum n =\n"
       "  if n <= 1 then 1 else\n"
       "    n + sum (n-1) in\n"
       "print_int (sum 4000)\n",
       {}},
      {"sum-tail",
       "let rec sum acc n =\n"
       "  if n <= 1 then acc else\n"
       "    sum (acc+n) (n-1) in\n"
       "print_int (sum 0 8000)\n",
       {}},
      {"square",
       "let rec sq n =\n"
       "  if n <= 0 then 0 else\n"
       "    n * n + sq (n-1) in\n"
       "print_int (sq 2500)\n",
       {}},
      {"square-tail",
       "let rec sq acc n =\n"
       "  if n <= 0 then acc else\n"
       "    sq (acc + n * n) (n-1) in\n"
       "print_int (sq 0 6000)\n",
       {}},
      {"fact",
       "let rec fact n =\n"
       "  if n <= 1 then 1 else\n"
       "    n * fact (n-1) in\n"
       "let rec go i acc =\n"
       "  if i <= 0 then acc else\n"
       "    go (i-1) (acc + fact 18) in\n"
       "print_int (go 600 0)\n",
       {}},
      {"ary",
       "let rec ary i acc =\n"
       "  if i <= 0 then acc else\n"
       "    ary (i-1) (acc + i * 7 + 3) in\n"
       "print_int (ary 8000 0)\n",
       {}},
      {"prefix_sum",
       "let rec pre i run acc =\n"
       "  if i <= 0 then acc else\n"
       "    pre (i-1) (run + i) (acc + run + i) in\n"
       "print_int (pre 6000 0 0)\n",
       {}},
      // Complex control flow --------------------------------------------------
      {"fib",
       "let rec fib n =\n"
       "  if n <= 1 then 1 else\n"
       "    fib (n-1) + fib (n-2) in\n"
       "print_int (fib 21)\n",
       {{"fib", "method"}},
       false},
      {"ack",
       "let rec ack m n =\n"
       "  if m = 0 then n + 1 else\n"
       "  if n = 0 then ack (m-1) 1 else\n"
       "    ack (m-1) (ack m (n-1)) in\n"
       "print_int (ack 3 4)\n",
       {{"ack", "method"}},
       false},
      {"tak",
       "let rec tak x y z =\n"
       "  if x <= y then z else\n"
       "    tak (tak (x-1) y z)\n"
       "        (tak (y-1) z x)\n"
       "        (tak (z-1) x y) in\n"
       "print_int (tak 14 7 3)\n",
       {{"tak", "method"}},
       false},
      {"sieve",
       "let rec mod2 a b =\n"
       "  if a < b then a else\n"
       "    mod2 (a - b) b in\n"
       "let rec divs n d =\n"
       "  if n < d * d then 1 else\n"
       "  if mod2 n d = 0 then 0 else\n"
       "    divs n (d + 1) in\n"
       "let rec count i n acc =\n"
       "  if n < i then acc else\n"
       "    count (i + 1) n (acc + divs i 2) in\n"
       "print_int (count 2 400 0)\n",
       {{"divs", "method"}},
       false},
      // Hybrid experiment programs -------------------------------------------
      {"sum-fib",
       "let rec fib n =\n"
       "  if n <= 1 then 1 else\n"
       "    fib (n-1) + fib (n-2) in\n"
       "\n"
       "let rec sum i n =\n"
       "  if i <= 1 then n else\n"
       "  let m = fib 10 in\n"
       "    sum (i-1) (n+m) in\n"
       "\n"
       "print_int (sum 1000 0)\n",
       {{"sum", "trace"}, {"fib", "method"}},
       false},
      {"fib-sum",
       "let rec sum acc n =\n"
       "  if n <= 1 then acc else\n"
       "    sum (acc+n) (n-1) in\n"
       "\n"
       "let rec fib n =\n"
       "  if n <= 2  then sum 0 1000\n"
       "  else\n"
       "    fib (n-1) + fib (n-2) in\n"
       "\n"
       "print_int (fib 20)\n",
       {{"sum", "trace"}, {"fib", "method"}},
       false},
      {"sum-tak",
       "let rec tak x y z =\n"
       "  if x <= y then z else\n"
       "    tak (tak (x-1) y z)\n"
       "        (tak (y-1) z x)\n"
       "        (tak (z-1) x y) in\n"
       "\n"
       "let rec sum i n =\n"
       "  if i <= 1 then n else\n"
       "  let m = tak 12 6 4 in\n"
       "    sum (i-1) (n + m) in\n"
       "\n"
       "print_int (sum 100 0)\n",
       {{"sum", "trace"}, {"tak", "method"}},
       false},
      {"tak-sum",
       "let rec sum i n =\n"
       "  if i <= 1 then n else\n"
       "    sum (i-1) (n+i) in\n"
       "\n"
       "let rec tak x y z =\n"
       "  if x <= y then sum 1000 0\n"
       "  else\n"
       "    tak (tak (x-1) y z)\n"
       "        (tak (y-1) z x)\n"
       "        (tak (z-1) x y) in\n"
       "\n"
       "print_int (tak 8 4 2)\n",
       {{"sum", "trace"}, {"tak", "method"}},
       false},
  };
  return programs;
}

inline const CorpusProgram* corpus_find(const std::string& name) {
  for (const auto& p : corpus())
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace hotpath::bench
