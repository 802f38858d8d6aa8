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

#include <chrono>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hotpath/bench/corpus.hpp"
#include "hotpath/mml/compile.hpp"
#include "hotpath/mml/parse.hpp"
#include "hotpath/mml/reference.hpp"
#include "hotpath/rt/engine.hpp"

namespace hotpath::bench {

struct BenchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BenchmarkSpec {
  std::string program;  // display name
  std::string source;   // program text (.mml)
  std::optional<BytecodeProgram> bytecode;  // pre-assembled form (.mba)
  rt::Mode mode = rt::Mode::InterpOnly;
  std::map<std::string, std::string> strategy;  // hybrid assignment
  int64_t iterations = 150;
  int64_t discard = 50;   // warm-up runs excluded from statistics
  int64_t threshold = 100;
  bool persist_jit = true;
  jit::ForceGuardFail force{};
};

struct BenchmarkResult {
  std::vector<int64_t> times_ns;  // all iterations, in order
  int64_t retained = 0;           // iterations - discard
  double mean_ns = 0;
  double stddev_ns = 0;
  rt::RunStats counters;          // cumulative over the whole run
  uint64_t output_hash = 0;
  std::vector<int64_t> output;
};

inline uint64_t output_hash(const std::vector<int64_t>& out) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  auto mix = [&](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(out.size());
  for (int64_t v : out) mix((uint64_t)v);
  return h;
}

inline rt::EngineConfig engine_config_for(const BenchmarkSpec& spec) {
  rt::EngineConfig cfg;
  cfg.mode = spec.mode;
  cfg.threshold = spec.threshold;
  cfg.hybrid_overrides = spec.strategy;
  cfg.force = spec.force;
  return cfg;
}

// Runs the paper-shaped protocol: `iterations` timed executions, the first
// `discard` excluded as warm-up, statistics over the rest. Correctness
// outranks timing: any output differing from the reference interpreter, or
// varying across iterations, is a hard failure.
inline BenchmarkResult run_benchmark(const BenchmarkSpec& spec) {
  if (spec.iterations < 1) throw BenchError("iterations must be at least 1");
  if (spec.discard < 0 || spec.discard >= spec.iterations)
    throw BenchError("discard must be smaller than iterations");
  if (spec.threshold < 1) throw BenchError("threshold must be at least 1");

  // The reference interpreter is the ground truth for source programs;
  // pre-assembled bytecode has no AST, so interpreter-only execution
  // anchors the cross-mode comparison instead.
  BytecodeProgram bc;
  std::vector<int64_t> expected;
  if (spec.bytecode) {
    bc = *spec.bytecode;
    rt::EngineConfig icfg;
    icfg.mode = rt::Mode::InterpOnly;
    expected = rt::Engine(bc, icfg).run();
  } else {
    auto bound = mml::parse(spec.source);
    expected = mml::run_reference(bound);
    bc = mml::compile(bound);
  }

  BenchmarkResult res;
  res.output = expected;
  res.output_hash = output_hash(expected);

  rt::Engine engine(bc, engine_config_for(spec));
  for (int64_t i = 0; i < spec.iterations; ++i) {
    if (!spec.persist_jit && i > 0) {
      // Cold protocol: units and counters reset, so accumulate counters
      // here before they are wiped.
      res.counters.add(engine.stats());
      engine.reset_jit();
    }
    auto t0 = std::chrono::steady_clock::now();
    std::vector<int64_t> out = engine.run();
    auto t1 = std::chrono::steady_clock::now();
    res.times_ns.push_back(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    if (out != expected)
      throw BenchError("output diverged from the reference on iteration " +
                       std::to_string(i) + " of " + spec.program + " (" +
                       rt::mode_name(spec.mode) + ")");
  }
  res.counters.add(engine.stats());

  res.retained = spec.iterations - spec.discard;
  double sum = 0;
  for (int64_t i = spec.discard; i < spec.iterations; ++i) sum += (double)res.times_ns[i];
  res.mean_ns = sum / (double)res.retained;
  double var = 0;
  for (int64_t i = spec.discard; i < spec.iterations; ++i) {
    double d = (double)res.times_ns[i] - res.mean_ns;
    var += d * d;
  }
  res.stddev_ns = res.retained > 1 ? std::sqrt(var / (double)(res.retained - 1)) : 0.0;
  return res;
}

struct ModeRow {
  std::string program;
  rt::Mode mode;
  BenchmarkResult result;
  double ratio_vs_interp = 0;  // speedup relative to interpreter-only
};

inline const char* kCsvHeader =
    "program,mode,mean_ns,stddev_ns,ratio_vs_interp,guard_fails,compiles,"
    "interpreted_steps,trace_ops";

inline std::string csv_row(const ModeRow& r) {
  std::ostringstream os;
  os << r.program << "," << rt::mode_name(r.mode) << "," << std::fixed
     << std::setprecision(1) << r.result.mean_ns << "," << r.result.stddev_ns << ","
     << std::setprecision(4) << r.ratio_vs_interp << "," << r.result.counters.guard_fails
     << "," << r.result.counters.compiles << "," << r.result.counters.interpreted_steps
     << "," << r.result.counters.trace_ops;
  return os.str();
}

// Runs the requested modes and tabulates speedups relative to the
// interpreter-only execution. Output hashes must agree across modes.
inline std::vector<ModeRow> compare_modes(const BenchmarkSpec& base,
                                          const std::vector<rt::Mode>& modes) {
  std::vector<ModeRow> rows;
  for (rt::Mode m : modes) {
    BenchmarkSpec spec = base;
    spec.mode = m;
    ModeRow row;
    row.program = base.program;
    row.mode = m;
    row.result = run_benchmark(spec);
    rows.push_back(std::move(row));
  }
  for (size_t i = 1; i < rows.size(); ++i)
    if (rows[i].result.output_hash != rows[0].result.output_hash)
      throw BenchError("output hash differs between modes of " + base.program);
  double interp_mean = 0;
  for (const auto& r : rows)
    if (r.mode == rt::Mode::InterpOnly) interp_mean = r.result.mean_ns;
  for (auto& r : rows)
    r.ratio_vs_interp = interp_mean > 0 ? interp_mean / r.result.mean_ns : 0.0;
  return rows;
}

inline std::string render_table(const std::vector<ModeRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "program" << std::setw(8) << "mode" << std::right
     << std::setw(14) << "mean_ns" << std::setw(13) << "stddev_ns" << std::setw(9)
     << "speedup" << std::setw(12) << "guards" << std::setw(9) << "compiles" << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(14) << r.program << std::setw(8)
       << rt::mode_name(r.mode) << std::right << std::setw(14) << std::fixed
       << std::setprecision(0) << r.result.mean_ns << std::setw(13) << r.result.stddev_ns
       << std::setw(9) << std::setprecision(2) << r.ratio_vs_interp << std::setw(12)
       << r.result.counters.guard_fails << std::setw(9) << r.result.counters.compiles
       << "\n";
  }
  return os.str();
}

// Resolves a program argument: a corpus name, or a path to .mml / .mba.
inline BenchmarkSpec spec_for_program(const std::string& name_or_path) {
  BenchmarkSpec spec;
  if (const CorpusProgram* cp = corpus_find(name_or_path)) {
    spec.program = cp->name;
    spec.source = cp->source;
    for (const auto& [fn, strat] : cp->hybrid_assignment) spec.strategy[fn] = strat;
    return spec;
  }
  throw BenchError("unknown corpus program '" + name_or_path + "'");
}

}  // namespace hotpath::bench
