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

#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hotpath/bench/bench.hpp"
#include "hotpath/jit/ir.hpp"

namespace hp = hotpath;
using hp::bench::BenchmarkSpec;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw hp::bench::BenchError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A program argument is a corpus name, a .mml source file, or a .mba
// bytecode listing.
BenchmarkSpec resolve_program(const std::string& arg) {
  if (hp::bench::corpus_find(arg)) return hp::bench::spec_for_program(arg);
  if (arg.size() > 4 && arg.substr(arg.size() - 4) == ".mba") {
    BenchmarkSpec spec;
    spec.program = arg;
    spec.bytecode = hp::assemble(read_file(arg));
    hp::verify_targets(*spec.bytecode);
    return spec;
  }
  if (arg.size() > 4 && arg.substr(arg.size() - 4) == ".mml") {
    BenchmarkSpec spec;
    spec.program = arg;
    spec.source = read_file(arg);
    return spec;
  }
  throw hp::bench::BenchError("unknown program '" + arg +
                              "' (not a corpus name, .mml, or .mba)");
}

void append_csv(const std::string& path, const std::vector<hp::bench::ModeRow>& rows) {
  bool fresh = !std::ifstream(path).good();
  std::ofstream out(path, std::ios::app);
  if (fresh) out << hp::bench::kCsvHeader << "\n";
  for (const auto& r : rows) out << hp::bench::csv_row(r) << "\n";
}

hp::BytecodeProgram spec_bytecode(const BenchmarkSpec& spec) {
  if (spec.bytecode) return *spec.bytecode;
  return hp::mml::compile(hp::mml::parse(spec.source));
}

// Runs once with the JIT configured as requested and prints the unit
// listings selected by the dump flags.
int run_with_dumps(const BenchmarkSpec& spec, bool dump_trace, bool dump_method,
                   bool dump_ir) {
  hp::rt::Engine engine(spec_bytecode(spec), hp::bench::engine_config_for(spec));
  auto out = engine.run();
  for (const auto& u : engine.registry().all()) {
    bool want = dump_ir || (dump_trace && u->strategy == hp::jit::Strategy::Trace) ||
                (dump_method && u->strategy == hp::jit::Strategy::Method);
    if (want) std::cout << hp::jit::dump_unit(*u) << "\n";
  }
  for (int64_t v : out) std::cout << v << "\n";
  return 0;
}

int cmd_run(const BenchmarkSpec& spec, const std::string& csv_path, bool quiet_output) {
  hp::bench::BenchmarkResult r = hp::bench::run_benchmark(spec);
  if (!quiet_output)
    for (int64_t v : r.output) std::cout << v << "\n";
  std::cout << "program=" << spec.program << "\n"
            << "mode=" << hp::rt::mode_name(spec.mode) << "\n"
            << "samples=" << r.retained << "\n"
            << "mean_ns=" << (int64_t)r.mean_ns << "\n"
            << "stddev_ns=" << (int64_t)r.stddev_ns << "\n"
            << "output_hash=" << r.output_hash << "\n"
            << r.counters.key_value_lines();
  if (!csv_path.empty()) {
    hp::bench::ModeRow row{spec.program, spec.mode, r, 0.0};
    append_csv(csv_path, {row});
  }
  return 0;
}

int cmd_compare(const BenchmarkSpec& base, const std::vector<std::string>& mode_names,
                const std::string& csv_path) {
  std::vector<hp::rt::Mode> modes;
  for (const auto& m : mode_names) modes.push_back(hp::rt::mode_from_name(m));
  auto rows = hp::bench::compare_modes(base, modes);
  std::cout << hp::bench::render_table(rows);
  if (!csv_path.empty()) append_csv(csv_path, rows);
  return 0;
}

// Whole-corpus sweep; with --parallel each program runs in its own worker
// process and the parent merges the per-program CSV fragments.
int cmd_sweep(const BenchmarkSpec& tmpl, const std::vector<std::string>& mode_names,
              const std::string& csv_path, bool parallel) {
  std::vector<hp::rt::Mode> modes;
  for (const auto& m : mode_names) modes.push_back(hp::rt::mode_from_name(m));
  const auto& programs = hp::bench::corpus();
  auto spec_of = [&](const hp::bench::CorpusProgram& cp) {
    BenchmarkSpec spec = hp::bench::spec_for_program(cp.name);
    spec.iterations = tmpl.iterations;
    spec.discard = tmpl.discard;
    spec.threshold = tmpl.threshold;
    spec.persist_jit = tmpl.persist_jit;
    return spec;
  };
  if (!parallel) {
    for (const auto& cp : programs) {
      auto rows = hp::bench::compare_modes(spec_of(cp), modes);
      std::cout << hp::bench::render_table(rows) << "\n";
      if (!csv_path.empty()) append_csv(csv_path, rows);
    }
    return 0;
  }
  std::vector<std::pair<pid_t, std::string>> workers;
  for (const auto& cp : programs) {
    std::string frag = "/tmp/hotpath_sweep_" + cp.name + ".csv";
    ::unlink(frag.c_str());
    pid_t pid = fork();
    if (pid == 0) {
      try {
        append_csv(frag, hp::bench::compare_modes(spec_of(cp), modes));
        _exit(0);
      } catch (const std::exception& e) {
        std::cerr << cp.name << ": " << e.what() << "\n";
        _exit(1);
      }
    }
    workers.push_back({pid, frag});
  }
  int rc = 0;
  for (auto& [pid, frag] : workers) {
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) rc = 1;
    std::ifstream in(frag);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first && line == hp::bench::kCsvHeader) {
        first = false;
        continue;
      }
      first = false;
      std::cout << line << "\n";
      if (!csv_path.empty()) {
        bool fresh = !std::ifstream(csv_path).good();
        std::ofstream out(csv_path, std::ios::app);
        if (fresh) out << hp::bench::kCsvHeader << "\n";
        out << line << "\n";
      }
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid trace/method JIT benchmark harness"};
  app.require_subcommand(1);

  std::string program, mode = "interp", strategy_file, csv_path;
  int64_t iterations = 150, discard = 50, threshold = 100, force_guard = 0;
  bool persist = true, dump_trace = false, dump_method = false, dump_ir = false;
  bool parallel = false, quiet = false;
  std::vector<std::string> modes = {"interp", "trace", "method", "hybrid"};

  auto add_common = [&](CLI::App* cmd, bool with_mode) {
    if (with_mode)
      cmd->add_option("--mode", mode, "interp|trace|method|hybrid")->default_val("interp");
    cmd->add_option("--strategy", strategy_file, "strategy file for hybrid mode");
    cmd->add_option("--iterations", iterations, "timed executions")->default_val(150);
    cmd->add_option("--discard", discard, "warm-up executions to ignore")->default_val(50);
    cmd->add_option("--threshold", threshold, "hotness threshold")->default_val(100);
    cmd->add_option("--csv", csv_path, "append CSV rows to this file");
    cmd->add_flag("--persist-jit,!--no-persist-jit", persist,
                  "keep compiled units warm across iterations (default on)");
  };

  CLI::App* run = app.add_subcommand("run", "benchmark one program under one mode");
  run->add_option("program", program, "corpus name, .mml or .mba path")->required();
  add_common(run, true);
  run->add_option("--force-guard-fail", force_guard, "fail the Nth guard evaluation");
  run->add_flag("--dump-trace", dump_trace, "print trace-strategy unit listings");
  run->add_flag("--dump-method-trace", dump_method, "print method-strategy unit listings");
  run->add_flag("--dump-ir", dump_ir, "print every compiled unit");
  run->add_flag("--quiet-output", quiet, "suppress program output lines");

  CLI::App* cmp = app.add_subcommand("compare", "run several modes and tabulate speedups");
  cmp->add_option("program", program, "corpus name, .mml or .mba path")->required();
  cmp->add_option("--modes", modes, "modes to compare")->delimiter(',');
  add_common(cmp, false);

  CLI::App* sweep = app.add_subcommand("sweep", "compare modes across the whole corpus");
  sweep->add_option("--modes", modes, "modes to compare")->delimiter(',');
  add_common(sweep, false);
  sweep->add_flag("--parallel", parallel, "one worker process per program");

  CLI::App* list = app.add_subcommand("list", "list the built-in corpus");
  (void)list;
  CLI::App* disasm = app.add_subcommand("disasm", "print a program's bytecode listing");
  std::string disasm_program;
  disasm->add_option("program", disasm_program, "corpus name or .mml path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.get_subcommand("list")->parsed()) {
      for (const auto& cp : hp::bench::corpus()) {
        std::cout << cp.name;
        if (!cp.hybrid_assignment.empty()) {
          std::cout << "  [hybrid:";
          for (const auto& [fn, st] : cp.hybrid_assignment)
            std::cout << " " << fn << "=" << st;
          std::cout << "]";
        }
        std::cout << "\n";
      }
      return 0;
    }
    if (disasm->parsed()) {
      std::cout << hp::disassemble(spec_bytecode(resolve_program(disasm_program)));
      return 0;
    }
    if (sweep->parsed()) {
      BenchmarkSpec tmpl;
      tmpl.iterations = iterations;
      tmpl.discard = discard;
      tmpl.threshold = threshold;
      tmpl.persist_jit = persist;
      return cmd_sweep(tmpl, modes, csv_path, parallel);
    }

    BenchmarkSpec spec = resolve_program(program);
    spec.iterations = iterations;
    spec.discard = discard;
    spec.threshold = threshold;
    spec.persist_jit = persist;
    if (!strategy_file.empty())
      spec.strategy = hp::rt::parse_strategy_file(read_file(strategy_file));

    if (run->parsed()) {
      spec.mode = hp::rt::mode_from_name(mode);
      if (spec.mode == hp::rt::Mode::Hybrid && spec.strategy.empty())
        throw hp::bench::BenchError(
            "hybrid mode needs --strategy or a corpus program with a built-in assignment");
      spec.force.dynamic_n = force_guard;
      if (dump_trace || dump_method || dump_ir)
        return run_with_dumps(spec, dump_trace, dump_method, dump_ir);
      return cmd_run(spec, csv_path, quiet);
    }
    if (cmp->parsed()) return cmd_compare(spec, modes, csv_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
