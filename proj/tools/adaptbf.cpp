#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "adaptbf/sim.hpp"
#include "adaptbf/workload.hpp"

namespace fs = std::filesystem;
using namespace adaptbf;

namespace {

int fail(const char* code, const std::string& msg) {
  std::cerr << "error: " << code << " " << msg << std::endl;
  return 1;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

struct RunOptions {
  std::string mode;
  std::optional<std::int64_t> interval_ms;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string baseline_path;
  bool json = false;
  int parallel_osts = 1;
};

// A baseline summary.csv is only used for the gain/loss columns; re-running
// the baseline scenario is the caller's job. Here we just load served counts.
std::optional<RunResult> load_baseline(const std::string& path, const RunResult& like) {
  if (path.empty()) {
    return std::nullopt;
  }
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("baseline file not found: " + path);
  }
  RunResult base;
  base.scenario = like.scenario;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string id, arrivals, served;
    std::getline(ss, id, ',');
    std::getline(ss, arrivals, ',');
    std::getline(ss, served, ',');
    if (id == "TOTAL") {
      base.aggregate_served = std::stoll(served);
      base.aggregate_arrivals = std::stoll(arrivals);
      continue;
    }
    JobSummary s;
    s.arrivals = std::stoll(arrivals);
    s.served = std::stoll(served);
    base.jobs[id] = s;
  }
  return base;
}

int run_scenario(Scenario sc, const RunOptions& opt) {
  if (!opt.mode.empty()) {
    sc.controller.mode = mode_from_name(opt.mode);
  }
  if (opt.interval_ms) {
    sc.controller.interval_ms = *opt.interval_ms;
  }
  if (opt.seed) {
    sc.seed = *opt.seed;
  }
  fs::path out_dir = sc.output_dir.value_or(opt.out_dir);
  fs::create_directories(out_dir);

  if (opt.parallel_osts > 1) {
    // Independent target instances: same workload shape, distinct seeds, one
    // worker each. Outputs land in numbered subdirectories.
    std::vector<std::thread> workers;
    std::vector<std::string> errors(static_cast<std::size_t>(opt.parallel_osts));
    for (int i = 0; i < opt.parallel_osts; ++i) {
      workers.emplace_back([&, i]() {
        try {
          Scenario inst = sc;
          inst.seed = sc.seed + static_cast<std::uint64_t>(i);
          RunResult r = run(inst);
          fs::path dir = out_dir / ("ost" + std::to_string(i));
          fs::create_directories(dir);
          write_file(dir / "timeline.csv", timeline_csv(r));
          write_file(dir / "summary.csv", summary_csv(r));
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(i)] = e.what();
        }
      });
    }
    for (auto& w : workers) {
      w.join();
    }
    for (const auto& e : errors) {
      if (!e.empty()) {
        return fail("E_RUN", e);
      }
    }
    std::cout << "wrote " << opt.parallel_osts << " instance directories under "
              << out_dir.string() << std::endl;
    return 0;
  }

  RunResult r = run(sc);
  auto baseline = load_baseline(opt.baseline_path, r);
  const RunResult* base_ptr = baseline ? &*baseline : nullptr;
  write_file(out_dir / "timeline.csv", timeline_csv(r));
  write_file(out_dir / "summary.csv", summary_csv(r, base_ptr));
  if (opt.json) {
    std::cout << summary_json(r, base_ptr) << std::endl;
  } else {
    std::cout << summary_csv(r, base_ptr);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive token-bucket bandwidth control simulator"};
  app.require_subcommand(1);

  // run
  auto* cmd_run = app.add_subcommand("run", "Run a scenario file");
  std::string scenario_path;
  RunOptions run_opt;
  std::int64_t interval_override = -1;
  std::int64_t seed_override = -1;
  cmd_run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  cmd_run->add_option("--mode", run_opt.mode, "adaptbf|static|nobw");
  cmd_run->add_option("--interval-ms", interval_override, "Controller interval override");
  cmd_run->add_option("--seed", seed_override, "Seed override");
  cmd_run->add_option("--out-dir", run_opt.out_dir, "Output directory");
  cmd_run->add_option("--baseline", run_opt.baseline_path, "Baseline summary.csv for gain/loss");
  cmd_run->add_flag("--json", run_opt.json, "Print the summary as JSON");
  cmd_run->add_option("--parallel-osts", run_opt.parallel_osts,
                      "Run N independent target instances in parallel");

  // builtin
  auto* cmd_builtin = app.add_subcommand("builtin", "Materialize and run a builtin scenario");
  std::string builtin_name;
  RunOptions builtin_opt;
  std::int64_t b_interval_override = -1;
  std::int64_t b_seed_override = -1;
  cmd_builtin->add_option("name", builtin_name, "sc1|sc2|sc3|sc4-freq")->required();
  cmd_builtin->add_option("--mode", builtin_opt.mode, "adaptbf|static|nobw");
  cmd_builtin->add_option("--interval-ms", b_interval_override, "Controller interval override");
  cmd_builtin->add_option("--seed", b_seed_override, "Seed override");
  cmd_builtin->add_option("--out-dir", builtin_opt.out_dir, "Output directory");
  cmd_builtin->add_flag("--json", builtin_opt.json, "Print the summary as JSON");

  // bench
  auto* cmd_bench = app.add_subcommand("bench", "Benchmark the allocation step");
  int bench_jobs = 0;
  int bench_trials = 100;
  std::int64_t assert_budget_us = -1;
  std::uint64_t bench_seed = 1;
  cmd_bench->add_option("--jobs", bench_jobs, "Active set size")->required();
  cmd_bench->add_option("--trials", bench_trials, "Number of timed steps");
  cmd_bench->add_option("--seed", bench_seed, "Input generation seed");
  cmd_bench->add_option("--assert-budget-us", assert_budget_us,
                        "Fail if mean step time exceeds this many microseconds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      if (interval_override >= 0) run_opt.interval_ms = interval_override;
      if (seed_override >= 0) run_opt.seed = static_cast<std::uint64_t>(seed_override);
      Scenario sc;
      try {
        sc = load_scenario_file(scenario_path);
      } catch (const ValidationError& e) {
        return fail("E_SCENARIO", e.what());
      }
      return run_scenario(std::move(sc), run_opt);
    }

    if (cmd_builtin->parsed()) {
      if (b_interval_override >= 0) builtin_opt.interval_ms = b_interval_override;
      if (b_seed_override >= 0) builtin_opt.seed = static_cast<std::uint64_t>(b_seed_override);
      auto scenarios = builtin_scenarios();
      auto it = scenarios.find(builtin_name);
      if (it == scenarios.end()) {
        std::string names;
        for (const auto& n : builtin_scenario_names()) {
          names += names.empty() ? n : ", " + n;
        }
        return fail("E_UNKNOWN_SCENARIO", builtin_name + " (valid: " + names + ")");
      }
      fs::path out_dir = builtin_opt.out_dir;
      fs::create_directories(out_dir);
      write_file(out_dir / (builtin_name + ".scenario.json"), scenario_to_json(it->second));

      if (builtin_name == "sc4-freq") {
        // Frequency sweep: same workload, widening allocation intervals.
        std::cout << "interval_ms,aggregate_served\n";
        for (std::int64_t interval : {100, 200, 400, 800, 1600}) {
          Scenario sc = it->second;
          sc.controller.interval_ms = interval;
          if (!builtin_opt.mode.empty()) {
            sc.controller.mode = mode_from_name(builtin_opt.mode);
          }
          RunResult r = run(sc);
          fs::path dir = out_dir / ("interval_" + std::to_string(interval));
          fs::create_directories(dir);
          write_file(dir / "timeline.csv", timeline_csv(r));
          write_file(dir / "summary.csv", summary_csv(r));
          std::cout << interval << ',' << r.aggregate_served << '\n';
        }
        return 0;
      }
      return run_scenario(it->second, builtin_opt);
    }

    if (cmd_bench->parsed()) {
      if (bench_jobs < 1) {
        return fail("E_USAGE", "--jobs must be >= 1");
      }
      BenchResult r = bench_alloc(bench_jobs, bench_trials, bench_seed);
      std::printf("jobs,trials,mean_step_us,p95_step_us,mean_per_job_us\n");
      std::printf("%d,%d,%.2f,%.2f,%.4f\n", r.n_jobs, r.trials, r.mean_step_us, r.p95_step_us,
                  r.mean_per_job_us);
      if (assert_budget_us >= 0 && r.mean_step_us > static_cast<double>(assert_budget_us)) {
        return fail("E_BUDGET_EXCEEDED",
                    "mean step " + std::to_string(r.mean_step_us) + " us > budget " +
                        std::to_string(assert_budget_us) + " us");
      }
      return 0;
    }
  } catch (const ValidationError& e) {
    return fail("E_VALIDATE", e.what());
  } catch (const std::exception& e) {
    return fail("E_RUN", e.what());
  }
  return 0;
}
