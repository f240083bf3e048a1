#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adaptbf/ledger.hpp"
#include "adaptbf/scenario.hpp"
#include "adaptbf/scheduler.hpp"

namespace adaptbf {

struct MetricsFrame {
  std::int64_t time_ms = 0;
  std::map<JobId, std::int64_t> served;
  std::map<JobId, std::int64_t> granted;
  std::map<JobId, std::int64_t> record;
  std::map<JobId, std::int64_t> demand;       // arrivals this frame
  std::map<JobId, std::int64_t> queue_depth;  // rule queue only
  std::int64_t fallback_depth = 0;
  std::int64_t aggregate_served = 0;
};

struct JobSummary {
  std::int64_t arrivals = 0;
  std::int64_t served = 0;
  std::int64_t queued_at_end = 0;
  double mean_throughput_rpc_s = 0;
};

struct RunResult {
  Scenario scenario;
  std::vector<MetricsFrame> frames;
  std::map<JobId, JobSummary> jobs;
  std::int64_t aggregate_served = 0;
  std::int64_t aggregate_arrivals = 0;
  std::vector<AllocationPlan> plans;  // one per controller tick (adaptbf mode)
  std::vector<DispatchRecord> trace;
  std::vector<EvictionEvent> evictions;
};

RunResult run(const Scenario& scenario);

struct CompareEntry {
  std::int64_t served_a = 0;
  std::int64_t served_b = 0;
  double relative_delta = 0;  // (a - b) / b
};

// Per-job gain/loss of run a over run b. Both runs must share job set and
// duration.
std::map<JobId, CompareEntry> compare(const RunResult& a, const RunResult& b);

struct BenchResult {
  int n_jobs = 0;
  int trials = 0;
  double mean_step_us = 0;
  double p95_step_us = 0;
  double mean_per_job_us = 0;
};

// Times allocate_step on synthetic random active sets.
BenchResult bench_alloc(int n_jobs, int trials, std::uint64_t seed);

std::string timeline_csv(const RunResult& result);
std::string summary_csv(const RunResult& result, const RunResult* baseline = nullptr);
std::string summary_json(const RunResult& result, const RunResult* baseline = nullptr);

}  // namespace adaptbf
