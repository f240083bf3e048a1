#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "adaptbf/allocation.hpp"

namespace adaptbf {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed-spacing arrival stream, optionally delayed and jittered.
struct ContinuousPattern {
  double rate_rpc_s = 0;
  double start_delay_s = 0;
  bool jitter = false;  // +-10% seeded spacing jitter
};

// burst_rpcs arrivals at phase_s, phase_s + interval_s, ... Arrivals within a
// burst are spaced spacing_ms apart (0 = all at the burst instant).
struct PeriodicBurstPattern {
  std::int64_t burst_rpcs = 0;
  double interval_s = 0;
  double phase_s = 0;
  double spacing_ms = 0;
};

using ProcessPattern = std::variant<ContinuousPattern, PeriodicBurstPattern>;

struct JobSpec {
  JobId job_id;
  std::int64_t nodes = 1;
  double start_s = 0;
  std::vector<ProcessPattern> processes;
  std::optional<std::int64_t> total_volume_tokens;
};

enum class ControllerMode { AdapTbf, StaticBw, NoBw };

struct ControllerConfig {
  ControllerMode mode = ControllerMode::AdapTbf;
  std::int64_t interval_ms = 100;
  std::int64_t eviction_k = 50;
  ReclaimBoundMode reclaim_bound = ReclaimBoundMode::PreRedistribution;
};

struct OstConfig {
  std::int64_t max_token_rate = 1000;  // tokens/second
  int thread_count = 1;
  double per_rpc_service_time_ms = 1.0;
  double bucket_depth = 3;
};

struct Scenario {
  std::string name;
  OstConfig ost;
  ControllerConfig controller;
  std::vector<JobSpec> jobs;
  double duration_s = 0;
  std::uint64_t seed = 0;
  std::int64_t metrics_interval_ms = 100;
  std::optional<std::string> output_dir;
};

// Parses a scenario JSON document. Unknown keys are rejected with the
// offending key path in the message.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);
std::string scenario_to_json(const Scenario& sc);

void validate_scenario(const Scenario& sc);

const char* mode_name(ControllerMode mode);
ControllerMode mode_from_name(const std::string& name);

}  // namespace adaptbf
