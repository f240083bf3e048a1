#include "adaptbf/workload.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace adaptbf {

namespace {

constexpr double kUsPerS = 1e6;

std::uint64_t mix_seed(std::uint64_t seed, const std::string& job, std::size_t process_idx) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  for (char c : job) {
    h = (h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c))) * 0x100000001b3ULL;
  }
  return h + process_idx * 0x632be59bd9b4e019ULL;
}

void emit_continuous(const ContinuousPattern& p, double job_start_s, double horizon_s,
                     std::uint64_t seed, std::vector<TimeUs>& out) {
  double t0 = job_start_s + p.start_delay_s;
  double spacing_us = kUsPerS / p.rate_rpc_s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  double t = t0 * kUsPerS;
  const double horizon_us = horizon_s * kUsPerS;
  while (t < horizon_us) {
    out.push_back(static_cast<TimeUs>(t));
    double step = spacing_us;
    if (p.jitter) {
      step *= 1.0 + jitter(rng);
    }
    t += step;
  }
}

void emit_bursts(const PeriodicBurstPattern& p, double job_start_s, double horizon_s,
                 std::vector<TimeUs>& out) {
  const double horizon_us = horizon_s * kUsPerS;
  double burst_start = (job_start_s + p.phase_s) * kUsPerS;
  const double interval_us = p.interval_s * kUsPerS;
  const double spacing_us = p.spacing_ms * 1000.0;
  while (burst_start < horizon_us) {
    for (std::int64_t k = 0; k < p.burst_rpcs; ++k) {
      double t = burst_start + static_cast<double>(k) * spacing_us;
      if (t >= horizon_us) {
        break;
      }
      out.push_back(static_cast<TimeUs>(t));
    }
    burst_start += interval_us;
  }
}

}  // namespace

std::vector<Rpc> generate_arrivals(const JobSpec& spec, double horizon_s, std::uint64_t seed) {
  if (spec.processes.empty()) {
    throw ValidationError("job " + spec.job_id + " has no processes");
  }
  if (horizon_s <= spec.start_s) {
    throw ValidationError("horizon must lie past the job start");
  }
  std::vector<TimeUs> times;
  std::size_t idx = 0;
  for (const auto& proc : spec.processes) {
    if (const auto* c = std::get_if<ContinuousPattern>(&proc)) {
      emit_continuous(*c, spec.start_s, horizon_s, mix_seed(seed, spec.job_id, idx), times);
    } else {
      emit_bursts(std::get<PeriodicBurstPattern>(proc), spec.start_s, horizon_s, times);
    }
    ++idx;
  }
  std::stable_sort(times.begin(), times.end());
  if (spec.total_volume_tokens && static_cast<std::int64_t>(times.size()) >
                                      *spec.total_volume_tokens) {
    times.resize(static_cast<std::size_t>(*spec.total_volume_tokens));
  }
  std::vector<Rpc> out;
  out.reserve(times.size());
  std::uint64_t seq = 0;
  for (TimeUs t : times) {
    out.push_back({spec.job_id, t, seq++});
  }
  return out;
}

namespace {

JobSpec continuous_job(const std::string& id, std::int64_t nodes, double rate,
                       double delay_s = 0) {
  JobSpec j;
  j.job_id = id;
  j.nodes = nodes;
  j.processes.push_back(ContinuousPattern{rate, delay_s, false});
  return j;
}

JobSpec burst_job(const std::string& id, std::int64_t nodes, std::int64_t burst,
                  double interval_s, double phase_s, double spacing_ms) {
  JobSpec j;
  j.job_id = id;
  j.nodes = nodes;
  j.processes.push_back(PeriodicBurstPattern{burst, interval_s, phase_s, spacing_ms});
  return j;
}

OstConfig desk_ost() {
  OstConfig ost;
  ost.max_token_rate = 1000;
  ost.thread_count = 2;
  ost.per_rpc_service_time_ms = 1.8;  // ~1111 RPC/s aggregate service rate
  ost.bucket_depth = 3;
  return ost;
}

Scenario sc1() {
  // Four always-saturating jobs; node counts set the 10/10/30/50 split.
  Scenario sc;
  sc.name = "sc1";
  sc.ost = desk_ost();
  sc.duration_s = 60;
  sc.seed = 42;
  sc.jobs.push_back(continuous_job("J1", 10, 600));
  sc.jobs.push_back(continuous_job("J2", 10, 600));
  sc.jobs.push_back(continuous_job("J3", 30, 600));
  sc.jobs.push_back(continuous_job("J4", 50, 600));
  return sc;
}

Scenario sc2() {
  // Three high-priority bursty jobs over one low-priority continuous flood.
  // Bursts are pulses at ~300 RPC/s so each spans one to two controller
  // intervals.
  Scenario sc;
  sc.name = "sc2";
  sc.ost = desk_ost();
  sc.duration_s = 60;
  sc.seed = 42;
  sc.jobs.push_back(burst_job("J1", 30, 50, 2.0, 0.4, 10.0 / 3.0));
  sc.jobs.push_back(burst_job("J2", 30, 60, 3.0, 1.1, 10.0 / 3.0));
  sc.jobs.push_back(burst_job("J3", 30, 40, 2.5, 1.8, 10.0 / 3.0));
  sc.jobs.push_back(continuous_job("J4", 10, 1500));
  return sc;
}

Scenario sc3() {
  // Equal priorities; jobs 1-3 run a light warm-up trickle with small
  // periodic bursts, then start their main continuous stream at staggered
  // delays; job 4 is continuous from the start. While warming up a job
  // under-uses its share and lends it; once its main stream starts the lent
  // tokens flow back. Delays are the 20/50/80 s pattern at a 0.25 time
  // scale.
  Scenario sc;
  sc.name = "sc3";
  sc.ost = desk_ost();
  sc.duration_s = 35;
  sc.seed = 42;
  auto j1 = burst_job("J1", 10, 300, 2.0, 0.2, 10.0 / 3.0);
  j1.processes.push_back(ContinuousPattern{350, 5.0, false});
  auto j2 = burst_job("J2", 10, 240, 2.4, 0.9, 10.0 / 3.0);
  j2.processes.push_back(ContinuousPattern{350, 12.5, false});
  auto j3 = continuous_job("J3", 10, 175);
  j3.processes.push_back(ContinuousPattern{350, 20.0, false});
  sc.jobs.push_back(std::move(j1));
  sc.jobs.push_back(std::move(j2));
  sc.jobs.push_back(std::move(j3));
  sc.jobs.push_back(continuous_job("J4", 10, 500));
  return sc;
}

Scenario sc4() {
  Scenario sc = sc3();
  sc.name = "sc4-freq";
  return sc;
}

}  // namespace

std::map<std::string, Scenario> builtin_scenarios() {
  std::map<std::string, Scenario> out;
  out["sc1"] = sc1();
  out["sc2"] = sc2();
  out["sc3"] = sc3();
  out["sc4-freq"] = sc4();
  return out;
}

std::vector<std::string> builtin_scenario_names() { return {"sc1", "sc2", "sc3", "sc4-freq"}; }

}  // namespace adaptbf
