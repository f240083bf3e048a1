#include "adaptbf/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <json.hpp>

#include "adaptbf/workload.hpp"

namespace adaptbf {

namespace {

std::map<JobId, Rational> static_priorities(const Scenario& sc) {
  std::int64_t total = 0;
  for (const auto& j : sc.jobs) {
    total += j.nodes;
  }
  std::map<JobId, Rational> out;
  for (const auto& j : sc.jobs) {
    out[j.job_id] = Rational(j.nodes, total);
  }
  return out;
}

}  // namespace

RunResult run(const Scenario& scenario) {
  validate_scenario(scenario);
  RunResult result;
  result.scenario = scenario;

  const TimeUs duration_us = static_cast<TimeUs>(scenario.duration_s * 1e6);
  const TimeUs interval_us = scenario.controller.interval_ms * 1000;
  const TimeUs metrics_us = scenario.metrics_interval_ms * 1000;
  const bool adaptive = scenario.controller.mode == ControllerMode::AdapTbf;

  std::map<JobId, std::int64_t> nodes_of;
  for (const auto& j : scenario.jobs) {
    nodes_of[j.job_id] = j.nodes;
  }

  // Pre-generate the full arrival stream, ordered by (time, job, seq).
  std::vector<Rpc> arrivals;
  for (const auto& j : scenario.jobs) {
    auto a = generate_arrivals(j, scenario.duration_s, scenario.seed);
    arrivals.insert(arrivals.end(), a.begin(), a.end());
  }
  std::sort(arrivals.begin(), arrivals.end(), [](const Rpc& a, const Rpc& b) {
    if (a.arrival_us != b.arrival_us) return a.arrival_us < b.arrival_us;
    if (a.job_id != b.job_id) return a.job_id < b.job_id;
    return a.seq < b.seq;
  });

  SchedulerConfig cfg;
  cfg.thread_count = scenario.ost.thread_count;
  cfg.service_time_us = static_cast<TimeUs>(scenario.ost.per_rpc_service_time_ms * 1000.0);
  cfg.bucket_depth = scenario.ost.bucket_depth;
  if (scenario.controller.mode != ControllerMode::NoBw) {
    // Tokens are enforced server-wide: RPCs without a rule yet still draw
    // from the target's aggregate rate instead of running thread-limited.
    cfg.fallback_rate_per_s = static_cast<double>(scenario.ost.max_token_rate);
  }
  TbfScheduler sched(cfg);

  JobLedger ledger(scenario.controller.eviction_k);
  if (adaptive) {
    sched.on_enqueue = [&](const JobId& job, TimeUs now) {
      ledger.observe_rpc(job, nodes_of.at(job), now);
    };
  }

  if (scenario.controller.mode == ControllerMode::StaticBw) {
    // Fixed rules proportional to each job's share of all nodes in the
    // scenario, installed once up front.
    auto prios = static_priorities(scenario);
    for (const auto& j : scenario.jobs) {
      double rate = static_cast<double>(scenario.ost.max_token_rate) *
                    static_cast<double>(prios.at(j.job_id));
      sched.set_rule(j.job_id, rate, static_cast<double>(prios.at(j.job_id)), 0);
    }
  }


  const OstBudget budget{scenario.ost.max_token_rate, scenario.controller.interval_ms};

  std::map<JobId, std::int64_t> frame_served;
  std::map<JobId, std::int64_t> frame_arrivals;
  std::map<JobId, std::int64_t> total_served;
  std::map<JobId, std::int64_t> total_arrivals;
  std::map<JobId, std::int64_t> current_grants;
  if (scenario.controller.mode == ControllerMode::StaticBw) {
    auto prios = static_priorities(scenario);
    for (const auto& j : scenario.jobs) {
      current_grants[j.job_id] =
          floor_to_i64(prios.at(j.job_id) * budget.tokens_per_interval());
    }
  }
  for (const auto& j : scenario.jobs) {
    frame_served[j.job_id] = 0;
    frame_arrivals[j.job_id] = 0;
    total_served[j.job_id] = 0;
    total_arrivals[j.job_id] = 0;
  }

  std::size_t next_arrival = 0;
  TimeUs next_tick = adaptive ? interval_us : kNoWakeup;
  TimeUs next_metrics = metrics_us;
  TimeUs now = -1;

  auto controller_tick = [&](TimeUs t) {
    std::int64_t idx = t / interval_us - 1;
    auto active = ledger.snapshot_active(idx);
    if (active.empty()) {
      // Nothing ran this interval; leave the existing rules in place.
      ledger.skip_interval();
      return;
    }
    AllocateOptions opts;
    opts.interval_index = idx;
    opts.reclaim_bound = scenario.controller.reclaim_bound;
    AllocationPlan plan = allocate_step(budget, active, opts);
    sched.apply_rules(plan.grants, plan.phases.priority, scenario.controller.interval_ms, t);
    ledger.commit(plan);
    ledger.clear_stats(idx);
    current_grants = plan.grants;
    result.plans.push_back(std::move(plan));
  };

  for (;;) {
    TimeUs t = kNoWakeup;
    if (next_arrival < arrivals.size()) {
      t = std::min(t, arrivals[next_arrival].arrival_us);
    }
    TimeUs wake = sched.next_wakeup(std::max<TimeUs>(now, 0));
    if (wake != kNoWakeup) {
      t = std::min(t, std::max(wake, now + 1));
    }
    t = std::min({t, next_tick, next_metrics});
    if (t > duration_us || t == kNoWakeup) {
      break;
    }

    while (next_arrival < arrivals.size() && arrivals[next_arrival].arrival_us <= t) {
      const Rpc& rpc = arrivals[next_arrival];
      frame_arrivals[rpc.job_id] += 1;
      total_arrivals[rpc.job_id] += 1;
      sched.enqueue(rpc, t);
      ++next_arrival;
    }

    if (t == next_tick) {
      controller_tick(t);
      next_tick += interval_us;
    }

    for (const auto& d : sched.dispatch(t)) {
      frame_served[d.job_id] += 1;
      total_served[d.job_id] += 1;
      result.trace.push_back(d);
    }

    if (t == next_metrics) {
      MetricsFrame frame;
      frame.time_ms = t / 1000;
      for (const auto& j : scenario.jobs) {
        const JobId& id = j.job_id;
        frame.served[id] = frame_served[id];
        frame.demand[id] = frame_arrivals[id];
        frame.granted[id] = current_grants.count(id) ? current_grants[id] : 0;
        std::int64_t rec = 0;
        if (auto it = ledger.entries().find(id); it != ledger.entries().end()) {
          rec = it->second.record;
        }
        frame.record[id] = rec;
        frame.queue_depth[id] = sched.queue_depth(id);
        frame.aggregate_served += frame_served[id];
        frame_served[id] = 0;
        frame_arrivals[id] = 0;
      }
      frame.fallback_depth = sched.fallback_depth();
      result.frames.push_back(std::move(frame));
      next_metrics += metrics_us;
    }
    now = t;
  }

  for (const auto& j : scenario.jobs) {
    JobSummary s;
    s.arrivals = total_arrivals[j.job_id];
    s.served = total_served[j.job_id];
    s.queued_at_end = s.arrivals - s.served;
    s.mean_throughput_rpc_s = static_cast<double>(s.served) / scenario.duration_s;
    result.aggregate_served += s.served;
    result.aggregate_arrivals += s.arrivals;
    result.jobs[j.job_id] = s;
  }
  result.evictions = ledger.evictions();
  return result;
}

std::map<JobId, CompareEntry> compare(const RunResult& a, const RunResult& b) {
  if (a.jobs.size() != b.jobs.size()) {
    throw ValidationError("compare: job sets differ");
  }
  std::map<JobId, CompareEntry> out;
  for (const auto& [id, sa] : a.jobs) {
    auto it = b.jobs.find(id);
    if (it == b.jobs.end()) {
      throw ValidationError("compare: job " + id + " missing from baseline");
    }
    CompareEntry e;
    e.served_a = sa.served;
    e.served_b = it->second.served;
    e.relative_delta = it->second.served == 0
                           ? (sa.served == 0 ? 0.0 : 1.0)
                           : static_cast<double>(sa.served - it->second.served) /
                                 static_cast<double>(it->second.served);
    out[id] = e;
  }
  return out;
}

BenchResult bench_alloc(int n_jobs, int trials, std::uint64_t seed) {
  if (n_jobs < 1) {
    throw ValidationError("bench: n_jobs must be >= 1");
  }
  if (trials < 1) {
    throw ValidationError("bench: trials must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> nodes_d(1, 64);
  std::uniform_int_distribution<std::int64_t> demand_d(1, 200);
  std::uniform_int_distribution<std::int64_t> alloc_d(0, 200);
  std::uniform_int_distribution<std::int64_t> record_d(-20, 20);
  std::uniform_int_distribution<std::int64_t> rho_d(0, 999);

  OstBudget budget{n_jobs * 100, 100};
  std::vector<double> step_us;
  step_us.reserve(static_cast<std::size_t>(trials));

  for (int trial = 0; trial < trials; ++trial) {
    std::vector<JobInput> jobs;
    jobs.reserve(static_cast<std::size_t>(n_jobs));
    for (int i = 0; i < n_jobs; ++i) {
      JobInput in;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "J%06d", i);
      in.job_id = buf;
      in.nodes = nodes_d(rng);
      in.demand = demand_d(rng);
      if (alloc_d(rng) > 20) {
        in.prev_alloc = alloc_d(rng);
      }
      in.record = record_d(rng);
      in.remainder = Rational(rho_d(rng), 1000);
      jobs.push_back(std::move(in));
    }
    auto t0 = std::chrono::steady_clock::now();
    auto plan = allocate_step(budget, jobs);
    auto t1 = std::chrono::steady_clock::now();
    (void)plan;
    step_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }

  std::sort(step_us.begin(), step_us.end());
  BenchResult r;
  r.n_jobs = n_jobs;
  r.trials = trials;
  double sum = 0;
  for (double v : step_us) {
    sum += v;
  }
  r.mean_step_us = sum / static_cast<double>(trials);
  r.p95_step_us = step_us[static_cast<std::size_t>(0.95 * (step_us.size() - 1))];
  r.mean_per_job_us = r.mean_step_us / static_cast<double>(n_jobs);
  return r;
}

std::string timeline_csv(const RunResult& result) {
  std::ostringstream out;
  out << "time_ms,job_id,served_rpcs,granted_tokens,record,demand,queue_depth\n";
  for (const auto& frame : result.frames) {
    for (const auto& [id, served] : frame.served) {
      out << frame.time_ms << ',' << id << ',' << served << ',' << frame.granted.at(id)
          << ',' << frame.record.at(id) << ',' << frame.demand.at(id) << ','
          << frame.queue_depth.at(id) << '\n';
    }
  }
  return out.str();
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string summary_csv(const RunResult& result, const RunResult* baseline) {
  std::map<JobId, CompareEntry> deltas;
  if (baseline != nullptr) {
    deltas = compare(result, *baseline);
  }
  std::ostringstream out;
  out << "job_id,arrivals,served,queued_at_end,mean_throughput_rpc_s";
  if (baseline != nullptr) {
    out << ",baseline_served,relative_delta";
  }
  out << '\n';
  for (const auto& [id, s] : result.jobs) {
    out << id << ',' << s.arrivals << ',' << s.served << ',' << s.queued_at_end << ','
        << fmt_double(s.mean_throughput_rpc_s);
    if (baseline != nullptr) {
      out << ',' << deltas.at(id).served_b << ',' << fmt_double(deltas.at(id).relative_delta);
    }
    out << '\n';
  }
  out << "TOTAL," << result.aggregate_arrivals << ',' << result.aggregate_served << ','
      << result.aggregate_arrivals - result.aggregate_served << ','
      << fmt_double(static_cast<double>(result.aggregate_served) / result.scenario.duration_s);
  if (baseline != nullptr) {
    std::int64_t base_total = baseline->aggregate_served;
    double delta = base_total == 0 ? 0.0
                                   : static_cast<double>(result.aggregate_served - base_total) /
                                         static_cast<double>(base_total);
    out << ',' << base_total << ',' << fmt_double(delta);
  }
  out << '\n';
  return out.str();
}

std::string summary_json(const RunResult& result, const RunResult* baseline) {
  nlohmann::json doc;
  doc["scenario"] = result.scenario.name;
  doc["mode"] = mode_name(result.scenario.controller.mode);
  doc["duration_s"] = result.scenario.duration_s;
  doc["aggregate_served"] = result.aggregate_served;
  doc["aggregate_arrivals"] = result.aggregate_arrivals;
  doc["jobs"] = nlohmann::json::object();
  std::map<JobId, CompareEntry> deltas;
  if (baseline != nullptr) {
    deltas = compare(result, *baseline);
  }
  for (const auto& [id, s] : result.jobs) {
    nlohmann::json j;
    j["arrivals"] = s.arrivals;
    j["served"] = s.served;
    j["queued_at_end"] = s.queued_at_end;
    j["mean_throughput_rpc_s"] = s.mean_throughput_rpc_s;
    if (baseline != nullptr) {
      j["baseline_served"] = deltas.at(id).served_b;
      j["relative_delta"] = deltas.at(id).relative_delta;
    }
    doc["jobs"][id] = std::move(j);
  }
  return doc.dump(2);
}

}  // namespace adaptbf
