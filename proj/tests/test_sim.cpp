#include <doctest.h>

#include "adaptbf/sim.hpp"
#include "adaptbf/workload.hpp"

using namespace adaptbf;

namespace {

Scenario short_builtin(const std::string& name, double duration_s) {
  Scenario sc = builtin_scenarios().at(name);
  sc.duration_s = duration_s;
  return sc;
}

}  // namespace

TEST_CASE("run conserves rpcs and emits one frame per metrics interval") {
  auto sc = short_builtin("sc1", 5.0);
  auto r = run(sc);
  CHECK(r.frames.size() == 50);
  std::int64_t frame_served = 0;
  for (const auto& f : r.frames) {
    frame_served += f.aggregate_served;
  }
  CHECK(frame_served == r.aggregate_served);
  CHECK(r.aggregate_served <= r.aggregate_arrivals);
  CHECK(r.aggregate_served > 0);
  for (const auto& [id, s] : r.jobs) {
    CHECK(s.served <= s.arrivals);
    CHECK(s.queued_at_end == s.arrivals - s.served);
  }
}

TEST_CASE("adaptive mode allocates every interval with demand") {
  auto sc = short_builtin("sc1", 3.0);
  auto r = run(sc);
  // 30 intervals minus the first tick, which sees the 0..100 ms arrivals.
  CHECK(r.plans.size() >= 28);
  for (const auto& plan : r.plans) {
    std::int64_t total = 0;
    for (const auto& [id, g] : plan.grants) total += g;
    CHECK(total == 100);  // 1000 tok/s at 100 ms
  }
}

TEST_CASE("static and nobw modes never invoke the allocator") {
  for (auto mode : {ControllerMode::StaticBw, ControllerMode::NoBw}) {
    auto sc = short_builtin("sc1", 2.0);
    sc.controller.mode = mode;
    auto r = run(sc);
    CHECK(r.plans.empty());
    CHECK(r.aggregate_served > 0);
  }
}

TEST_CASE("nobw serves in strict arrival order") {
  auto sc = short_builtin("sc1", 2.0);
  sc.controller.mode = ControllerMode::NoBw;
  auto r = run(sc);
  std::map<JobId, std::uint64_t> next_seq;
  for (const auto& d : r.trace) {
    CHECK(d.from_fallback);
    CHECK(d.seq == next_seq[d.job_id]);
    next_seq[d.job_id] = d.seq + 1;
  }
}

TEST_CASE("a run is deterministic byte for byte") {
  auto sc = short_builtin("sc2", 6.0);
  auto a = run(sc);
  auto b = run(sc);
  CHECK(timeline_csv(a) == timeline_csv(b));
  CHECK(summary_csv(a) == summary_csv(b));
}

TEST_CASE("seed changes the jittered workload only when jitter is on") {
  auto sc = short_builtin("sc1", 2.0);  // no jitter anywhere
  auto a = run(sc);
  sc.seed += 1;
  auto b = run(sc);
  CHECK(timeline_csv(a) == timeline_csv(b));
}

TEST_CASE("compare is zero against itself and rejects mismatched job sets") {
  auto sc = short_builtin("sc1", 2.0);
  auto r = run(sc);
  auto self = compare(r, r);
  for (const auto& [id, e] : self) {
    CHECK(e.relative_delta == 0.0);
  }

  auto other = short_builtin("sc1", 2.0);
  other.jobs[2].job_id = "renamed";
  auto r2 = run(other);
  CHECK_THROWS_AS(compare(r, r2), ValidationError);
  other.jobs.pop_back();
  auto r3 = run(other);
  CHECK_THROWS_AS(compare(r, r3), ValidationError);
}

TEST_CASE("an all-idle prefix is skipped without allocating") {
  Scenario sc;
  sc.name = "idle-prefix";
  sc.ost.max_token_rate = 500;
  sc.ost.thread_count = 1;
  sc.ost.per_rpc_service_time_ms = 1.0;
  sc.duration_s = 2.0;
  JobSpec j;
  j.job_id = "late";
  j.nodes = 1;
  j.processes.push_back(ContinuousPattern{100.0, 1.0, false});
  sc.jobs.push_back(j);
  auto r = run(sc);
  CHECK(!r.plans.empty());
  CHECK(r.plans.front().interval_index >= 9);
  CHECK(r.jobs.at("late").served > 0);
}

TEST_CASE("idle jobs are evicted with their record logged") {
  Scenario sc;
  sc.name = "evict";
  sc.ost.max_token_rate = 500;
  sc.ost.thread_count = 1;
  sc.ost.per_rpc_service_time_ms = 1.0;
  sc.controller.eviction_k = 5;
  sc.duration_s = 3.0;
  JobSpec brief;
  brief.job_id = "brief";
  brief.nodes = 1;
  brief.total_volume_tokens = 20;
  brief.processes.push_back(ContinuousPattern{200.0, 0.0, false});
  sc.jobs.push_back(brief);
  sc.jobs.push_back([] {
    JobSpec j;
    j.job_id = "steady";
    j.nodes = 1;
    j.processes.push_back(ContinuousPattern{100.0, 0.0, false});
    return j;
  }());
  auto r = run(sc);
  REQUIRE(r.evictions.size() == 1);
  CHECK(r.evictions[0].job_id == "brief");
}

TEST_CASE("bench reports sane timings") {
  auto r = bench_alloc(50, 20, 3);
  CHECK(r.n_jobs == 50);
  CHECK(r.trials == 20);
  CHECK(r.mean_step_us > 0);
  CHECK(r.p95_step_us >= r.mean_step_us * 0.1);
  CHECK(r.mean_per_job_us == doctest::Approx(r.mean_step_us / 50.0));
}

TEST_CASE("csv outputs carry the expected headers") {
  auto sc = short_builtin("sc1", 1.0);
  auto r = run(sc);
  CHECK(timeline_csv(r).rfind("time_ms,job_id,served_rpcs,granted_tokens,record,demand,"
                              "queue_depth\n", 0) == 0);
  CHECK(summary_csv(r).rfind("job_id,arrivals,served,queued_at_end,mean_throughput_rpc_s\n", 0)
        == 0);
  auto with_base = summary_csv(r, &r);
  CHECK(with_base.find("baseline_served,relative_delta") != std::string::npos);
}
