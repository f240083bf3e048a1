#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "adaptbf/allocation.hpp"

namespace adaptbf {

using TimeUs = std::int64_t;

constexpr TimeUs kNoWakeup = INT64_MAX;

// One unit of I/O demand; 1 RPC = 1 token.
struct Rpc {
  JobId job_id;
  TimeUs arrival_us = 0;
  std::uint64_t seq = 0;  // per-job monotone
};

struct TokenBucket {
  double rate_per_s = 0;  // from the active rule
  double balance = 0;
  double depth = 3;
  TimeUs last_refill_us = 0;

  void refill(TimeUs now_us) {
    if (now_us > last_refill_us) {
      balance += rate_per_s * static_cast<double>(now_us - last_refill_us) / 1e6;
      if (balance > depth) {
        balance = depth;
      }
      last_refill_us = now_us;
    }
  }

  // Time at which the balance reaches one token at the current rate.
  TimeUs eligible_at() const {
    if (balance >= 1.0) {
      return last_refill_us;
    }
    double wait_s = (1.0 - balance) / rate_per_s;
    return last_refill_us + static_cast<TimeUs>(wait_s * 1e6) + 1;
  }
};

struct DispatchRecord {
  TimeUs time_us = 0;
  JobId job_id;
  std::uint64_t seq = 0;
  bool from_fallback = false;
};

struct SchedulerConfig {
  int thread_count = 1;
  TimeUs service_time_us = 1000;
  double bucket_depth = 3;
  // Token rate for the fallback queue; 0 leaves it thread-limited only. Set
  // to the target's aggregate token rate when tokens are enforced, so RPCs
  // without a matching rule cannot exceed the server-wide budget.
  double fallback_rate_per_s = 0;
};

// Simulated rule-based RPC scheduler for one storage target: per-job
// token-bucket queues dispatched earliest-deadline-first, a rate-unlimited
// fallback queue, and a fixed pool of I/O threads. Rule queues are strictly
// rate limited: no token, no dispatch, even with idle threads.
class TbfScheduler {
 public:
  explicit TbfScheduler(const SchedulerConfig& cfg);

  // Called for every arrival before enqueueing (wired to the ledger).
  std::function<void(const JobId&, TimeUs)> on_enqueue;

  void enqueue(Rpc rpc, TimeUs now_us);

  // Installs rule rates from an allocation plan. Jobs absent from the plan
  // lose their rule; their pending RPCs migrate to the fallback queue.
  void apply_rules(const std::map<JobId, std::int64_t>& grants,
                   const std::map<JobId, Rational>& priorities, std::int64_t interval_ms,
                   TimeUs now_us);

  // Installs a fixed set of rule rates directly (static mode, unit tests).
  void set_rule(const JobId& job, double rate_per_s, double priority, TimeUs now_us);

  // Dispatches as much as tokens and idle threads allow at this instant.
  std::vector<DispatchRecord> dispatch(TimeUs now_us);

  // Earliest future instant at which a new dispatch could become possible,
  // ignoring future arrivals and rule changes. kNoWakeup if none.
  TimeUs next_wakeup(TimeUs now_us) const;

  std::int64_t queue_depth(const JobId& job) const;
  std::int64_t fallback_depth() const { return static_cast<std::int64_t>(fallback_.size()); }
  std::int64_t total_enqueued() const { return total_enqueued_; }
  std::int64_t total_dispatched() const { return total_dispatched_; }
  bool has_rule(const JobId& job) const { return queues_.count(job) != 0; }
  double rule_rate(const JobId& job) const;
  std::uint64_t generation() const { return generation_; }

 private:
  struct RuleQueue {
    double rule_priority = 0;
    TokenBucket bucket;
    std::deque<Rpc> fifo;
  };

  SchedulerConfig cfg_;
  std::map<JobId, RuleQueue> queues_;
  std::deque<Rpc> fallback_;
  TokenBucket fallback_bucket_;
  std::vector<TimeUs> busy_until_;
  std::uint64_t generation_ = 0;
  std::int64_t total_enqueued_ = 0;
  std::int64_t total_dispatched_ = 0;
};

}  // namespace adaptbf
