#include "adaptbf/scheduler.hpp"

#include <algorithm>

namespace adaptbf {

TbfScheduler::TbfScheduler(const SchedulerConfig& cfg) : cfg_(cfg) {
  busy_until_.assign(static_cast<std::size_t>(cfg_.thread_count), 0);
  fallback_bucket_.rate_per_s = cfg_.fallback_rate_per_s;
  fallback_bucket_.depth = cfg_.bucket_depth;
  fallback_bucket_.balance = cfg_.bucket_depth;
}

void TbfScheduler::enqueue(Rpc rpc, TimeUs now_us) {
  if (on_enqueue) {
    on_enqueue(rpc.job_id, now_us);
  }
  total_enqueued_ += 1;
  auto it = queues_.find(rpc.job_id);
  if (it != queues_.end()) {
    it->second.fifo.push_back(std::move(rpc));
  } else {
    fallback_.push_back(std::move(rpc));
  }
}

void TbfScheduler::set_rule(const JobId& job, double rate_per_s, double priority,
                            TimeUs now_us) {
  auto it = queues_.find(job);
  if (it == queues_.end()) {
    RuleQueue q;
    q.rule_priority = priority;
    q.bucket.rate_per_s = rate_per_s;
    q.bucket.depth = cfg_.bucket_depth;
    q.bucket.balance = cfg_.bucket_depth;  // new rules start with a full bucket
    q.bucket.last_refill_us = now_us;
    queues_.emplace(job, std::move(q));
  } else {
    // Balance carries across rate changes, clamped to the depth cap.
    it->second.bucket.refill(now_us);
    it->second.bucket.rate_per_s = rate_per_s;
    it->second.rule_priority = priority;
    if (it->second.bucket.balance > it->second.bucket.depth) {
      it->second.bucket.balance = it->second.bucket.depth;
    }
  }
  generation_ += 1;
}

void TbfScheduler::apply_rules(const std::map<JobId, std::int64_t>& grants,
                               const std::map<JobId, Rational>& priorities,
                               std::int64_t interval_ms, TimeUs now_us) {
  // Stop rules for jobs absent from the plan; their queued RPCs move to the
  // fallback queue so rule-less jobs cannot starve.
  for (auto it = queues_.begin(); it != queues_.end();) {
    if (grants.find(it->first) == grants.end()) {
      for (auto& rpc : it->second.fifo) {
        fallback_.push_back(std::move(rpc));
      }
      it = queues_.erase(it);
      generation_ += 1;
    } else {
      ++it;
    }
  }
  for (const auto& [job, grant] : grants) {
    double rate = static_cast<double>(grant) * 1000.0 / static_cast<double>(interval_ms);
    double prio = 0;
    if (auto it = priorities.find(job); it != priorities.end()) {
      prio = static_cast<double>(it->second);
    }
    set_rule(job, rate, prio, now_us);
  }
}

double TbfScheduler::rule_rate(const JobId& job) const {
  auto it = queues_.find(job);
  return it == queues_.end() ? 0.0 : it->second.bucket.rate_per_s;
}

std::int64_t TbfScheduler::queue_depth(const JobId& job) const {
  auto it = queues_.find(job);
  return it == queues_.end() ? 0 : static_cast<std::int64_t>(it->second.fifo.size());
}

std::vector<DispatchRecord> TbfScheduler::dispatch(TimeUs now_us) {
  std::vector<DispatchRecord> out;
  for (;;) {
    auto idle = std::min_element(busy_until_.begin(), busy_until_.end());
    if (idle == busy_until_.end() || *idle > now_us) {
      break;
    }

    // Earliest-deadline eligible rule queue; ties by higher rule priority,
    // then ascending job id.
    RuleQueue* chosen = nullptr;
    TimeUs chosen_deadline = 0;
    for (auto& [id, q] : queues_) {
      if (q.fifo.empty()) {
        continue;
      }
      // The deadline is the instant the bucket (first) holds a full token,
      // computed before the lazy refill collapses that history into now.
      TimeUs deadline = q.bucket.eligible_at();
      q.bucket.refill(now_us);
      if (q.bucket.balance < 1.0) {
        continue;
      }
      if (chosen == nullptr || deadline < chosen_deadline ||
          (deadline == chosen_deadline && q.rule_priority > chosen->rule_priority)) {
        chosen = &q;
        chosen_deadline = deadline;
      }
    }

    DispatchRecord rec;
    rec.time_us = now_us;
    if (chosen != nullptr) {
      Rpc rpc = std::move(chosen->fifo.front());
      chosen->fifo.pop_front();
      chosen->bucket.balance -= 1.0;
      rec.job_id = rpc.job_id;
      rec.seq = rpc.seq;
      rec.from_fallback = false;
    } else if (!fallback_.empty()) {
      if (cfg_.fallback_rate_per_s > 0) {
        fallback_bucket_.refill(now_us);
        if (fallback_bucket_.balance < 1.0) {
          break;
        }
        fallback_bucket_.balance -= 1.0;
      }
      Rpc rpc = std::move(fallback_.front());
      fallback_.pop_front();
      rec.job_id = rpc.job_id;
      rec.seq = rpc.seq;
      rec.from_fallback = true;
    } else {
      break;
    }
    *idle = now_us + cfg_.service_time_us;
    total_dispatched_ += 1;
    out.push_back(std::move(rec));
  }
  return out;
}

TimeUs TbfScheduler::next_wakeup(TimeUs now_us) const {
  bool work_pending = !fallback_.empty();
  TimeUs earliest_token = kNoWakeup;
  for (const auto& [id, q] : queues_) {
    if (q.fifo.empty()) {
      continue;
    }
    work_pending = true;
    TokenBucket b = q.bucket;
    b.refill(now_us);
    TimeUs t = b.balance >= 1.0 ? now_us : b.eligible_at();
    earliest_token = std::min(earliest_token, t);
  }
  if (!fallback_.empty()) {
    if (cfg_.fallback_rate_per_s > 0) {
      TokenBucket b = fallback_bucket_;
      b.refill(now_us);
      TimeUs t = b.balance >= 1.0 ? now_us : b.eligible_at();
      earliest_token = std::min(earliest_token, t);
    } else {
      earliest_token = now_us;
    }
  }
  if (!work_pending) {
    return kNoWakeup;
  }
  TimeUs thread_free = *std::min_element(busy_until_.begin(), busy_until_.end());
  return std::max(std::max(earliest_token, thread_free), now_us);
}

}  // namespace adaptbf
