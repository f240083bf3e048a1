#include "adaptbf/ledger.hpp"

namespace adaptbf {

void JobLedger::observe_rpc(const JobId& job, std::int64_t nodes, std::int64_t) {
  demand_[job] += 1;
  auto it = entries_.find(job);
  if (it == entries_.end()) {
    JobLedgerEntry e;
    e.job_id = job;
    e.nodes = nodes;
    e.created_at = current_interval_;
    entries_.emplace(job, e);
  } else {
    it->second.nodes = nodes;
  }
}

std::vector<JobInput> JobLedger::snapshot_active(std::int64_t interval_index) {
  if (phase_ != Phase::Collecting) {
    throw ProtocolError("snapshot_active called out of order");
  }
  current_interval_ = interval_index;
  std::vector<JobInput> active;
  std::vector<JobId> evict;
  for (auto& [id, e] : entries_) {
    std::int64_t d = 0;
    if (auto it = demand_.find(id); it != demand_.end()) {
      d = it->second;
    }
    if (d > 0) {
      JobInput in;
      in.job_id = id;
      in.nodes = e.nodes;
      in.demand = d;
      in.prev_alloc = e.last_alloc;
      in.record = e.record;
      in.remainder = e.remainder;
      active.push_back(std::move(in));
    } else {
      e.idle_intervals += 1;
      if (e.idle_intervals >= eviction_intervals_) {
        evictions_.push_back({interval_index, id, e.record});
        evict.push_back(id);
      }
    }
  }
  for (const auto& id : evict) {
    entries_.erase(id);
  }
  // The snapshot consumes this interval's demand; anything observed from here
  // on accumulates toward the next interval.
  demand_.clear();
  phase_ = Phase::Snapshotted;
  return active;
}

void JobLedger::commit(const AllocationPlan& plan) {
  if (phase_ != Phase::Snapshotted) {
    throw ProtocolError("commit called out of order");
  }
  for (const auto& [id, upd] : plan.ledger_updates) {
    auto it = entries_.find(id);
    if (it == entries_.end()) {
      throw ProtocolError("plan references unknown job " + id);
    }
    it->second.record = upd.record;
    it->second.remainder = upd.remainder;
  }
  for (const auto& [id, grant] : plan.grants) {
    auto it = entries_.find(id);
    if (it == entries_.end()) {
      throw ProtocolError("plan references unknown job " + id);
    }
    it->second.last_alloc = grant;
    it->second.idle_intervals = 0;
  }
  phase_ = Phase::Committed;
}

void JobLedger::clear_stats(std::int64_t) {
  if (phase_ != Phase::Committed) {
    throw ProtocolError("clear_stats called before commit");
  }
  served_.clear();
  phase_ = Phase::Collecting;
}

void JobLedger::skip_interval() {
  if (phase_ == Phase::Committed) {
    throw ProtocolError("skip_interval after commit; use clear_stats");
  }
  served_.clear();
  phase_ = Phase::Collecting;
}

std::int64_t JobLedger::demand(const JobId& job) const {
  auto it = demand_.find(job);
  return it == demand_.end() ? 0 : it->second;
}

std::int64_t JobLedger::served(const JobId& job) const {
  auto it = served_.find(job);
  return it == served_.end() ? 0 : it->second;
}

void JobLedger::note_served(const JobId& job) { served_[job] += 1; }

}  // namespace adaptbf
