#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adaptbf/allocation.hpp"

namespace adaptbf {

struct ProtocolError : std::logic_error {
  using std::logic_error::logic_error;
};

// Persistent per-job bookkeeping across intervals.
struct JobLedgerEntry {
  JobId job_id;
  std::int64_t nodes = 1;
  std::int64_t record = 0;
  Rational remainder = 0;
  std::optional<std::int64_t> last_alloc;
  std::int64_t idle_intervals = 0;
  std::int64_t created_at = 0;
};

// Logged when an idle job's entry is dropped; a nonzero record leaves the
// ledger here, never silently.
struct EvictionEvent {
  std::int64_t interval_index = 0;
  JobId job_id;
  std::int64_t record = 0;
};

// Tracks per-interval demand plus the persistent job entries. The legal
// per-interval protocol is snapshot_active -> commit -> clear_stats, enforced
// by a small state machine. observe_rpc may be called at any point; arrivals
// after clear_stats count toward the next interval.
class JobLedger {
 public:
  explicit JobLedger(std::int64_t eviction_intervals = 50)
      : eviction_intervals_(eviction_intervals) {}

  void observe_rpc(const JobId& job, std::int64_t nodes, std::int64_t now_us);

  // Closes the interval: returns inputs for every job with demand this
  // interval, bumps idle counters for the rest, and evicts entries idle for
  // eviction_intervals in a row.
  std::vector<JobInput> snapshot_active(std::int64_t interval_index);

  void commit(const AllocationPlan& plan);

  void clear_stats(std::int64_t interval_index);

  // Records no allocation happened this interval (empty active set); resets
  // the protocol so the next snapshot is legal.
  void skip_interval();

  std::int64_t demand(const JobId& job) const;
  std::int64_t served(const JobId& job) const;
  void note_served(const JobId& job);  // diagnostics only

  const std::map<JobId, JobLedgerEntry>& entries() const { return entries_; }
  const std::vector<EvictionEvent>& evictions() const { return evictions_; }

 private:
  enum class Phase { Collecting, Snapshotted, Committed };

  std::int64_t eviction_intervals_;
  Phase phase_ = Phase::Collecting;
  std::int64_t current_interval_ = 0;
  std::map<JobId, JobLedgerEntry> entries_;
  std::map<JobId, std::int64_t> demand_;
  std::map<JobId, std::int64_t> served_;
  std::vector<EvictionEvent> evictions_;
};

}  // namespace adaptbf
