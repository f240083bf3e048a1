#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptbf/rational.hpp"

namespace adaptbf {

using JobId = std::string;

// Thrown when an allocation step is requested with no active jobs.
struct EmptyActiveSetError : std::runtime_error {
  EmptyActiveSetError() : std::runtime_error("active job set is empty") {}
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Per-job input to one allocation step.
struct JobInput {
  JobId job_id;
  std::int64_t nodes = 1;                  // compute nodes, drives priority
  std::int64_t demand = 0;                 // RPC arrivals in the last interval
  std::optional<std::int64_t> prev_alloc;  // tokens granted last interval
  std::int64_t record = 0;                 // >0 lent, <0 borrowed
  Rational remainder = 0;                  // carried fraction, in [0,1)
};

// Token budget of one storage target per controller interval.
struct OstBudget {
  std::int64_t max_token_rate = 0;  // tokens/second
  std::int64_t interval_ms = 0;

  Rational tokens_per_interval() const {
    return Rational(max_token_rate * interval_ms, 1000);
  }
  std::int64_t floor_budget() const { return floor_to_i64(tokens_per_interval()); }
};

// Which record bounds the reclaim amount: the record before redistribution
// (as the equations are written) or after it. Kept switchable for
// sensitivity testing.
enum class ReclaimBoundMode { PreRedistribution, PostRedistribution };

// Intermediates of the three phases, kept for diagnostics and tests.
struct PhaseAllocation {
  std::map<JobId, Rational> priority;
  std::map<JobId, std::int64_t> initial_alloc;       // integer, post-apportionment
  std::map<JobId, std::int64_t> redistributed_alloc;
  std::map<JobId, std::int64_t> recompensated_alloc;
  std::map<JobId, Rational> utilization;
  std::map<JobId, std::optional<Rational>> future_utilization;  // nullopt = infinite
  std::map<JobId, std::int64_t> surplus;
  std::int64_t total_surplus = 0;
  std::map<JobId, std::int64_t> reclaim;
  std::int64_t total_reclaim = 0;
  std::map<JobId, Rational> distribution_factor;
  std::map<JobId, std::int64_t> record_redistributed;
  std::map<JobId, std::int64_t> record_recompensated;
  Rational reclaim_coefficient = 0;
  std::vector<JobId> lenders;    // J+ for this step
  std::vector<JobId> borrowers;  // J- for this step
  // Set when surplus existed but every distribution factor was zero, so the
  // surplus was credited back to records instead of redistributed.
  bool surplus_unredistributed = false;
};

struct LedgerUpdate {
  std::int64_t record = 0;
  Rational remainder = 0;
};

// Result of one controller step.
struct AllocationPlan {
  std::int64_t interval_index = 0;
  std::map<JobId, std::int64_t> grants;
  std::map<JobId, LedgerUpdate> ledger_updates;
  PhaseAllocation phases;
};

struct ApportionResult {
  std::map<JobId, std::int64_t> grants;
  std::map<JobId, Rational> remainders;
};

// --- individual operations -------------------------------------------------

std::map<JobId, Rational> compute_priorities(const std::vector<JobInput>& jobs);

std::map<JobId, Rational> initial_allocation(const OstBudget& budget,
                                             const std::map<JobId, Rational>& priorities);

Rational utilization_score(std::int64_t demand, std::optional<std::int64_t> prev_alloc);

// Returns per-job surplus and the total.
std::pair<std::map<JobId, std::int64_t>, std::int64_t> compute_surplus(
    const std::map<JobId, std::int64_t>& alloc, const std::map<JobId, std::int64_t>& demand);

Rational distribution_factor(const Rational& utilization, const Rational& priority);

struct RedistributeResult {
  std::map<JobId, Rational> alloc;   // rational shares, pre-apportionment
  bool surplus_unredistributed = false;
};

RedistributeResult redistribute(const std::map<JobId, std::int64_t>& alloc,
                                const std::map<JobId, std::int64_t>& surplus,
                                std::int64_t total_surplus,
                                const std::map<JobId, Rational>& factors);

std::pair<std::vector<JobId>, std::vector<JobId>> eligible_sets(
    const std::map<JobId, std::int64_t>& records_before,
    const std::map<JobId, std::int64_t>& records_after);

std::optional<Rational> future_utilization(std::int64_t demand, std::int64_t alloc_rd);

struct LenderStats {
  Rational priority;
  Rational utilization;
  std::optional<Rational> future_utilization;  // nullopt = infinite
};

Rational reclaim_coefficient(const std::vector<LenderStats>& lenders);

// Largest-remainder integer apportionment with carried fractions.
ApportionResult apply_remainders(const std::map<JobId, Rational>& raw,
                                 const std::map<JobId, Rational>& carried,
                                 std::int64_t total_constraint);

struct AllocateOptions {
  std::int64_t interval_index = 0;
  ReclaimBoundMode reclaim_bound = ReclaimBoundMode::PreRedistribution;
};

AllocationPlan allocate_step(const OstBudget& budget, const std::vector<JobInput>& jobs,
                             const AllocateOptions& opts = {});

}  // namespace adaptbf
