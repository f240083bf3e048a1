#include "adaptbf/allocation.hpp"

#include <algorithm>
#include <cassert>

namespace adaptbf {

namespace {

BigInt floor_div(const BigInt& num, const BigInt& den) {
  BigInt q = num / den;
  if (q * den != num && num < 0) {
    q -= 1;
  }
  return q;
}

// Sums rationals over a running least common denominator. A naive chain of
// rational += calls re-normalizes against an ever-growing denominator at each
// step, which dominates the allocator's cost on large active sets; here the
// per-step gcd only ever sees one small operand.
class RationalSum {
 public:
  void add(const Rational& t) {
    const BigInt& tn = numerator(t);
    const BigInt& td = denominator(t);
    BigInt g = gcd(den_, td);
    BigInt scale = td / g;
    num_ = num_ * scale + tn * (den_ / g);
    den_ *= scale;
  }
  Rational value() const { return Rational(num_, den_); }

 private:
  BigInt num_ = 0;
  BigInt den_ = 1;
};

}  // namespace

std::map<JobId, Rational> compute_priorities(const std::vector<JobInput>& jobs) {
  if (jobs.empty()) {
    throw EmptyActiveSetError();
  }
  std::int64_t total_nodes = 0;
  for (const auto& j : jobs) {
    if (j.nodes < 1) {
      throw ContractViolation("job " + j.job_id + " has nodes < 1");
    }
    total_nodes += j.nodes;
  }
  std::map<JobId, Rational> out;
  for (const auto& j : jobs) {
    out[j.job_id] = Rational(j.nodes, total_nodes);
  }
  return out;
}

std::map<JobId, Rational> initial_allocation(const OstBudget& budget,
                                             const std::map<JobId, Rational>& priorities) {
  std::map<JobId, Rational> out;
  const Rational total = budget.tokens_per_interval();
  for (const auto& [id, p] : priorities) {
    out[id] = total * p;
  }
  return out;
}

Rational utilization_score(std::int64_t demand, std::optional<std::int64_t> prev_alloc) {
  if (!prev_alloc.has_value() || *prev_alloc == 0) {
    // First-seen jobs (or jobs whose last grant was zero) are scored
    // neutrally: active demand counts as exactly meeting the allocation.
    return demand > 0 ? Rational(1) : Rational(0);
  }
  return Rational(demand, *prev_alloc);
}

std::pair<std::map<JobId, std::int64_t>, std::int64_t> compute_surplus(
    const std::map<JobId, std::int64_t>& alloc, const std::map<JobId, std::int64_t>& demand) {
  std::map<JobId, std::int64_t> per_job;
  std::int64_t total = 0;
  for (const auto& [id, a] : alloc) {
    std::int64_t d = 0;
    if (auto it = demand.find(id); it != demand.end()) {
      d = it->second;
    }
    std::int64_t s = a > d ? a - d : 0;
    per_job[id] = s;
    total += s;
  }
  return {std::move(per_job), total};
}

Rational distribution_factor(const Rational& utilization, const Rational& priority) {
  if (utilization > 1) {
    return utilization + utilization * priority;
  }
  return utilization * priority;
}

RedistributeResult redistribute(const std::map<JobId, std::int64_t>& alloc,
                                const std::map<JobId, std::int64_t>& surplus,
                                std::int64_t total_surplus,
                                const std::map<JobId, Rational>& factors) {
  RedistributeResult out;
  RationalSum factor_sum;
  for (const auto& [id, df] : factors) {
    factor_sum.add(df);
  }
  const Rational fs = factor_sum.value();
  if (total_surplus > 0 && fs == 0) {
    // Every active job scored zero utilization: nothing sensible to base the
    // split on, so the surplus stays with its owners (credited to records by
    // the caller) rather than being handed out blindly.
    out.surplus_unredistributed = true;
    for (const auto& [id, a] : alloc) {
      out.alloc[id] = Rational(a - surplus.at(id));
    }
    return out;
  }
  // alloc' = (a - surplus) + df * total_surplus / factor_sum, built in one
  // normalization per job.
  const BigInt fs_num = numerator(fs);
  const BigInt fs_den = denominator(fs);
  for (const auto& [id, a] : alloc) {
    const std::int64_t base = a - surplus.at(id);
    if (total_surplus == 0) {
      out.alloc[id] = base;
      continue;
    }
    const Rational& df = factors.at(id);
    BigInt den = denominator(df) * fs_num;
    BigInt num = numerator(df) * total_surplus * fs_den + base * den;
    out.alloc[id] = Rational(num, den);
  }
  return out;
}

std::pair<std::vector<JobId>, std::vector<JobId>> eligible_sets(
    const std::map<JobId, std::int64_t>& records_before,
    const std::map<JobId, std::int64_t>& records_after) {
  std::vector<JobId> lenders;
  std::vector<JobId> borrowers;
  for (const auto& [id, before] : records_before) {
    std::int64_t after = records_after.at(id);
    if (before > 0 && after > 0) {
      lenders.push_back(id);
    } else if (before < 0 && after < 0) {
      borrowers.push_back(id);
    }
  }
  return {std::move(lenders), std::move(borrowers)};
}

std::optional<Rational> future_utilization(std::int64_t demand, std::int64_t alloc_rd) {
  if (alloc_rd == 0) {
    return std::nullopt;  // infinite: lender assumed fully demanded
  }
  return Rational(demand, alloc_rd);
}

Rational reclaim_coefficient(const std::vector<LenderStats>& lenders) {
  RationalSum c;
  for (const auto& s : lenders) {
    Rational cur = s.utilization > 1 ? s.utilization : Rational(1);
    Rational fut = 0;
    if (s.future_utilization.has_value() && *s.future_utilization < 1) {
      fut = 1 - *s.future_utilization;
    }
    c.add(s.priority * (cur + fut) / 2);
  }
  return c.value();
}

namespace {

// One apportionment input: an exact, possibly unnormalized fraction.
struct FracEntry {
  JobId id;
  BigInt num;
  BigInt den;  // > 0
};

ApportionResult apportion_pairs(std::vector<FracEntry>& raw,
                                const std::map<JobId, Rational>& carried,
                                std::int64_t total_constraint) {
  if (total_constraint < 0) {
    throw ContractViolation("apportionment constraint is negative");
  }
  // Remainders are held as unnormalized numerator/denominator pairs; gcd
  // normalization happens once per job on output, not per arithmetic step.
  struct Entry {
    JobId id;
    std::int64_t grant;
    BigInt rnum;  // remainder = rnum / rden, in [0,1)
    BigInt rden;
    bool bumped = false;  // received a correction token
  };
  std::vector<Entry> entries;
  entries.reserve(raw.size());
  std::int64_t granted = 0;
  for (auto& f : raw) {
    BigInt snum = std::move(f.num);
    BigInt sden = std::move(f.den);
    if (auto it = carried.find(f.id); it != carried.end() && it->second != 0) {
      const Rational& c = it->second;
      snum = snum * denominator(c) + numerator(c) * sden;
      sden *= denominator(c);
    }
    BigInt q = floor_div(snum, sden);
    std::int64_t g = q.convert_to<std::int64_t>();
    entries.push_back({f.id, g, snum - q * sden, std::move(sden), false});
    granted += g;
  }

  // Largest remainder first, ties to the lexicographically smallest job id.
  // One sorted pass is equivalent to correcting one token at a time: a job
  // granted an extra token drops below every untouched remainder, and a
  // docked job rises above them until it runs out of tokens, so the
  // one-at-a-time walk visits jobs in exactly this order.
  if (granted != total_constraint) {
    std::vector<Entry*> order;
    order.reserve(entries.size());
    for (auto& e : entries) {
      order.push_back(&e);
    }
    std::sort(order.begin(), order.end(), [](const Entry* a, const Entry* b) {
      BigInt lhs = a->rnum * b->rden;
      BigInt rhs = b->rnum * a->rden;
      if (lhs != rhs) {
        return lhs > rhs;
      }
      return a->id < b->id;
    });
    if (granted < total_constraint) {
      std::int64_t need = total_constraint - granted;
      if (need > static_cast<std::int64_t>(order.size())) {
        throw ContractViolation("apportionment cannot meet its constraint");
      }
      for (std::int64_t i = 0; i < need; ++i) {
        order[static_cast<std::size_t>(i)]->grant += 1;
        order[static_cast<std::size_t>(i)]->bumped = true;
      }
    } else {
      std::int64_t excess = granted - total_constraint;
      for (Entry* e : order) {
        if (excess == 0) {
          break;
        }
        if (e->grant <= 0) {
          continue;  // tokens are only ever docked from jobs that hold one
        }
        std::int64_t take = std::min(excess, e->grant);
        e->grant -= take;
        excess -= take;
      }
      if (excess != 0) {
        throw ContractViolation("apportionment cannot meet its constraint");
      }
    }
  }

  ApportionResult out;
  for (auto& e : entries) {
    out.grants[e.id] = e.grant;
    // A bumped job's working remainder went negative and clamps to zero; a
    // docked job's went past one and keeps only its fractional part, which is
    // the untouched remainder again. Everyone else is already in [0,1).
    out.remainders[e.id] = e.bumped ? Rational(0) : Rational(e.rnum, e.rden);
  }
  return out;
}

}  // namespace

ApportionResult apply_remainders(const std::map<JobId, Rational>& raw,
                                 const std::map<JobId, Rational>& carried,
                                 std::int64_t total_constraint) {
  std::vector<FracEntry> fracs;
  fracs.reserve(raw.size());
  for (const auto& [id, r] : raw) {
    fracs.push_back({id, numerator(r), denominator(r)});
  }
  return apportion_pairs(fracs, carried, total_constraint);
}

AllocationPlan allocate_step(const OstBudget& budget, const std::vector<JobInput>& jobs,
                             const AllocateOptions& opts) {
  if (jobs.empty()) {
    throw EmptyActiveSetError();
  }
  AllocationPlan plan;
  plan.interval_index = opts.interval_index;
  PhaseAllocation& ph = plan.phases;

  std::map<JobId, std::int64_t> demand;
  std::map<JobId, std::int64_t> record;
  std::map<JobId, Rational> carried;
  for (const auto& j : jobs) {
    if (j.remainder < 0 || j.remainder >= 1) {
      throw ContractViolation("job " + j.job_id + " remainder outside [0,1)");
    }
    demand[j.job_id] = j.demand;
    record[j.job_id] = j.record;
    carried[j.job_id] = j.remainder;
  }

  // Phase 1: priority-based initial allocation.
  ph.priority = compute_priorities(jobs);
  auto raw_initial = initial_allocation(budget, ph.priority);
  auto step1 = apply_remainders(raw_initial, carried, budget.floor_budget());
  ph.initial_alloc = step1.grants;

  for (const auto& j : jobs) {
    ph.utilization[j.job_id] = utilization_score(j.demand, j.prev_alloc);
  }

  // Phase 2: surplus redistribution.
  auto [surplus, total_surplus] = compute_surplus(ph.initial_alloc, demand);
  ph.surplus = surplus;
  ph.total_surplus = total_surplus;
  RationalSum factor_sum_acc;
  for (const auto& j : jobs) {
    Rational df = distribution_factor(ph.utilization[j.job_id], ph.priority[j.job_id]);
    factor_sum_acc.add(df);
    ph.distribution_factor[j.job_id] = std::move(df);
  }
  const Rational factor_sum = factor_sum_acc.value();
  ph.surplus_unredistributed = total_surplus > 0 && factor_sum == 0;

  std::map<JobId, Rational> rho;
  if (ph.surplus_unredistributed) {
    // Surplus returned to owners: allocations are already integers and the
    // credit lands on the record.
    for (const auto& j : jobs) {
      ph.redistributed_alloc[j.job_id] =
          ph.initial_alloc[j.job_id] - surplus.at(j.job_id);
      ph.record_redistributed[j.job_id] = j.record + surplus.at(j.job_id);
    }
    rho = step1.remainders;
  } else {
    // alloc' = (a0 - surplus) + df * total_surplus / factor_sum, built as one
    // unnormalized fraction per job and apportioned directly.
    std::int64_t initial_total = 0;
    const BigInt fs_num = numerator(factor_sum);
    const BigInt fs_den = denominator(factor_sum);
    std::vector<FracEntry> fracs;
    fracs.reserve(jobs.size());
    for (const auto& [id, a0] : ph.initial_alloc) {
      initial_total += a0;
      const std::int64_t base = a0 - surplus.at(id);
      FracEntry f;
      f.id = id;
      if (total_surplus == 0) {
        f.num = base;
        f.den = 1;
      } else {
        const Rational& df = ph.distribution_factor[id];
        f.den = denominator(df) * fs_num;
        f.num = numerator(df) * total_surplus * fs_den + base * f.den;
      }
      fracs.push_back(std::move(f));
    }
    auto step2 = apportion_pairs(fracs, step1.remainders, initial_total);
    ph.redistributed_alloc = step2.grants;
    rho = step2.remainders;
    // The integer record delta is exactly the integer token delta, which
    // keeps the lend/borrow ledger conserved after apportionment.
    for (const auto& j : jobs) {
      ph.record_redistributed[j.job_id] =
          j.record + (ph.initial_alloc[j.job_id] - ph.redistributed_alloc[j.job_id]);
    }
  }

  // Phase 3: re-compensation.
  auto [lenders, borrowers] = eligible_sets(record, ph.record_redistributed);
  ph.lenders = lenders;
  ph.borrowers = borrowers;
  ph.recompensated_alloc = ph.redistributed_alloc;
  ph.record_recompensated = ph.record_redistributed;
  for (const auto& id : borrowers) {
    ph.reclaim[id] = 0;
  }

  if (!lenders.empty() && !borrowers.empty()) {
    std::vector<LenderStats> stats;
    for (const auto& id : lenders) {
      auto fut = future_utilization(demand[id], ph.redistributed_alloc[id]);
      ph.future_utilization[id] = fut;
      stats.push_back({ph.priority[id], ph.utilization[id], fut});
    }
    ph.reclaim_coefficient = reclaim_coefficient(stats);
    const BigInt rc_num = numerator(ph.reclaim_coefficient);
    const BigInt rc_den = denominator(ph.reclaim_coefficient);

    std::int64_t total_reclaim = 0;
    for (const auto& id : borrowers) {
      std::int64_t bound = opts.reclaim_bound == ReclaimBoundMode::PreRedistribution
                               ? std::abs(record[id])
                               : std::abs(ph.record_redistributed[id]);
      std::int64_t by_alloc =
          floor_div(rc_num * ph.redistributed_alloc[id], rc_den).convert_to<std::int64_t>();
      // The coefficient can exceed 1 for badly over-demanding lenders; a
      // borrower still never hands back more than it currently holds.
      std::int64_t take = std::min({bound, by_alloc, ph.redistributed_alloc[id]});
      ph.reclaim[id] = take;
      total_reclaim += take;
      ph.recompensated_alloc[id] = ph.redistributed_alloc[id] - take;
      ph.record_recompensated[id] = ph.record_redistributed[id] + take;
    }
    ph.total_reclaim = total_reclaim;

    if (total_reclaim > 0) {
      RationalSum fsum;
      for (const auto& id : lenders) {
        fsum.add(ph.distribution_factor[id]);
      }
      Rational weight_sum = fsum.value();
      // All lenders idle: fall back to priority-proportional shares.
      const bool by_factor = weight_sum > 0;
      if (!by_factor) {
        RationalSum psum;
        for (const auto& id : lenders) {
          psum.add(ph.priority[id]);
        }
        weight_sum = psum.value();
      }
      const BigInt ws_num = numerator(weight_sum);
      const BigInt ws_den = denominator(weight_sum);
      std::map<JobId, Rational> carried_rc;
      std::vector<FracEntry> fracs;
      fracs.reserve(lenders.size());
      std::int64_t lender_total = 0;
      for (const auto& id : lenders) {
        // alloc + w / weight_sum * total_reclaim, one fraction per job.
        const Rational& w = by_factor ? ph.distribution_factor[id] : ph.priority[id];
        FracEntry f;
        f.id = id;
        f.den = denominator(w) * ws_num;
        f.num = numerator(w) * total_reclaim * ws_den + ph.redistributed_alloc[id] * f.den;
        fracs.push_back(std::move(f));
        carried_rc[id] = rho[id];
        lender_total += ph.redistributed_alloc[id];
      }
      auto step3 = apportion_pairs(fracs, carried_rc, lender_total + total_reclaim);
      for (const auto& id : lenders) {
        ph.recompensated_alloc[id] = step3.grants[id];
        rho[id] = step3.remainders[id];
        ph.record_recompensated[id] =
            ph.record_redistributed[id] -
            (ph.recompensated_alloc[id] - ph.redistributed_alloc[id]);
      }
    }
  }

  plan.grants = ph.recompensated_alloc;
  for (const auto& j : jobs) {
    plan.ledger_updates[j.job_id] = {ph.record_recompensated[j.job_id], rho[j.job_id]};
  }
  return plan;
}

}  // namespace adaptbf
