#pragma once

// Straight-line reference allocator used as the test oracle. Written
// independently of the library implementation: one pass, explicit vectors,
// no shared helpers beyond the Rational type. Keep it dumb on purpose.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adaptbf/rational.hpp"

namespace refalloc {

using adaptbf::Rational;

struct Job {
  std::string id;
  std::int64_t nodes = 1;
  std::int64_t demand = 0;
  std::optional<std::int64_t> prev_alloc;
  std::int64_t record = 0;
  Rational rho = 0;
};

struct Result {
  std::map<std::string, std::int64_t> grants;
  std::map<std::string, std::int64_t> records;
  std::map<std::string, Rational> remainders;
};

// Largest-remainder apportionment over a subset of jobs. rho is carried in,
// updated in place. Tie-break: largest working remainder, then smallest id.
inline void lr_apportion(std::vector<std::string>& ids, std::vector<Rational>& raw,
                         std::vector<Rational>& rho, std::vector<std::int64_t>& grants,
                         std::int64_t constraint) {
  std::size_t n = ids.size();
  grants.assign(n, 0);
  std::vector<Rational> work(n);
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Rational s = raw[i] + rho[i];
    std::int64_t g = adaptbf::floor_to_i64(s);
    grants[i] = g;
    work[i] = s - g;
    sum += g;
  }
  while (sum != constraint) {
    bool add = sum < constraint;
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!add && grants[i] <= 0) continue;  // never dock below zero
      if (best == n || work[i] > work[best] ||
          (work[i] == work[best] && ids[i] < ids[best])) {
        best = i;
      }
    }
    if (add) {
      grants[best] += 1;
      work[best] -= 1;
      sum += 1;
    } else {
      grants[best] -= 1;
      work[best] += 1;
      sum -= 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (work[i] < 0) {
      rho[i] = 0;
    } else if (work[i] >= 1) {
      rho[i] = adaptbf::frac(work[i]);
    } else {
      rho[i] = work[i];
    }
  }
}

inline Result reference_allocate(std::int64_t max_token_rate, std::int64_t interval_ms,
                                 std::vector<Job> jobs, bool bound_by_post_rd = false) {
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.id < b.id; });
  std::size_t n = jobs.size();
  std::vector<std::string> ids(n);
  std::vector<Rational> rho(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = jobs[i].id;
    rho[i] = jobs[i].rho;
  }

  Rational budget = Rational(max_token_rate * interval_ms, 1000);
  std::int64_t budget_floor = adaptbf::floor_to_i64(budget);

  // Step 1: priorities and initial allocation.
  std::int64_t node_sum = 0;
  for (auto& j : jobs) node_sum += j.nodes;
  std::vector<Rational> p(n);
  std::vector<Rational> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = Rational(jobs[i].nodes, node_sum);
    raw[i] = budget * p[i];
  }
  std::vector<std::int64_t> a0;
  lr_apportion(ids, raw, rho, a0, budget_floor);

  // Utilization and distribution factors.
  std::vector<Rational> u(n), df(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!jobs[i].prev_alloc || *jobs[i].prev_alloc == 0) {
      u[i] = jobs[i].demand > 0 ? 1 : 0;
    } else {
      u[i] = Rational(jobs[i].demand, *jobs[i].prev_alloc);
    }
    df[i] = u[i] > 1 ? Rational(u[i] + u[i] * p[i]) : Rational(u[i] * p[i]);
  }

  // Step 2: surplus redistribution.
  std::vector<std::int64_t> ts(n);
  std::int64_t ts_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = std::max<std::int64_t>(0, a0[i] - jobs[i].demand);
    ts_total += ts[i];
  }
  Rational df_sum = 0;
  for (std::size_t i = 0; i < n; ++i) df_sum += df[i];

  std::vector<std::int64_t> a_rd(n);
  std::vector<std::int64_t> r_rd(n);
  if (ts_total > 0 && df_sum == 0) {
    for (std::size_t i = 0; i < n; ++i) {
      a_rd[i] = a0[i] - ts[i];
      r_rd[i] = jobs[i].record + ts[i];
    }
  } else {
    std::vector<Rational> raw_rd(n);
    for (std::size_t i = 0; i < n; ++i) {
      Rational share = ts_total > 0 ? df[i] / df_sum * ts_total : Rational(0);
      raw_rd[i] = Rational(a0[i] - ts[i]) + share;
    }
    std::int64_t a0_sum = 0;
    for (auto v : a0) a0_sum += v;
    lr_apportion(ids, raw_rd, rho, a_rd, a0_sum);
    for (std::size_t i = 0; i < n; ++i) {
      r_rd[i] = jobs[i].record + (a0[i] - a_rd[i]);
    }
  }

  // Step 3: re-compensation.
  std::vector<std::size_t> plus, minus;
  for (std::size_t i = 0; i < n; ++i) {
    if (jobs[i].record > 0 && r_rd[i] > 0) plus.push_back(i);
    if (jobs[i].record < 0 && r_rd[i] < 0) minus.push_back(i);
  }
  std::vector<std::int64_t> a_rc = a_rd;
  std::vector<std::int64_t> r_rc = r_rd;
  if (!plus.empty() && !minus.empty()) {
    Rational c = 0;
    for (auto i : plus) {
      Rational cur = u[i] > 1 ? u[i] : Rational(1);
      Rational fut = 0;
      if (a_rd[i] > 0) {
        Rational ubar = Rational(jobs[i].demand, a_rd[i]);
        if (ubar < 1) fut = 1 - ubar;
      }
      c += p[i] * (cur + fut) / 2;
    }
    std::int64_t tr_total = 0;
    for (auto i : minus) {
      std::int64_t bound = bound_by_post_rd ? -r_rd[i] : -jobs[i].record;
      std::int64_t take = std::min({bound, adaptbf::floor_to_i64(c * a_rd[i]), a_rd[i]});
      a_rc[i] = a_rd[i] - take;
      r_rc[i] = r_rd[i] + take;
      tr_total += take;
    }
    if (tr_total > 0) {
      Rational df_plus = 0;
      for (auto i : plus) df_plus += df[i];
      Rational p_plus = 0;
      for (auto i : plus) p_plus += p[i];
      std::vector<std::string> pids;
      std::vector<Rational> praw, prho;
      std::int64_t base = 0;
      for (auto i : plus) {
        Rational w = df_plus > 0 ? df[i] / df_plus : p[i] / p_plus;
        pids.push_back(ids[i]);
        praw.push_back(Rational(a_rd[i]) + w * tr_total);
        prho.push_back(rho[i]);
        base += a_rd[i];
      }
      std::vector<std::int64_t> pg;
      lr_apportion(pids, praw, prho, pg, base + tr_total);
      for (std::size_t k = 0; k < plus.size(); ++k) {
        std::size_t i = plus[k];
        a_rc[i] = pg[k];
        rho[i] = prho[k];
        r_rc[i] = r_rd[i] - (a_rc[i] - a_rd[i]);
      }
    }
  }

  Result out;
  for (std::size_t i = 0; i < n; ++i) {
    out.grants[ids[i]] = a_rc[i];
    out.records[ids[i]] = r_rc[i];
    out.remainders[ids[i]] = rho[i];
  }
  return out;
}

}  // namespace refalloc
