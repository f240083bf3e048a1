#pragma once

#include <map>
#include <string>
#include <vector>

#include "adaptbf/scenario.hpp"
#include "adaptbf/scheduler.hpp"

namespace adaptbf {

// Deterministic arrival synthesis for one job: merged across its processes,
// time-sorted, seq-numbered, truncated at the volume cap or horizon.
std::vector<Rpc> generate_arrivals(const JobSpec& spec, double horizon_s, std::uint64_t seed);

// Ready-to-run evaluation scenarios at desk scale: "sc1" (priority
// proportionality under full contention), "sc2" (bursty high-priority jobs
// over a continuous low-priority stream), "sc3" (delayed continuous phases
// exercising the lend/repay cycle), "sc4-freq" (the sc3 workload, swept over
// allocation intervals by the CLI).
std::map<std::string, Scenario> builtin_scenarios();

std::vector<std::string> builtin_scenario_names();

}  // namespace adaptbf
