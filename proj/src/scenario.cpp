#include "adaptbf/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace adaptbf {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw ValidationError("unknown key '" + path + key + "'");
    }
  }
}

ProcessPattern parse_process(const json& p, const std::string& path) {
  std::string type = p.at("type").get<std::string>();
  if (type == "continuous") {
    reject_unknown(p, {"type", "rate_rpc_s", "start_delay_s", "jitter"}, path);
    ContinuousPattern c;
    c.rate_rpc_s = p.at("rate_rpc_s").get<double>();
    c.start_delay_s = p.value("start_delay_s", 0.0);
    c.jitter = p.value("jitter", false);
    return c;
  }
  if (type == "periodic_burst") {
    reject_unknown(p, {"type", "burst_rpcs", "interval_s", "phase_s", "spacing_ms"}, path);
    PeriodicBurstPattern b;
    b.burst_rpcs = p.at("burst_rpcs").get<std::int64_t>();
    b.interval_s = p.at("interval_s").get<double>();
    b.phase_s = p.value("phase_s", 0.0);
    b.spacing_ms = p.value("spacing_ms", 0.0);
    return b;
  }
  throw ValidationError("unknown process type '" + type + "' at " + path + "type");
}

}  // namespace

const char* mode_name(ControllerMode mode) {
  switch (mode) {
    case ControllerMode::AdapTbf:
      return "adaptbf";
    case ControllerMode::StaticBw:
      return "static";
    case ControllerMode::NoBw:
      return "nobw";
  }
  return "?";
}

ControllerMode mode_from_name(const std::string& name) {
  if (name == "adaptbf") return ControllerMode::AdapTbf;
  if (name == "static") return ControllerMode::StaticBw;
  if (name == "nobw") return ControllerMode::NoBw;
  throw ValidationError("unknown mode '" + name + "' (expected adaptbf|static|nobw)");
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario parse error: ") + e.what());
  }
  reject_unknown(doc,
                 {"name", "ost", "controller", "jobs", "duration_s", "seed",
                  "metrics_interval_ms", "output"},
                 "");

  Scenario sc;
  sc.name = doc.value("name", "");
  sc.duration_s = doc.at("duration_s").get<double>();
  sc.seed = doc.value("seed", 0);
  sc.metrics_interval_ms = doc.value("metrics_interval_ms", 100);

  const json& ost = doc.at("ost");
  reject_unknown(ost,
                 {"max_token_rate", "thread_count", "per_rpc_service_time_ms", "bucket_depth"},
                 "ost.");
  sc.ost.max_token_rate = ost.at("max_token_rate").get<std::int64_t>();
  sc.ost.thread_count = ost.at("thread_count").get<int>();
  sc.ost.per_rpc_service_time_ms = ost.at("per_rpc_service_time_ms").get<double>();
  sc.ost.bucket_depth = ost.value("bucket_depth", 3.0);

  if (doc.contains("controller")) {
    const json& c = doc.at("controller");
    reject_unknown(c, {"mode", "interval_ms", "eviction_k", "reclaim_bound_mode"},
                   "controller.");
    sc.controller.mode = mode_from_name(c.value("mode", "adaptbf"));
    sc.controller.interval_ms = c.value("interval_ms", 100);
    sc.controller.eviction_k = c.value("eviction_k", 50);
    std::string rb = c.value("reclaim_bound_mode", "pre");
    if (rb == "pre") {
      sc.controller.reclaim_bound = ReclaimBoundMode::PreRedistribution;
    } else if (rb == "post") {
      sc.controller.reclaim_bound = ReclaimBoundMode::PostRedistribution;
    } else {
      throw ValidationError("controller.reclaim_bound_mode must be 'pre' or 'post'");
    }
  }

  std::size_t i = 0;
  for (const json& j : doc.at("jobs")) {
    std::string path = "jobs[" + std::to_string(i) + "].";
    reject_unknown(j, {"job_id", "nodes", "start_s", "processes", "total_volume_tokens"}, path);
    JobSpec spec;
    spec.job_id = j.at("job_id").get<std::string>();
    spec.nodes = j.at("nodes").get<std::int64_t>();
    spec.start_s = j.value("start_s", 0.0);
    if (j.contains("total_volume_tokens") && !j.at("total_volume_tokens").is_null()) {
      spec.total_volume_tokens = j.at("total_volume_tokens").get<std::int64_t>();
    }
    std::size_t k = 0;
    for (const json& p : j.at("processes")) {
      spec.processes.push_back(parse_process(p, path + "processes[" + std::to_string(k) + "]."));
      ++k;
    }
    sc.jobs.push_back(std::move(spec));
    ++i;
  }

  if (doc.contains("output")) {
    const json& o = doc.at("output");
    reject_unknown(o, {"dir"}, "output.");
    if (o.contains("dir")) {
      sc.output_dir = o.at("dir").get<std::string>();
    }
  }

  validate_scenario(sc);
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("file not found: " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const Scenario& sc) {
  json doc;
  doc["name"] = sc.name;
  doc["duration_s"] = sc.duration_s;
  doc["seed"] = sc.seed;
  doc["metrics_interval_ms"] = sc.metrics_interval_ms;
  doc["ost"] = {{"max_token_rate", sc.ost.max_token_rate},
                {"thread_count", sc.ost.thread_count},
                {"per_rpc_service_time_ms", sc.ost.per_rpc_service_time_ms},
                {"bucket_depth", sc.ost.bucket_depth}};
  doc["controller"] = {
      {"mode", mode_name(sc.controller.mode)},
      {"interval_ms", sc.controller.interval_ms},
      {"eviction_k", sc.controller.eviction_k},
      {"reclaim_bound_mode",
       sc.controller.reclaim_bound == ReclaimBoundMode::PreRedistribution ? "pre" : "post"}};
  doc["jobs"] = json::array();
  for (const auto& j : sc.jobs) {
    json job;
    job["job_id"] = j.job_id;
    job["nodes"] = j.nodes;
    job["start_s"] = j.start_s;
    if (j.total_volume_tokens) {
      job["total_volume_tokens"] = *j.total_volume_tokens;
    }
    job["processes"] = json::array();
    for (const auto& p : j.processes) {
      if (const auto* c = std::get_if<ContinuousPattern>(&p)) {
        job["processes"].push_back({{"type", "continuous"},
                                    {"rate_rpc_s", c->rate_rpc_s},
                                    {"start_delay_s", c->start_delay_s},
                                    {"jitter", c->jitter}});
      } else {
        const auto& b = std::get<PeriodicBurstPattern>(p);
        job["processes"].push_back({{"type", "periodic_burst"},
                                    {"burst_rpcs", b.burst_rpcs},
                                    {"interval_s", b.interval_s},
                                    {"phase_s", b.phase_s},
                                    {"spacing_ms", b.spacing_ms}});
      }
    }
    doc["jobs"].push_back(std::move(job));
  }
  return doc.dump(2);
}

void validate_scenario(const Scenario& sc) {
  if (sc.ost.max_token_rate <= 0) {
    throw ValidationError("ost.max_token_rate must be positive");
  }
  if (sc.ost.thread_count <= 0) {
    throw ValidationError("ost.thread_count must be positive");
  }
  if (sc.ost.per_rpc_service_time_ms <= 0) {
    throw ValidationError("ost.per_rpc_service_time_ms must be positive");
  }
  if (sc.controller.interval_ms < 1) {
    throw ValidationError("controller.interval_ms must be >= 1");
  }
  OstBudget budget{sc.ost.max_token_rate, sc.controller.interval_ms};
  if (budget.floor_budget() < 1) {
    throw ValidationError("ost budget must grant at least one token per interval");
  }
  if (sc.duration_s <= 0) {
    throw ValidationError("duration_s must be positive");
  }
  std::set<JobId> seen;
  for (const auto& j : sc.jobs) {
    if (!seen.insert(j.job_id).second) {
      throw ValidationError("duplicate job_id '" + j.job_id + "'");
    }
    if (j.nodes < 1) {
      throw ValidationError("jobs." + j.job_id + ".nodes must be >= 1");
    }
    if (j.processes.empty()) {
      throw ValidationError("jobs." + j.job_id + ".processes must not be empty");
    }
    if (j.total_volume_tokens && *j.total_volume_tokens <= 0) {
      throw ValidationError("jobs." + j.job_id + ".total_volume_tokens must be positive");
    }
    if (j.start_s >= sc.duration_s) {
      throw ValidationError("jobs." + j.job_id + ".start_s must fall inside duration_s");
    }
    for (const auto& p : j.processes) {
      if (const auto* c = std::get_if<ContinuousPattern>(&p)) {
        if (c->rate_rpc_s <= 0) {
          throw ValidationError("jobs." + j.job_id + ": continuous rate_rpc_s must be positive");
        }
        if (c->start_delay_s < 0) {
          throw ValidationError("jobs." + j.job_id + ": start_delay_s must be >= 0");
        }
      } else {
        const auto& b = std::get<PeriodicBurstPattern>(p);
        if (b.burst_rpcs <= 0 || b.interval_s <= 0) {
          throw ValidationError("jobs." + j.job_id +
                                ": burst_rpcs and interval_s must be positive");
        }
        if (b.phase_s < 0 || b.spacing_ms < 0) {
          throw ValidationError("jobs." + j.job_id + ": phase_s/spacing_ms must be >= 0");
        }
      }
    }
  }
}

}  // namespace adaptbf
