#pragma once

#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lila/env/serialize.hpp"
#include "lila/trainer/rollout.hpp"

namespace lila::eval {

inline constexpr const char* kTraceFormat = "lila-trace";
inline constexpr int kTraceVersion = 1;

/// Trace file: a header line
///   {"format":"lila-trace","version":1,"task":{...},"start":[[x,y],[x,y]],"steps":H}
/// followed by one line per step
///   {"t":0,"actions":[p,a],"positions":[[x,y],[x,y]],"reward":r,"attributed":[p,a],"collected":[...]}
/// where positions are after the step.
inline std::string export_trace(const train::EpisodeRecord& r) {
  std::ostringstream os;
  nlohmann::json header = {{"format", kTraceFormat},
                           {"version", kTraceVersion},
                           {"task", r.task},
                           {"start", r.positions.front()},
                           {"steps", r.length()}};
  os << header.dump() << '\n';
  for (int t = 0; t < r.length(); ++t) {
    const auto& s = r.steps[t];
    nlohmann::json line = {{"t", t},
                           {"actions", r.actions[t]},
                           {"positions", r.positions[t + 1]},
                           {"reward", s.reward},
                           {"attributed", s.attributed},
                           {"collected", s.collected}};
    os << line.dump() << '\n';
  }
  return os.str();
}

struct TraceCheck {
  bool ok = false;
  int step = -1;  // failing step, -1 for header problems or success
  std::string message;
  double joint = 0;
};

/// Re-simulates the trace's actions and checks every recorded quantity.
inline TraceCheck replay_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto fail = [](int step, std::string msg) {
    TraceCheck c;
    c.step = step;
    c.message = std::move(msg);
    return c;
  };
  if (!std::getline(in, line)) return fail(-1, "empty trace");
  env::TaskSpec task;
  int steps = 0;
  try {
    auto h = nlohmann::json::parse(line);
    if (h.at("format") != kTraceFormat) return fail(-1, "not a trace file");
    if (h.at("version") != kTraceVersion)
      return fail(-1, "unsupported trace version " + h.at("version").dump());
    task = h.at("task").get<env::TaskSpec>();
    steps = h.at("steps");
    auto s0 = env::initial_state(task);
    if (h.at("start").get<std::array<env::Cell, 2>>() != s0.pos) return fail(-1, "start positions differ from task");
  } catch (const std::exception& e) {
    return fail(-1, std::string("malformed header: ") + e.what());
  }
  if (steps != task.spec.horizon) return fail(-1, "trace has " + std::to_string(steps) + " steps, horizon is " +
                                                      std::to_string(task.spec.horizon));
  auto s = env::initial_state(task);
  TraceCheck ok;
  for (int t = 0; t < steps; ++t) {
    if (!std::getline(in, line)) return fail(t, "missing step " + std::to_string(t));
    try {
      auto j = nlohmann::json::parse(line);
      if (j.at("t") != t) return fail(t, "step index " + j.at("t").dump() + ", expected " + std::to_string(t));
      auto a = j.at("actions").get<std::array<int, 2>>();
      auto tr = env::advance(s, task, env::action_from_index(a[0]), env::action_from_index(a[1]));
      if (j.at("positions").get<std::array<env::Cell, 2>>() != s.pos) return fail(t, "positions differ at step " + std::to_string(t));
      if (j.at("reward").get<double>() != tr.reward) return fail(t, "reward differs at step " + std::to_string(t));
      if (j.at("attributed").get<std::array<double, 2>>() != tr.attributed)
        return fail(t, "attribution differs at step " + std::to_string(t));
      if (j.at("collected").get<std::vector<env::Collection>>() != tr.collected)
        return fail(t, "collected objects differ at step " + std::to_string(t));
      ok.joint += tr.reward;
    } catch (const std::exception& e) {
      return fail(t, "malformed step " + std::to_string(t) + ": " + e.what());
    }
  }
  if (std::getline(in, line) && !line.empty()) return fail(steps, "trailing data after the last step");
  ok.ok = true;
  return ok;
}

}  // namespace lila::eval
