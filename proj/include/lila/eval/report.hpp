#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "lila/trainer/rollout.hpp"

namespace lila::eval {

struct Stat {
  double mean = 0;
  double std = 0;  // sample standard deviation; 0 for a single value
};

inline Stat summarize(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("summarize: no values");
  Stat s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct EpisodeScore {
  int target = 0;
  double joint = 0;
  double due_p = 0;
  double due_a = 0;
  bool inference_error = false;
};

/// Assistant collected at least one object and none of them was the target.
inline bool inference_error(const train::EpisodeRecord& r) {
  int collected = 0, correct = 0;
  for (const auto& s : r.steps)
    for (const auto& c : s.collected)
      if (c.by != env::Collector::principal) {
        ++collected;
        correct += c.cls == r.task.target;
      }
  return collected > 0 && correct == 0;
}

inline EpisodeScore score(const train::EpisodeRecord& r) {
  return {r.task.target, r.joint(), r.due(env::kPrincipal), r.due(env::kAssistant), inference_error(r)};
}

struct EvalReport {
  Stat joint, due_p, due_a;
  double inference_error_rate = 0;
  std::vector<EpisodeScore> episodes;

  nlohmann::json to_json(bool with_episodes = false) const {
    nlohmann::json j = {{"episodes", episodes.size()},
                        {"joint", {{"mean", joint.mean}, {"std", joint.std}}},
                        {"due_p", {{"mean", due_p.mean}, {"std", due_p.std}}},
                        {"due_a", {{"mean", due_a.mean}, {"std", due_a.std}}},
                        {"inference_error_rate", inference_error_rate}};
    if (with_episodes) {
      auto& arr = j["per_task"] = nlohmann::json::array();
      for (const auto& e : episodes)
        arr.push_back({{"target", e.target}, {"joint", e.joint}, {"due_p", e.due_p}, {"due_a", e.due_a},
                       {"inference_error", e.inference_error}});
    }
    return j;
  }
};

inline EvalReport make_report(const std::vector<train::EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("evaluate: empty task set");
  EvalReport rep;
  std::vector<double> j, p, a;
  int errors = 0;
  for (const auto& r : records) {
    rep.episodes.push_back(score(r));
    j.push_back(rep.episodes.back().joint);
    p.push_back(rep.episodes.back().due_p);
    a.push_back(rep.episodes.back().due_a);
    errors += rep.episodes.back().inference_error;
  }
  rep.joint = summarize(j);
  rep.due_p = summarize(p);
  rep.due_a = summarize(a);
  rep.inference_error_rate = static_cast<double>(errors) / static_cast<double>(records.size());
  return rep;
}

/// Greedy rollouts of the pair on every task.
template <class T>
EvalReport evaluate(const model::AgentPair<T>& net, const num::ParamSet<T>& params,
                    const std::vector<env::TaskSpec>& tasks) {
  if (tasks.empty()) throw std::invalid_argument("evaluate: empty task set");
  train::Rng unused(0);
  return make_report(train::rollout_batch(net, params, tasks, 0.0, unused));
}

}  // namespace lila::eval
