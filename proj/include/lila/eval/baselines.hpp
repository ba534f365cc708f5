#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lila/eval/report.hpp"
#include "lila/trainer/train.hpp"

namespace lila::eval {

enum class Baseline { none, solo_p, oracle_a, feedfwd_a, random };

inline Baseline parse_baseline(const std::string& s) {
  if (s == "none" || s.empty()) return Baseline::none;
  if (s == "solo-p") return Baseline::solo_p;
  if (s == "oracle-a") return Baseline::oracle_a;
  if (s == "feedfwd-a") return Baseline::feedfwd_a;
  if (s == "random") return Baseline::random;
  throw std::invalid_argument("unknown baseline '" + s + "' (expected solo-p, oracle-a, feedfwd-a or random)");
}

inline const char* baseline_name(Baseline b) {
  switch (b) {
    case Baseline::solo_p: return "solo-p";
    case Baseline::oracle_a: return "oracle-a";
    case Baseline::feedfwd_a: return "feedfwd-a";
    case Baseline::random: return "random";
    case Baseline::none: break;
  }
  return "none";
}

/// Game and architecture variants behind each baseline: the principal
/// alone, an assistant that is told the target, or an assistant without
/// memory.
inline std::pair<env::GameSpec, model::Architecture> baseline_setup(Baseline b, env::GameSpec spec,
                                                                     model::Architecture arch) {
  switch (b) {
    case Baseline::solo_p:
      spec.solo = true;
      arch.solo = true;
      break;
    case Baseline::oracle_a: spec.assistant_sees_target = env::TargetVisibility::always; break;
    case Baseline::feedfwd_a: arch.assistant_core = model::Core::feedforward; break;
    case Baseline::none:
    case Baseline::random: break;
  }
  return {spec, arch};
}

/// Both agents pick uniformly random actions.
inline std::vector<train::EpisodeRecord> random_episodes(const std::vector<env::TaskSpec>& tasks, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, env::kNumActions - 1);
  std::vector<train::EpisodeRecord> out;
  for (const auto& task : tasks) {
    train::EpisodeRecord r;
    r.task = task;
    auto s = env::initial_state(task);
    r.positions.push_back(s.pos);
    for (int t = 0; t < task.spec.horizon; ++t) {
      std::array<int, 2> a{pick(rng), task.spec.solo ? 0 : pick(rng)};
      r.actions.push_back(a);
      r.steps.push_back(env::advance(s, task, env::action_from_index(a[0]), env::action_from_index(a[1])));
      r.positions.push_back(s.pos);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline EvalReport random_report(const std::vector<env::TaskSpec>& tasks, std::uint64_t seed) {
  return make_report(random_episodes(tasks, seed));
}

/// Monte-Carlo estimate of the random policy's expected joint return over
/// freshly sampled tasks.
inline Stat random_baseline(const env::GameSpec& spec, int episodes, std::uint64_t seed) {
  if (episodes < 2) throw std::invalid_argument("random_baseline: need at least 2 episodes");
  std::mt19937_64 rng(seed);
  std::vector<env::TaskSpec> tasks;
  std::vector<double> joint;
  joint.reserve(episodes);
  constexpr int kChunk = 1000;
  for (int done = 0; done < episodes;) {
    tasks.clear();
    for (int i = 0; i < kChunk && done + i < episodes; ++i) tasks.push_back(env::sample_task(spec, rng()));
    for (const auto& r : random_episodes(tasks, rng())) joint.push_back(r.joint());
    done += static_cast<int>(tasks.size());
  }
  return summarize(joint);
}

/// Trains (unless random) and evaluates one baseline on the held-out tasks.
template <class T = float>
EvalReport run_baseline(Baseline b, const env::GameSpec& spec, const model::Architecture& arch,
                        const train::TrainConfig& cfg) {
  if (b == Baseline::none) throw std::invalid_argument("run_baseline: no baseline selected");
  auto [s, a] = baseline_setup(b, spec, arch);
  if (b == Baseline::random) return random_report(train::TaskDomain(s, cfg.eval_tasks).test(), cfg.seed);
  train::Trainer<T> trainer(s, a, cfg);
  trainer.run();
  return trainer.evaluate();
}

}  // namespace lila::eval
