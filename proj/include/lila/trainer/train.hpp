#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lila/eval/report.hpp"
#include "lila/numerics/adam.hpp"
#include "lila/trainer/loss.hpp"

namespace lila::train {

struct TrainConfig {
  int batch = 32;              // episodes per gradient step
  int steps = 20000;           // gradient steps
  double epsilon = 0.05;       // exploration during training
  double gamma = 0.9;
  std::uint64_t seed = 1;
  int eval_every = 1000;       // gradient steps between metrics records
  int eval_tasks = 100;        // held-out tasks per evaluation
  int checkpoint_every = 0;    // 0: only at the end
  num::AdamOptions adam;

  void validate() const {
    if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
    if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
    if (!(epsilon >= 0 && epsilon <= 1)) throw std::invalid_argument("TrainConfig: epsilon must lie in [0,1]");
    if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("TrainConfig: gamma must lie in [0,1]");
    if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
    if (eval_tasks < 1) throw std::invalid_argument("TrainConfig: eval_tasks must be >= 1");
    if (checkpoint_every < 0) throw std::invalid_argument("TrainConfig: checkpoint_every must be >= 0");
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed of the i-th held-out task. Fixed across runs so every seed is
/// evaluated on the same tasks.
inline std::uint64_t test_task_seed(int i) { return splitmix64(0x7e57'0000'0000'0000ull + static_cast<std::uint64_t>(i)); }

/// Held-out test tasks plus a sampler of training tasks that never
/// reproduces a test layout. A game whose whole task space is tiny (one fixed
/// object) trains and tests on the same enumerated set.
class TaskDomain {
 public:
  TaskDomain(env::GameSpec spec, int test_tasks) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.fixed_object) {
      finite_ = true;
      for (int i = 0, misses = 0; misses < 1000; ++i) {
        auto t = env::sample_task(spec_, test_task_seed(i));
        if (known(t)) {
          ++misses;
        } else {
          test_.push_back(std::move(t));
          misses = 0;
        }
      }
    } else {
      for (int i = 0; static_cast<int>(test_.size()) < test_tasks; ++i) {
        auto t = env::sample_task(spec_, test_task_seed(i));
        if (!known(t)) test_.push_back(std::move(t));
      }
    }
  }

  const env::GameSpec& spec() const { return spec_; }
  const std::vector<env::TaskSpec>& test() const { return test_; }
  bool train_equals_test() const { return finite_; }

  env::TaskSpec sample_train(Rng& rng) const {
    if (finite_) return test_[std::uniform_int_distribution<std::size_t>(0, test_.size() - 1)(rng)];
    for (;;) {
      auto t = env::sample_task(spec_, rng());
      if (!known(t)) return t;
    }
  }

 private:
  bool known(const env::TaskSpec& t) const {
    for (const auto& u : test_)
      if (u.same_layout(t)) return true;
    return false;
  }

  env::GameSpec spec_;
  std::vector<env::TaskSpec> test_;
  bool finite_ = false;
};

struct MetricsRecord {
  int step = 0;
  double loss = 0;  // mean batch loss since the previous record
  double eval_joint = 0, eval_p = 0, eval_a = 0;
  double wall_time = 0;  // seconds since the run started

  nlohmann::json to_json() const {
    return {{"step", step},       {"loss", loss},     {"eval_joint", eval_joint},
            {"eval_p", eval_p},   {"eval_a", eval_a}, {"wall_time", wall_time}};
  }
};

/// Fires once when evaluation joint reward drops below 0.1 after having
/// been above it.
class FailureDetector {
 public:
  static constexpr double kThreshold = 0.1;

  bool observe(double joint) {
    if (fired_) return false;
    if (joint > kThreshold) exceeded_ = true;
    if (exceeded_ && joint < kThreshold) fired_ = true;
    return fired_;
  }
  bool fired() const { return fired_; }

 private:
  bool exceeded_ = false;
  bool fired_ = false;
};

/// Index of the record at which the detector fires, or -1.
inline int failure_index(const std::vector<double>& eval_joint) {
  FailureDetector d;
  for (std::size_t i = 0; i < eval_joint.size(); ++i)
    if (d.observe(eval_joint[i])) return static_cast<int>(i);
  return -1;
}

struct InstabilityError : std::runtime_error {
  InstabilityError(int step, const std::string& what) : std::runtime_error(what), step(step) {}
  int step;
};

struct RunResult {
  bool halted = false;  // stopped on a non-finite loss or gradient
  int halt_step = -1;
  int failure_step = -1;  // first step at which the failure detector fired
  std::vector<MetricsRecord> metrics;
};

/// Batched episodic Q-learning for an agent pair: sample tasks, roll out
/// epsilon-greedily, one Adam step on the summed episode losses.
template <class T>
class Trainer {
 public:
  using CheckpointFn = std::function<void(const Trainer&)>;

  Trainer(env::GameSpec game, model::Architecture arch, TrainConfig cfg)
      : cfg_(cfg), net_(std::move(arch)), domain_(std::move(game), cfg.eval_tasks), rng_(splitmix64(cfg.seed)) {
    cfg_.validate();
    params_ = net_.init_params(splitmix64(cfg.seed ^ 0x5eedull));
    adam_.options = cfg_.adam;
  }

  const TrainConfig& config() const { return cfg_; }
  const model::AgentPair<T>& net() const { return net_; }
  const TaskDomain& domain() const { return domain_; }
  const num::ParamSet<T>& params() const { return params_; }
  const num::AdamState<T>& adam() const { return adam_; }
  int step() const { return step_; }

  std::string rng_state() const {
    std::ostringstream os;
    os << rng_;
    return os.str();
  }

  /// Resumes from saved state.
  void restore(num::ParamSet<T> params, num::AdamState<T> adam, int step, const std::string& rng_state) {
    if (params.size() != params_.size()) throw std::invalid_argument("Trainer::restore: parameter count mismatch");
    for (int i = 0; i < static_cast<int>(params.size()); ++i)
      if (params.name(i) != params_.name(i) || params[i].shape() != params_[i].shape())
        throw std::invalid_argument("Trainer::restore: parameter " + params.name(i) + " does not match");
    params_ = std::move(params);
    adam_ = std::move(adam);
    step_ = step;
    std::istringstream is(rng_state);
    is >> rng_;
    if (!is) throw std::invalid_argument("Trainer::restore: malformed RNG state");
  }

  /// One gradient step; returns the batch loss.
  T train_step() {
    std::vector<env::TaskSpec> tasks;
    tasks.reserve(cfg_.batch);
    for (int b = 0; b < cfg_.batch; ++b) tasks.push_back(domain_.sample_train(rng_));
    num::Tape<T> tape;
    auto p = num::bind(tape, params_, true);
    auto ro = rollout_on_tape(net_, p, tape, tasks, cfg_.epsilon, rng_);
    auto loss = bellman_loss(net_.arch(), ro.outputs, ro.records, cfg_.gamma);
    const T value = loss.value().item();
    if (!std::isfinite(static_cast<double>(value)))
      throw InstabilityError(step_ + 1, "non-finite loss at step " + std::to_string(step_ + 1));
    tape.backward(loss);
    try {
      num::adam_step(params_, num::collect_grads(tape, p), adam_);
    } catch (const std::domain_error& e) {
      throw InstabilityError(step_ + 1, std::string(e.what()) + " at step " + std::to_string(step_ + 1));
    }
    ++step_;
    return value;
  }

  eval::EvalReport evaluate() const { return eval::evaluate(net_, params_, domain_.test()); }

  /// Trains to cfg.steps, appending one JSON line per record to `metrics`.
  RunResult run(std::ostream* metrics = nullptr, const CheckpointFn& checkpoint = {}) {
    RunResult res;
    FailureDetector detector;
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0;
    int loss_count = 0;
    auto emit = [&](const nlohmann::json& j) {
      if (metrics) *metrics << j.dump() << '\n' << std::flush;
    };
    while (step_ < cfg_.steps) {
      try {
        loss_sum += static_cast<double>(train_step());
        ++loss_count;
      } catch (const InstabilityError& e) {
        res.halted = true;
        res.halt_step = e.step;
        emit({{"event", "instability"}, {"step", e.step}, {"message", e.what()}});
        return res;
      }
      if (step_ % cfg_.eval_every == 0 || step_ == cfg_.steps) {
        auto rep = evaluate();
        MetricsRecord m{step_, loss_count ? loss_sum / loss_count : 0.0, rep.joint.mean, rep.due_p.mean,
                        rep.due_a.mean,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
        loss_sum = 0;
        loss_count = 0;
        res.metrics.push_back(m);
        emit(m.to_json());
        if (detector.observe(m.eval_joint)) {
          res.failure_step = step_;
          emit({{"event", "failure"}, {"step", step_}, {"eval_joint", m.eval_joint}});
        }
      }
      if (checkpoint && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0 && step_ != cfg_.steps)
        checkpoint(*this);
    }
    if (checkpoint) checkpoint(*this);
    return res;
  }

 private:
  TrainConfig cfg_;
  model::AgentPair<T> net_;
  TaskDomain domain_;
  Rng rng_;
  num::ParamSet<T> params_;
  num::AdamState<T> adam_;
  int step_ = 0;
};

}  // namespace lila::train
