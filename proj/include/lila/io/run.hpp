#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "lila/io/checkpoint.hpp"
#include "lila/io/config.hpp"

namespace lila::io {

inline std::unique_ptr<train::Trainer<float>> make_trainer(const RunConfig& c) {
  return std::make_unique<train::Trainer<float>>(c.effective_game(), c.architecture(), c.train);
}

inline Checkpoint snapshot(const train::Trainer<float>& t, const RunConfig& c) {
  Checkpoint k;
  k.arch = t.net().arch();
  k.config = to_json(c);
  k.seed = c.train.seed;
  k.step = t.step();
  k.rng_state = t.rng_state();
  k.params = t.params();
  k.adam = t.adam();
  return k;
}

/// Rebuilds a trainer from a checkpoint alone, ready to continue or evaluate.
inline std::unique_ptr<train::Trainer<float>> resume(const Checkpoint& k, RunConfig* config_out = nullptr) {
  auto c = run_config_from_json(k.config);
  if (!(c.architecture() == k.arch))
    throw CheckpointError(CheckpointError::Kind::architecture,
                          "checkpoint: stored architecture does not match its own config snapshot");
  auto t = make_trainer(c);
  t->restore(k.params, k.adam, static_cast<int>(k.step), k.rng_state);
  if (config_out) *config_out = c;
  return t;
}

struct TrainOutcome {
  train::RunResult result;
  std::filesystem::path metrics, checkpoint;
};

/// Trains into `dir`: metrics.jsonl, config.json and checkpoint.bin (plus
/// checkpoint-<step>.bin at the configured cadence).
inline TrainOutcome train_into(const RunConfig& c, const std::filesystem::path& dir,
                               train::Trainer<float>* existing = nullptr) {
  std::filesystem::create_directories(dir);
  TrainOutcome out;
  out.metrics = dir / "metrics.jsonl";
  out.checkpoint = dir / "checkpoint.bin";
  {
    std::ofstream cfg(dir / "config.json");
    cfg << to_json(c).dump(2) << '\n';
  }
  std::unique_ptr<train::Trainer<float>> owned;
  if (!existing) owned = make_trainer(c);
  auto& t = existing ? *existing : *owned;
  std::ofstream metrics(out.metrics, existing ? std::ios::app : std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + out.metrics.string());
  out.result = t.run(&metrics, [&](const train::Trainer<float>& tr) {
    auto k = snapshot(tr, c);
    if (tr.step() != c.train.steps) save_checkpoint(k, dir / ("checkpoint-" + std::to_string(tr.step()) + ".bin"));
    save_checkpoint(k, out.checkpoint);
  });
  return out;
}

}  // namespace lila::io
