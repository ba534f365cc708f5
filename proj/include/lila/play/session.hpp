#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lila/eval/report.hpp"
#include "lila/eval/trace.hpp"
#include "lila/play/policy.hpp"
#include "lila/play/protocol.hpp"

namespace lila::play {

enum class Mode { with_assistant, solo };
enum class Phase { awaiting_start, in_episode, finished };

inline const char* mode_name(Mode m) { return m == Mode::solo ? "solo" : "with-assistant"; }
inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::awaiting_start: return "awaiting-start";
    case Phase::in_episode: return "in-episode";
    case Phase::finished: return "finished";
  }
  return "?";
}
inline Mode parse_mode(const std::string& s) {
  if (s == "with-assistant") return Mode::with_assistant;
  if (s == "solo") return Mode::solo;
  throw std::invalid_argument("unknown mode '" + s + "' (expected with-assistant or solo)");
}

struct SessionConfig {
  Mode mode = Mode::with_assistant;
  bool practice = false;      // practice episodes are played but not scored
  bool debug = false;         // adds every object and the assistant's view to frames
  int max_episodes = 0;       // scored episodes before the session finishes; 0 = unlimited
  std::uint64_t seed = 1;     // task seed stream
};

struct Scores {
  int episodes = 0;
  double joint = 0, due_p = 0, due_a = 0;

  nlohmann::json to_json() const { return {{"episodes", episodes}, {"joint", joint}, {"P", due_p}, {"A", due_a}}; }
};

/// Cells whose pixels fall inside a camera view centred on `viewer`.
inline bool in_camera(env::Cell c, env::Cell viewer) {
  const int half = env::kImageSize / 2, k = env::kCellPixels;
  const int ox = viewer.x * k + k / 2 - half, oy = viewer.y * k + k / 2 - half;
  return c.x * k + k > ox && c.x * k < ox + env::kImageSize && c.y * k + k > oy && c.y * k < oy + env::kImageSize;
}

/// One participant's game: a state machine driven by key presses. The
/// environment advances only when the principal's key arrives; the
/// assistant then acts greedily on its own observation.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const Model> model, SessionConfig cfg)
      : id_(std::move(id)), model_(std::move(model)), cfg_(cfg), assistant_(model_, env::kAssistant) {}

  const std::string& id() const { return id_; }
  Phase phase() const { return phase_; }
  Mode mode() const { return cfg_.mode; }
  const Scores& scores() const { return scores_; }
  /// Completed episodes in order, including practice ones.
  const std::vector<train::EpisodeRecord>& episodes() const { return done_; }
  const std::optional<train::EpisodeRecord>& current() const { return record_; }

  nlohmann::json welcome() const {
    return message("welcome", {{"session", id_},
                               {"protocol", kProtocolVersion},
                               {"mode", mode_name(cfg_.mode)},
                               {"practice", cfg_.practice},
                               {"phase", phase_name(phase_)},
                               {"horizon", model_->game.horizon},
                               {"fruits", {env::fruit_name(0), env::fruit_name(1)}}});
  }

  /// Handles one client message and returns the replies in order.
  std::vector<nlohmann::json> handle(const nlohmann::json& msg) {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
      return {rejected("malformed message", msg)};
    if (msg.contains("v") && msg["v"] != kProtocolVersion) return {rejected("unsupported protocol version", msg)};
    const std::string type = msg["type"];
    try {
      if (type == "key" && msg.contains("key") && msg["key"].is_string()) return handle_key(msg["key"]);
      if (type == "start_episode") {
        std::optional<std::uint64_t> seed;
        if (msg.contains("task_seed")) seed = msg["task_seed"].get<std::uint64_t>();
        return start(seed, msg);
      }
      if (type == "set_mode") {
        if (phase_ != Phase::awaiting_start) return {rejected("mode can only change between episodes", msg)};
        cfg_.mode = parse_mode(msg.at("mode").get<std::string>());
        return {welcome()};
      }
      if (type == "set_practice") {
        if (phase_ != Phase::awaiting_start) return {rejected("practice can only change between episodes", msg)};
        cfg_.practice = msg.at("practice").get<bool>();
        return {welcome()};
      }
      if (type == "set_debug") {
        cfg_.debug = msg.at("debug").get<bool>();
        return {welcome()};
      }
      if (type == "end_session") {
        if (phase_ == Phase::finished) return {rejected("session already finished", msg)};
        return {finish()};
      }
    } catch (const std::exception& e) {
      return {rejected(std::string("bad message: ") + e.what(), msg)};
    }
    return {rejected("unknown message type", msg)};
  }

  std::vector<nlohmann::json> handle_key(const std::string& key) {
    const nlohmann::json echo = {{"type", "key"}, {"key", key}};
    if (key == "Enter") return start(std::nullopt, echo);
    const int action = key_action(key);
    if (action < 0) return {rejected("unknown key", echo)};
    if (phase_ != Phase::in_episode) return {rejected("movement keys are only accepted during an episode", echo)};
    return step(action);
  }

  /// Drops an unfinished episode without scoring it, as on a disconnect.
  void abandon() {
    record_.reset();
    if (phase_ == Phase::in_episode) phase_ = Phase::awaiting_start;
  }

 private:
  nlohmann::json rejected(const std::string& reason, const nlohmann::json& msg) const {
    return message("rejected", {{"reason", reason}, {"message", msg}, {"phase", phase_name(phase_)}});
  }

  std::vector<nlohmann::json> start(std::optional<std::uint64_t> seed, const nlohmann::json& msg) {
    if (phase_ != Phase::awaiting_start) return {rejected("an episode can only start from awaiting-start", msg)};
    const std::uint64_t task_seed = seed ? *seed : train::splitmix64(cfg_.seed + stream_++);
    env::GameSpec game = model_->game;
    game.solo = cfg_.mode == Mode::solo;
    auto task = env::sample_task(game, task_seed);
    state_ = env::initial_state(task);
    assistant_.reset();
    record_ = train::EpisodeRecord{};
    record_->task = task;
    record_->positions.push_back(state_.pos);
    task_seed_ = task_seed;
    phase_ = Phase::in_episode;
    return {message("task_display", {{"episode", episode_index_},
                                     {"task_seed", task_seed},
                                     {"target", env::fruit_name(task.target)},
                                     {"target_class", task.target},
                                     {"practice", cfg_.practice},
                                     {"mode", mode_name(cfg_.mode)}}),
            frame(nullptr)};
  }

  std::vector<nlohmann::json> step(int principal_action) {
    auto& rec = *record_;
    int assistant_action = 0;
    if (!rec.task.spec.solo) assistant_action = assistant_.act(env::observe(state_, rec.task, env::kAssistant), rec.task.target);
    rec.obs.push_back(env::observe_all(state_, rec.task));
    rec.actions.push_back({principal_action, assistant_action});
    rec.steps.push_back(env::advance(state_, rec.task, env::action_from_index(principal_action),
                                     env::action_from_index(assistant_action)));
    rec.positions.push_back(state_.pos);
    std::vector<nlohmann::json> out{frame(&rec.steps.back())};
    if (rec.length() == rec.task.spec.horizon) out.push_back(end_episode());
    if (phase_ == Phase::finished) out.push_back(session_end());
    return out;
  }

  nlohmann::json frame(const env::Transition* last) {
    const auto& rec = *record_;
    const auto& task = rec.task;
    const bool solo = task.spec.solo;
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& c : task.spec.world_cells()) {
      const int cls = state_.object_at(c);
      if (cls < 0) continue;
      const bool visible = task.spec.window == env::Window::camera ? in_camera(c, state_.pos[env::kPrincipal])
                                                                  : env::cell_visible(task.spec, c, state_.pos[env::kPrincipal]);
      if (visible || cfg_.debug) objects.push_back({{"cell", c}, {"fruit", env::fruit_name(cls)}});
    }
    nlohmann::json body = {{"seq", seq_++},
                           {"episode", episode_index_},
                           {"step", rec.length()},
                           {"horizon", task.spec.horizon},
                           {"positions", {{"P", state_.pos[env::kPrincipal]},
                                          {"A", solo ? nlohmann::json(nullptr) : nlohmann::json(state_.pos[env::kAssistant])}}},
                           {"objects", objects},
                           {"episode_reward", {{"joint", rec.joint()}, {"P", rec.due(0)}, {"A", rec.due(1)}}},
                           {"view", encode_view(state_, task, env::kPrincipal)}};
    if (last) {
      const auto& a = rec.actions.back();
      body["last"] = {{"actions", {{"P", env::action_name(env::action_from_index(a[0]))},
                                   {"A", solo ? nlohmann::json(nullptr)
                                              : nlohmann::json(env::action_name(env::action_from_index(a[1])))}}},
                      {"reward", last->reward},
                      {"attributed", {{"P", last->attributed[0]}, {"A", last->attributed[1]}}},
                      {"collected", last->collected}};
    }
    if (cfg_.debug && !solo) body["assistant_view"] = encode_view(state_, task, env::kAssistant);
    return message("state_frame", body);
  }

  nlohmann::json end_episode() {
    auto rec = std::move(*record_);
    record_.reset();
    const bool scored = !cfg_.practice;
    if (scored) {
      ++scores_.episodes;
      scores_.joint += rec.joint();
      scores_.due_p += rec.due(0);
      scores_.due_a += rec.due(1);
    }
    auto summary = message("episode_summary", {{"episode", episode_index_},
                                               {"task_seed", task_seed_},
                                               {"practice", cfg_.practice},
                                               {"mode", mode_name(cfg_.mode)},
                                               {"joint", rec.joint()},
                                               {"P", rec.due(0)},
                                               {"A", rec.due(1)},
                                               {"scores", scores_.to_json()}});
    done_.push_back(std::move(rec));
    ++episode_index_;
    phase_ = scored && cfg_.max_episodes > 0 && scores_.episodes >= cfg_.max_episodes ? Phase::finished
                                                                                      : Phase::awaiting_start;
    return summary;
  }

  nlohmann::json session_end() const { return message("session_end", {{"scores", scores_.to_json()}}); }

  nlohmann::json finish() {
    abandon();
    phase_ = Phase::finished;
    return session_end();
  }

  std::string id_;
  std::shared_ptr<const Model> model_;
  SessionConfig cfg_;
  AgentDriver assistant_;
  Phase phase_ = Phase::awaiting_start;
  env::WorldState state_;
  std::optional<train::EpisodeRecord> record_;
  std::vector<train::EpisodeRecord> done_;
  Scores scores_;
  std::uint64_t stream_ = 0;
  std::uint64_t task_seed_ = 0;
  std::uint64_t seq_ = 0;
  int episode_index_ = 0;
};

}  // namespace lila::play
