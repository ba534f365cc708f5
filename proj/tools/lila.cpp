#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lila/eval/oracle.hpp"
#include "lila/play/client.hpp"
#include "lila/play/server.hpp"

using namespace lila;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kUsage = 1, kRuntime = 2, kInstability = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path out_dir_default(const std::string& leaf) {
  if (const char* env = std::getenv("LILA_OUT_DIR"); env && *env) return fs::path(env) / leaf;
  return fs::path("runs") / leaf;
}

std::string stat_str(const eval::Stat& s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << s.mean << " +- " << s.std;
  return os.str();
}

void print_report(const eval::EvalReport& r, std::ostream& os) {
  os << "episodes         " << r.episodes.size() << '\n'
     << "joint reward     " << stat_str(r.joint) << '\n'
     << "reward due to P  " << stat_str(r.due_p) << '\n'
     << "reward due to A  " << stat_str(r.due_a) << '\n'
     << "inference errors " << std::fixed << std::setprecision(3) << r.inference_error_rate << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

io::RunConfig build_config(const std::string& preset, const std::string& config_file, const std::string& scale,
                           const std::string& baseline, const std::vector<std::string>& sets, std::optional<std::uint64_t> seed) {
  io::RunConfig c;
  try {
    // A --preset comes before the file's own lines, so the file can override it.
    if (!config_file.empty())
      c = io::parse_config((preset.empty() ? "" : "preset = " + preset + "\n") + read_text(config_file));
    else
      c = io::preset_config(preset);
    if (!scale.empty()) io::apply_override(c, "scale", scale);
    if (!baseline.empty()) io::apply_override(c, "baseline", baseline);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw io::ConfigError("--set expects key=value, got '" + kv + "'");
      io::apply_override(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) c.train.seed = *seed;
    c.train.validate();
    c.game.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

int cmd_train(const std::string& preset, const std::string& config_file, const std::string& scale,
              const std::string& baseline, const std::vector<std::string>& sets, std::optional<std::uint64_t> seed,
              std::string out, const std::string& resume_from) {
  std::unique_ptr<train::Trainer<float>> trainer;
  io::RunConfig c;
  if (!resume_from.empty()) {
    trainer = io::resume(io::load_checkpoint(resume_from), &c);
    if (!preset.empty() || !config_file.empty() || !sets.empty() || seed)
      throw UsageError("--resume takes its configuration from the checkpoint");
  } else {
    if (preset.empty() && config_file.empty()) throw UsageError("train needs --preset or --config");
    c = build_config(preset, config_file, scale, baseline, sets, seed);
  }
  if (out.empty()) out = out_dir_default(c.preset + "-" + io::scale_name(c.scale) + "-s" + std::to_string(c.train.seed)).string();

  if (c.baseline == eval::Baseline::random) {
    auto rep = eval::random_report(train::TaskDomain(c.effective_game(), c.train.eval_tasks).test(), c.train.seed);
    fs::create_directories(out);
    write_text(fs::path(out) / "report.json", rep.to_json(true).dump(2) + "\n");
    print_report(rep, std::cout);
    return kOk;
  }

  std::cerr << "training preset " << c.preset << " (" << io::scale_name(c.scale) << ", " << c.train.steps
            << " steps, batch " << c.train.batch << ", seed " << c.train.seed << ") into " << out << '\n';
  auto result = io::train_into(c, out, trainer.get());
  if (result.result.halted) {
    std::cerr << "halted: non-finite loss or gradient at step " << result.result.halt_step << '\n';
    return kInstability;
  }
  auto final_trainer = io::resume(io::load_checkpoint(result.checkpoint));
  auto rep = final_trainer->evaluate();
  write_text(fs::path(out) / "report.json", rep.to_json(true).dump(2) + "\n");
  print_report(rep, std::cout);
  if (result.result.failure_step >= 0) {
    std::cerr << "failure: evaluation reward fell below " << train::FailureDetector::kThreshold << " at step "
              << result.result.failure_step << '\n';
    return kRuntime;
  }
  return kOk;
}

int cmd_eval(const std::string& ckpt, const std::string& preset, const std::string& baseline, int tasks, bool json,
             bool per_task, const std::string& out) {
  eval::EvalReport rep;
  if (!ckpt.empty()) {
    if (!baseline.empty()) throw UsageError("--baseline applies to evaluation without a checkpoint");
    io::RunConfig c;
    auto t = io::resume(io::load_checkpoint(ckpt), &c);
    rep = eval::evaluate(t->net(), t->params(), train::TaskDomain(c.effective_game(), tasks).test());
  } else {
    if (preset.empty() || baseline != "random") throw UsageError("eval needs --ckpt, or --preset with --baseline random");
    auto c = build_config(preset, "", "", baseline, {}, std::nullopt);
    rep = eval::random_report(train::TaskDomain(c.effective_game(), tasks).test(), c.train.seed);
  }
  const auto j = rep.to_json(per_task);
  if (!out.empty()) write_text(out, j.dump(2) + "\n");
  if (json) {
    std::cout << j.dump(2) << '\n';
  } else {
    print_report(rep, std::cout);
  }
  return kOk;
}

int cmd_trace(const std::string& ckpt, std::optional<std::uint64_t> task_seed, const std::string& out,
              const std::string& verify) {
  if (!verify.empty()) {
    auto check = eval::replay_trace(read_text(verify));
    if (!check.ok) {
      std::cerr << "trace does not replay: " << check.message << '\n';
      return kRuntime;
    }
    std::cout << "trace verified, joint reward " << check.joint << '\n';
    return kOk;
  }
  if (ckpt.empty() || !task_seed) throw UsageError("trace needs --ckpt and --task-seed (or --verify FILE)");
  io::RunConfig c;
  auto t = io::resume(io::load_checkpoint(ckpt), &c);
  train::Rng unused(0);
  auto rec = train::rollout(t->net(), t->params(), env::sample_task(c.effective_game(), *task_seed), 0.0, unused);
  const auto text = eval::export_trace(rec);
  if (out == "-") {
    std::cout << text;
  } else {
    const fs::path path = out.empty() ? out_dir_default("trace-" + std::to_string(*task_seed) + ".jsonl") : fs::path(out);
    write_text(path, text);
    std::cerr << "wrote " << path.string() << " (joint reward " << rec.joint() << ")\n";
  }
  return kOk;
}

int cmd_oracle(const std::string& spec, std::uint64_t task_seed, int horizon, double gamma, bool json) {
  env::TaskSpec task;
  if (fs::exists(spec)) {
    auto j = nlohmann::json::parse(read_text(spec));
    task = j.contains("spec") ? j.get<env::TaskSpec>() : env::sample_task(j.get<env::GameSpec>(), task_seed);
  } else {
    try {
      task = env::sample_task(env::preset_game(spec), task_seed);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string(e.what()) + "; --spec also accepts a JSON game or task file");
    }
  }
  if (horizon <= 0) horizon = std::min(task.spec.horizon, eval::kMaxOracleHorizon);
  eval::PlanResult r;
  try {
    r = eval::brute_force_return(task, horizon, gamma);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& a : r.actions)
    plan.push_back({env::action_name(env::action_from_index(a[0])), env::action_name(env::action_from_index(a[1]))});
  if (json) {
    std::cout << nlohmann::json{{"value", r.value}, {"horizon", horizon}, {"gamma", gamma}, {"sequences", r.sequences},
                                {"plan", plan}, {"task", task}}
                     .dump(2)
              << '\n';
  } else {
    std::cout << "optimal discounted return " << r.value << " over " << horizon << " steps (" << r.sequences
              << " joint sequences)\nplan (P, A): " << plan.dump() << '\n';
  }
  return kOk;
}

int cmd_serve(const std::string& ckpt, play::ServerOptions opt, const std::string& mode) {
  if (ckpt.empty()) throw UsageError("serve needs --ckpt");
  try {
    opt.session.mode = play::parse_mode(mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto model = play::Model::from_checkpoint(io::load_checkpoint(ckpt));
  play::PlayServer server(model, opt);
  std::cerr << "serving on http://" << opt.address << ":" << server.port() << "/ (websocket at /ws)\n";
  server.run();
  return kOk;
}

int cmd_play(const std::string& ckpt, const std::string& host, unsigned short port, int episodes,
             const std::string& mode, bool json) {
  if (ckpt.empty() || port == 0) throw UsageError("play needs --ckpt and --port");
  play::Mode m;
  try {
    m = play::parse_mode(mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto model = play::Model::from_checkpoint(io::load_checkpoint(ckpt));
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < episodes; ++i) seeds.push_back(train::test_task_seed(i));
  play::PlayClient client(host, port);
  auto run = play::scripted_principal(client, model, m, seeds);
  client.close();
  if (json) {
    std::cout << run.report.to_json(true).dump(2) << '\n';
  } else {
    print_report(run.report, std::cout);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lila: train, evaluate and play assistant/principal agent pairs"};
  app.require_subcommand(1);

  std::string preset, config_file, scale, baseline, out, resume_from, ckpt, verify, spec, mode = "with-assistant",
                                                                             host = "127.0.0.1";
  std::vector<std::string> sets;
  std::uint64_t seed_value = 1, task_seed_value = 0;
  int tasks = 100, horizon = 0, episodes = 100;
  double gamma = 0.9;
  bool json = false, per_task = false;
  unsigned short port = 0;
  play::ServerOptions serve_opt;
  std::string static_dir, log_dir;

  auto* train = app.add_subcommand("train", "train an agent pair and write metrics, checkpoints and a report");
  train->add_option("--preset", preset, "experiment preset: 1a, 1b, 2, 3 or 4");
  train->add_option("--config", config_file, "key = value config file");
  auto* seed_opt = train->add_option("--seed", seed_value, "training seed");
  train->add_option("--scale", scale, "desk or paper");
  train->add_option("--baseline", baseline, "solo-p, oracle-a, feedfwd-a or random");
  train->add_option("--set", sets, "override, key=value (repeatable)");
  train->add_option("--out", out, "output directory (default $LILA_OUT_DIR/<preset>-<scale>-s<seed>)");
  train->add_option("--resume", resume_from, "continue from a checkpoint");

  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint greedily on held-out tasks");
  evalc->add_option("--ckpt", ckpt, "checkpoint file");
  evalc->add_option("--tasks", tasks, "number of held-out tasks")->check(CLI::PositiveNumber);
  evalc->add_option("--preset", preset, "preset for --baseline random");
  evalc->add_option("--baseline", baseline, "random: evaluate uniformly random agents");
  evalc->add_option("--out", out, "also write the report to this JSON file");
  evalc->add_flag("--json", json, "print JSON");
  evalc->add_flag("--per-task", per_task, "include per-task rows in JSON output");

  auto* trace = app.add_subcommand("trace", "export or verify an episode trace");
  trace->add_option("--ckpt", ckpt, "checkpoint file");
  auto* task_seed_opt = trace->add_option("--task-seed", task_seed_value, "task to play");
  trace->add_option("--out", out, "trace file, '-' for stdout (default $LILA_OUT_DIR/trace-<seed>.jsonl)");
  trace->add_option("--verify", verify, "replay a trace file and check every step");

  auto* oracle = app.add_subcommand("oracle", "exact best joint return of a small task by enumeration");
  oracle->add_option("--spec", spec, "preset name or JSON game/task file (at most 3x3, 3 objects)")->required();
  oracle->add_option("--task-seed", task_seed_value, "task seed when sampling from a game");
  oracle->add_option("--horizon", horizon, "steps to plan (default min(horizon, 4))");
  oracle->add_option("--gamma", gamma, "discount")->check(CLI::Range(0.0, 1.0));
  oracle->add_flag("--json", json, "print JSON");

  auto* serve = app.add_subcommand("serve", "serve live play sessions over WebSocket and static files over HTTP");
  serve->add_option("--ckpt", ckpt, "checkpoint whose assistant plays")->required();
  serve->add_option("--port", serve_opt.port, "port (0 picks one)");
  serve->add_option("--address", serve_opt.address, "bind address");
  serve->add_option("--static", static_dir, "directory of UI assets");
  serve->add_option("--log-dir", log_dir, "write one trace per completed episode");
  serve->add_option("--seed", serve_opt.seed, "task seed stream");
  serve->add_option("--threads", serve_opt.threads, "I/O threads")->check(CLI::PositiveNumber);
  serve->add_option("--mode", mode, "default session mode: with-assistant or solo");
  serve->add_option("--episodes", serve_opt.session.max_episodes, "scored episodes per session (0: unlimited)");
  serve->add_flag("--debug", serve_opt.session.debug, "add hidden objects and the assistant view to frames");

  auto* playc = app.add_subcommand("play", "drive a running server with a checkpoint's principal");
  playc->add_option("--ckpt", ckpt, "checkpoint whose principal plays")->required();
  playc->add_option("--host", host, "server host");
  playc->add_option("--port", port, "server port")->required();
  playc->add_option("--episodes", episodes, "episodes, on the held-out task seeds")->check(CLI::PositiveNumber);
  playc->add_option("--mode", mode, "with-assistant or solo");
  playc->add_flag("--json", json, "print JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed())
      return cmd_train(preset, config_file, scale, baseline, sets,
                       seed_opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt, out, resume_from);
    if (evalc->parsed()) return cmd_eval(ckpt, preset, baseline, tasks, json, per_task, out);
    if (trace->parsed())
      return cmd_trace(ckpt, task_seed_opt->count() ? std::optional<std::uint64_t>(task_seed_value) : std::nullopt, out,
                       verify);
    if (oracle->parsed()) return cmd_oracle(spec, task_seed_value, horizon, gamma, json);
    if (serve->parsed()) {
      serve_opt.static_dir = static_dir;
      serve_opt.log_dir = log_dir;
      return cmd_serve(ckpt, serve_opt, mode);
    }
    if (playc->parsed()) return cmd_play(ckpt, host, port, episodes, mode, json);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const train::InstabilityError& e) {
    std::cerr << "halted: " << e.what() << '\n';
    return kInstability;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
