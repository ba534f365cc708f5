#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lila/io/run.hpp"

using namespace lila;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lila_io_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

io::RunConfig tiny(const std::string& preset = "1a") {
  auto c = io::preset_config(preset);
  c.train.batch = 2;
  c.train.steps = 4;
  c.train.eval_every = 2;
  c.train.eval_tasks = 5;
  return c;
}

io::Checkpoint trained_checkpoint(const io::RunConfig& c) {
  auto t = io::make_trainer(c);
  t->run();
  return io::snapshot(*t, c);
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

io::CheckpointError::Kind load_error(const fs::path& p, const model::Architecture* expected = nullptr) {
  try {
    io::load_checkpoint(p, expected);
  } catch (const io::CheckpointError& e) {
    return e.kind;
  }
  ADD_FAILURE() << "load succeeded";
  return io::CheckpointError::Kind::io;
}

}  // namespace

TEST(Checkpoint, SaveLoadIsBitIdentical) {
  auto k = trained_checkpoint(tiny());
  ASSERT_EQ(k.adam.m.size(), k.params.size());
  auto path = scratch("roundtrip") / "c.bin";
  io::save_checkpoint(k, path);
  auto back = io::load_checkpoint(path);
  EXPECT_TRUE(back == k);
  for (int i = 0; i < static_cast<int>(k.params.size()); ++i)
    EXPECT_EQ(std::memcmp(back.params[i].data(), k.params[i].data(), k.params[i].size() * sizeof(float)), 0);
  EXPECT_EQ(io::encode_checkpoint(back), read_bytes(path));
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
}

TEST(Checkpoint, TensorsAreLittleEndianFloat32) {
  io::Checkpoint k;
  k.arch = model::maidrqn_bits(env::preset_game("1a"));
  k.config = {{"x", 1}};
  num::Tensor<float> t({2});
  t.values() = {1.0f, -2.5f};
  k.params.add("w", t);
  auto bytes = io::encode_checkpoint(k);
  const unsigned char one[] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0};
  EXPECT_NE(std::search(bytes.begin(), bytes.end(), one, one + 8), bytes.end());
}

TEST(Checkpoint, TruncatedFileFailsChecksum) {
  auto dir = scratch("truncated");
  io::save_checkpoint(trained_checkpoint(tiny()), dir / "c.bin");
  auto b = read_bytes(dir / "c.bin");
  b.resize(b.size() - 100);
  write_bytes(dir / "cut.bin", b);
  EXPECT_EQ(load_error(dir / "cut.bin"), io::CheckpointError::Kind::checksum);
}

TEST(Checkpoint, FlippedBitFailsChecksum) {
  auto dir = scratch("flipped");
  io::save_checkpoint(trained_checkpoint(tiny()), dir / "c.bin");
  auto b = read_bytes(dir / "c.bin");
  b[b.size() / 2] ^= 0x10;
  write_bytes(dir / "bad.bin", b);
  EXPECT_EQ(load_error(dir / "bad.bin"), io::CheckpointError::Kind::checksum);
}

TEST(Checkpoint, OtherVersionIsRejected) {
  auto dir = scratch("version");
  io::save_checkpoint(trained_checkpoint(tiny()), dir / "c.bin");
  auto b = read_bytes(dir / "c.bin");
  b[8] = 2;  // version field follows the 8-byte magic
  write_bytes(dir / "v2.bin", b);
  EXPECT_EQ(load_error(dir / "v2.bin"), io::CheckpointError::Kind::version);
  write_bytes(dir / "junk.bin", {'n', 'o', 'p', 'e'});
  EXPECT_EQ(load_error(dir / "junk.bin"), io::CheckpointError::Kind::format);
  EXPECT_EQ(load_error(dir / "missing.bin"), io::CheckpointError::Kind::io);
}

TEST(Checkpoint, ArchitectureMismatchIsRejected) {
  auto dir = scratch("mismatch");
  io::save_checkpoint(trained_checkpoint(tiny("1a")), dir / "c.bin");
  const auto pixels = io::preset_config("4").architecture();
  EXPECT_EQ(load_error(dir / "c.bin", &pixels), io::CheckpointError::Kind::architecture);
  const auto bits = io::preset_config("1a").architecture();
  EXPECT_NO_THROW(io::load_checkpoint(dir / "c.bin", &bits));
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  auto c = tiny("1b");
  c.train.steps = 6;
  auto whole = io::make_trainer(c);
  whole->run();

  auto half_cfg = c;
  half_cfg.train.steps = 3;
  auto first = io::make_trainer(half_cfg);
  first->run();
  auto path = scratch("resume") / "c.bin";
  auto k = io::snapshot(*first, c);  // snapshot carries the full-length config
  io::save_checkpoint(k, path);

  io::RunConfig restored;
  auto second = io::resume(io::load_checkpoint(path), &restored);
  EXPECT_EQ(second->step(), 3);
  EXPECT_EQ(io::to_json(restored), io::to_json(c));
  second->run();
  EXPECT_TRUE(second->params() == whole->params());
  EXPECT_TRUE(second->adam() == whole->adam());
}

TEST(Checkpoint, SnapshotAloneReEvaluates) {
  auto c = tiny("2");
  auto t = io::make_trainer(c);
  t->run();
  auto again = io::resume(io::snapshot(*t, c));
  EXPECT_EQ(again->evaluate().to_json(true), t->evaluate().to_json(true));
}

TEST(TrainInto, WritesMetricsConfigAndCheckpoints) {
  auto c = tiny();
  c.train.checkpoint_every = 2;
  auto dir = scratch("train_into");
  auto out = io::train_into(c, dir);
  EXPECT_FALSE(out.result.halted);
  EXPECT_TRUE(fs::exists(dir / "config.json"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint-2.bin"));
  EXPECT_FALSE(fs::exists(dir / "checkpoint-4.bin"));
  auto k = io::load_checkpoint(out.checkpoint);
  EXPECT_EQ(k.step, 4);
  std::ifstream in(out.metrics);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("eval_joint"));
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}

TEST(Presets, MatchExperimentTable) {
  struct Row {
    const char* name;
    model::Kind model;
    double penalty;
    int cells, objects;
    env::ObservationMode obs;
    env::Window window;
  };
  const Row rows[] = {
      {"1a", model::Kind::maidrqn, 0.0, 25, 10, env::ObservationMode::bits, env::Window::full},
      {"1b", model::Kind::maidrqn, -0.4, 25, 10, env::ObservationMode::bits, env::Window::full},
      {"2", model::Kind::maidrqn, 0.0, 25, 10, env::ObservationMode::bits, env::Window::one_cell},
      {"3", model::Kind::maidrqn, -0.1, 3, 1, env::ObservationMode::bits, env::Window::one_cell},
      {"4", model::Kind::maddrqn, 0.0, 25, 10, env::ObservationMode::pixels, env::Window::camera},
  };
  for (const auto& r : rows) {
    auto c = io::preset_config(r.name);
    EXPECT_EQ(c.model, r.model) << r.name;
    EXPECT_EQ(c.architecture().kind, r.model) << r.name;
    EXPECT_EQ(c.game.principal_penalty, r.penalty) << r.name;
    EXPECT_EQ(static_cast<int>(c.game.world_cells().size()), r.cells) << r.name;
    EXPECT_EQ(c.game.num_objects, r.objects) << r.name;
    EXPECT_EQ(c.game.observation, r.obs) << r.name;
    EXPECT_EQ(c.game.window, r.window) << r.name;
    EXPECT_EQ(c.game.horizon, 10) << r.name;
  }
  EXPECT_EQ(io::preset_config("4", io::Scale::paper).architecture().input, (num::Shape{64, 64, 3}));
  EXPECT_THROW(io::preset_config("5"), std::invalid_argument);
}

TEST(Presets, Scales) {
  auto d = io::preset_config("1a", io::Scale::desk);
  EXPECT_EQ(d.train.batch, 32);
  EXPECT_EQ(d.train.steps, 20000);
  auto d4 = io::preset_config("4", io::Scale::desk);
  EXPECT_EQ(d4.train.batch, 16);
  EXPECT_EQ(d4.train.steps, 2000);
  auto p = io::preset_config("3", io::Scale::paper);
  EXPECT_EQ(p.train.batch, 100);
  EXPECT_EQ(p.train.steps, 150000);
  auto p4 = io::preset_config("4", io::Scale::paper);
  EXPECT_EQ(p4.train.batch, 100);
  EXPECT_EQ(p4.train.steps, 40000);
  EXPECT_EQ(d4.game.render_scale, 2);
  EXPECT_EQ(d4.architecture().input, (num::Shape{32, 32, 3}));
  EXPECT_EQ(p4.game.render_scale, 1);
  EXPECT_EQ(p4.architecture().input, (num::Shape{64, 64, 3}));
  EXPECT_EQ(d4.architecture().conv_features(), p4.architecture().conv_features());
  for (auto* name : {"1a", "4"}) {
    auto c = io::preset_config(name);
    EXPECT_EQ(c.train.epsilon, 0.05);
    EXPECT_EQ(c.train.adam.lr, 1e-3);
  }
}

TEST(ConfigFile, PresetThenOverrides) {
  auto c = io::parse_config(
      "# desk run with a harsher penalty\n"
      "preset = 1b\n"
      "principal_penalty = -0.6   # stronger\n"
      "\n"
      "seed=9\n"
      "assistant_sees_target = always\n"
      "assistant_start = 1,3\n"
      "lr = 5e-4\n");
  EXPECT_EQ(c.preset, "1b");
  EXPECT_EQ(c.game.principal_penalty, -0.6);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.game.assistant_sees_target, env::TargetVisibility::always);
  EXPECT_EQ(c.game.assistant_start, (env::Cell{1, 3}));
  EXPECT_EQ(c.train.adam.lr, 5e-4);
  EXPECT_EQ(c.train.batch, 32);
}

TEST(ConfigFile, PresetResetsEarlierKeys) {
  auto c = io::parse_config("seed = 4\npreset = 2\n");
  EXPECT_EQ(c.train.seed, 1u);
  EXPECT_EQ(c.game.window, env::Window::one_cell);
}

TEST(ConfigFile, ScaleAppliesToThePreset) {
  auto c = io::parse_config("preset = 4\nscale = paper\n");
  EXPECT_EQ(c.train.steps, 40000);
  auto d = io::parse_config("scale = paper\npreset = 1a\n");
  EXPECT_EQ(d.train.steps, 150000);
}

TEST(ConfigFile, ErrorsNameTheLine) {
  auto expect_error = [](const std::string& text, const std::string& needle) {
    try {
      io::parse_config(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const io::ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error("preset = 1a\nbogus = 3\n", "line 2");
  expect_error("bogus = 3\n", "unknown key 'bogus'");
  expect_error("batch = many\n", "expects an integer");
  expect_error("gamma = 0.9x\n", "expects a number");
  expect_error("window = huge\n", "bad value 'huge'");
  expect_error("solo = maybe\n", "true or false");
  expect_error("just words\n", "key = value");
  expect_error("preset = 7\n", "unknown preset");
  expect_error("baseline = oracle\n", "unknown baseline");
}

TEST(ConfigFile, EveryKeyValidatesItsValue) {
  for (const auto& k : io::config_keys()) {
    if (k == "preset") continue;
    auto c = io::preset_config("1a");
    EXPECT_THROW(io::apply_override(c, k, "#?"), std::invalid_argument) << k;
  }
}

TEST(ConfigJson, RoundTrip) {
  auto c = io::parse_config("preset = 4\nadvantage = mean\nbaseline = feedfwd-a\ngamma = 0.95\nprincipal_start = 0,0\n");
  auto back = io::run_config_from_json(io::to_json(c));
  EXPECT_EQ(io::to_json(back), io::to_json(c));
  EXPECT_EQ(back.architecture(), c.architecture());
  EXPECT_EQ(c.architecture().advantage, model::AdvantageMode::mean);
  EXPECT_EQ(c.architecture().assistant_core, model::Core::feedforward);
  EXPECT_EQ(c.game.gamma, 0.95);
}

TEST(ConfigJson, BaselinesApplyToGameAndNetwork) {
  auto c = io::preset_config("1a");
  c.baseline = eval::Baseline::solo_p;
  EXPECT_TRUE(c.effective_game().solo);
  EXPECT_TRUE(c.architecture().solo);
  EXPECT_FALSE(c.game.solo);
}
