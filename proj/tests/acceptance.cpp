// Acceptance suite: one PASS/FAIL line per criterion. Arguments select
// criteria by name substring; no arguments runs all of them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lila/eval/baselines.hpp"
#include "lila/eval/oracle.hpp"
#include "lila/play/client.hpp"
#include "lila/play/server.hpp"
#include "support/dfs_oracle.hpp"
#include "support/golden.hpp"
#include "support/gradcheck.hpp"
#include "support/reference_render.hpp"

using namespace lila;
using lila::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Gradient correctness ------------------------------------------------------

double primitive_max_error() {
  using namespace num;
  using lila::testing::probe;
  std::mt19937_64 rng(2024);
  double worst = 0;
  auto check = [&](const lila::testing::ScalarFn& f, std::vector<Tensor<double>> in) {
    worst = std::max(worst, lila::testing::gradcheck(f, std::move(in)).max_rel_error);
  };
  check([](auto&, const auto& v) { return probe(matmul(v[0], v[1])); },
        {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
  check([](auto&, const auto& v) { return probe(add_bias(v[0], v[1])); },
        {random_tensor({3, 4}, rng), random_tensor({4}, rng)});
  check([](auto&, const auto& v) { return probe(add(sub(mul(v[0], v[1]), v[1]), scale(v[0], 0.5))); },
        {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
  check([](auto&, const auto& v) { return probe(add(relu(v[0]), add(sigmoid(v[0]), tanh(v[0])))); },
        {random_tensor({4, 5}, rng)});
  check([](auto&, const auto& v) { return probe(softmax(v[0])); }, {random_tensor({3, 5}, rng, -3, 3)});
  check([](auto&, const auto& v) { return add(sum(v[0]), squared_error(v[0], v[1])); },
        {random_tensor({6}, rng), random_tensor({6}, rng)});
  check(
      [](auto&, const auto& v) {
        auto c = concat(reshape(v[0], {2, 3}), v[1]);
        return probe(add(slice_cols(c, 1, 3), slice_cols(c, 2, 3)));
      },
      {random_tensor({6}, rng), random_tensor({2, 2}, rng)});
  check([](auto&, const auto& v) { return probe(add(gather_rows(center_rows(v[0]), {1, 4, 0}), max_rows(v[0]))); },
        {random_tensor({3, 5}, rng)});
  {
    // Finite differences see through stop_gradient; its backward must
    // instead equal the gradient with the blocked branch removed.
    auto x0 = random_tensor({2, 3}, rng);
    Tape<double> t1, t2;
    auto x1 = t1.leaf(x0), x2 = t2.leaf(x0);
    t1.backward(probe(add(x1, stop_gradient(mul(x1, x1)))));
    t2.backward(probe(x2));
    for (std::size_t i = 0; i < x0.size(); ++i)
      worst = std::max(worst, lila::testing::rel_error(t1.grad(x1)[i], t2.grad(x2)[i]));
  }
  check([](auto&, const auto& v) { return probe(conv2d(v[0], v[1], 2, Padding::valid)); },
        {random_tensor({2, 7, 7, 2}, rng), random_tensor({3, 3, 2, 3}, rng)});
  check([](auto&, const auto& v) { return probe(conv2d(v[0], v[1], 1, Padding::same)); },
        {random_tensor({1, 4, 5, 2}, rng), random_tensor({3, 3, 2, 2}, rng)});
  check(
      [](auto&, const auto& v) {
        auto [h, c] = lstm_cell(v[0], v[1], v[2], v[3], v[4]);
        return add(probe(h, 1), probe(c, 2));
      },
      {random_tensor({2, 3}, rng), random_tensor({2, 4}, rng), random_tensor({2, 4}, rng),
       random_tensor({7, 16}, rng, -0.5, 0.5), random_tensor({16}, rng)});
  return worst;
}

num::Tensor<double> observation(const env::GameSpec& spec, std::uint64_t seed, int agent) {
  auto task = env::sample_task(spec, seed);
  auto s = env::initial_state(task);
  std::mt19937_64 rng(seed);
  for (int t = 0; t < 3; ++t)
    env::advance(s, task, env::action_from_index(static_cast<int>(rng() % 5)),
                 env::action_from_index(static_cast<int>(rng() % 5)));
  return num::stack(std::vector<num::Tensor<double>>{env::observe(s, task, agent).cast<double>()});
}

// Every head (and the value, if any) over two recurrent steps.
double architecture_max_error(model::Architecture arch, const env::GameSpec& spec) {
  model::AgentPair<double> net(arch);
  auto params = net.init_params(9);
  std::mt19937_64 brng(6);
  for (int i = 0; i < static_cast<int>(params.size()); ++i)
    if (params.name(i).ends_with("/b")) params[i] = random_tensor(params[i].shape(), brng, -0.2, 0.2);
  std::array<num::Tensor<double>, 2> o1{observation(spec, 1, 0), observation(spec, 1, 1)};
  std::array<num::Tensor<double>, 2> o2{observation(spec, 2, 0), observation(spec, 2, 1)};
  num::Tensor<double> task({1, 2});
  if (arch.task_dim) task[1] = 1;

  lila::testing::ScalarFn f = [&](num::Tape<double>& tape, const std::vector<num::Var<double>>& vars) {
    num::BoundParams<double> bp{vars, &params};
    auto st = net.bind_state(tape, model::RecurrentState<double>::zeros(arch, 1));
    auto tv = tape.constant(task);
    auto a = net.step(bp, {tape.constant(o1[0]), tape.constant(o1[1])}, tv, st);
    auto b = net.step(bp, {tape.constant(o2[0]), tape.constant(o2[1])}, tv, a.next);
    auto total = num::add(lila::testing::probe(b.head[0], 1), lila::testing::probe(b.head[1], 2));
    if (b.value.valid()) total = num::add(total, lila::testing::probe(b.value, 3));
    return total;
  };
  std::vector<num::Tensor<double>> inputs;
  for (const auto& e : params) inputs.push_back(e.second);
  return lila::testing::gradcheck(f, inputs).max_rel_error;
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const double prim = primitive_max_error();

  auto bits_spec = env::preset_game("1a");
  auto bits = model::maidrqn_bits(bits_spec);
  bits.hidden = 4;
  bits.convs = {{3, 3, 1}, {2, 3, 1}};
  const double e_bits = architecture_max_error(bits, bits_spec);

  auto pix_spec = env::preset_game("4");
  auto pix = model::maddrqn_pixels(pix_spec);
  pix.hidden = 3;
  pix.convs = {{2, 8, 4}, {2, 8, 2}};
  pix.dense_units = 4;
  const double e_pix = architecture_max_error(pix, pix_spec);

  const double secs = seconds_since(t0);
  const double worst = std::max({prim, e_bits, e_pix});
  return {worst < 1e-4 && secs < 120,
          fmt("max rel error: primitives %.2e, independent bits model %.2e, dueling pixel model %.2e; %.1f s", prim,
              e_bits, e_pix, secs)};
}

// Dueling decomposition -----------------------------------------------------

Outcome dueling_decomposition() {
  auto spec = env::preset_game("4");
  model::AgentPair<double> net(model::maddrqn_pixels(spec));
  std::mt19937_64 rng(31);
  int argmax_mismatch = 0;
  double identity_err = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    auto params = net.init_params(rng());
    auto st = model::RecurrentState<double>::zeros(net.arch(), 1);
    for (int i = 0; i < 2; ++i) {
      st.h[i] = random_tensor(st.h[i].shape(), rng);
      st.c[i] = random_tensor(st.c[i].shape(), rng);
    }
    const std::uint64_t s = rng();
    num::Tensor<double> task({1, 2});
    task[s % 2] = 1;
    num::Tape<double> tape;
    auto bp = num::bind(tape, params, false);
    auto out = net.step(bp, {tape.constant(observation(spec, s, 0)), tape.constant(observation(spec, s, 1))},
                        tape.constant(task), net.bind_state(tape, st));
    std::array<num::Tensor<double>, 2> adv{out.head[0].value().reshaped({5}), out.head[1].value().reshaped({5})};
    for (int i = 0; i < 2; ++i) {
      const auto& logits = out.logits[i].value();
      // Softmax recomputed here, independent of the library op.
      double m = logits[0], z = 0;
      for (int k = 1; k < 5; ++k) m = std::max(m, logits[k]);
      for (int k = 0; k < 5; ++k) z += std::exp(logits[k] - m);
      for (int k = 0; k < 5; ++k)
        identity_err = std::max(identity_err, std::abs(adv[i][k] + std::exp(logits[k] - m) / z - logits[k]));
    }
    const double v = out.value.value()[0];
    int bp_ = 0, ba = 0;
    for (int p = 0; p < 5; ++p)
      for (int a = 0; a < 5; ++a)
        if (model::joint_q(v, adv[0], adv[1], p, a) > model::joint_q(v, adv[0], adv[1], bp_, ba)) bp_ = p, ba = a;
    if (bp_ != model::argmax(adv[0]) || ba != model::argmax(adv[1])) ++argmax_mismatch;
  }
  return {argmax_mismatch == 0 && identity_err <= 1e-6,
          fmt("1000 draws: %d joint-argmax mismatches, advantage identity error %.2e", argmax_mismatch, identity_err)};
}

// Environment golden suite --------------------------------------------------

Outcome environment_golden() {
  int bit_ok = 0, bit_total = 0;
  for (const auto& c : lila::testing::golden_bit_cases()) {
    ++bit_total;
    if (lila::testing::bits_at(env::encode_bits(c.state, c.task, c.agent), c.cell) == c.expected) ++bit_ok;
  }
  // Byte hashes of the independent rasteriser's output for each case.
  const std::uint64_t pinned[] = {0x5e5d7240ad8b18adull, 0xdca6bde9ca6cd6ebull, 0xff0c087ba71c33cbull};
  int render_ok = 0, render_total = 0;
  const auto renders = lila::testing::golden_render_cases();
  for (std::size_t i = 0; i < renders.size(); ++i) {
    const auto& c = renders[i];
    ++render_total;
    const auto img = env::render_rgb8(c.state, c.task, c.agent);
    if (img == lila::testing::reference_render(c.state, c.task, c.agent) && lila::testing::fnv1a(img) == pinned[i])
      ++render_ok;
  }

  std::mt19937_64 rng(17);
  int episodes = 0, violations = 0;
  const char* presets[] = {"1a", "1b", "2", "3", "4"};
  for (int ep = 0; ep < 10000; ++ep) {
    auto spec = env::preset_game(presets[ep % 5]);
    auto task = env::sample_task(spec, rng());
    auto s = env::initial_state(task);
    double ret = 0;
    for (int t = 0; t < spec.horizon; ++t) {
      const env::Cell before = s.pos[env::kPrincipal];
      auto tr = env::advance(s, task, env::action_from_index(static_cast<int>(rng() % 5)),
                             env::action_from_index(static_cast<int>(rng() % 5)));
      double expected = s.pos[env::kPrincipal] != before ? spec.principal_penalty : 0.0;
      for (const auto& c : tr.collected) expected += c.cls == task.target ? 1.0 : -1.0;
      if (std::abs(tr.attributed[0] + tr.attributed[1] - tr.reward) > 1e-12 || std::abs(tr.reward - expected) > 1e-12)
        ++violations;
      ret += tr.reward;
    }
    const double n = static_cast<double>(task.objects.size());
    if (ret > n + 1e-9 || ret < -n + spec.horizon * spec.principal_penalty - 1e-9) ++violations;
    ++episodes;
  }
  return {bit_total >= 5 && bit_ok == bit_total && render_total >= 3 && render_ok == render_total && violations == 0,
          fmt("bit cells %d/%d, renders %d/%d, %d episodes with %d conservation violations", bit_ok, bit_total,
              render_ok, render_total, episodes, violations)};
}

// Oracle equivalence --------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  int agree = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto t = lila::testing::oracle_instance(1000 + seed);
    if (eval::brute_force_return(t, 4, 0.9).value == lila::testing::dfs_oracle(t, 4, 0.9)) ++agree;
  }
  const double secs = seconds_since(t0);
  return {agree == 50 && secs < 60, fmt("%d/50 instances agree exactly; %.1f s", agree, secs)};
}

// Training experiments ------------------------------------------------------

struct SeedRun {
  eval::EvalReport final;
  train::RunResult result;
  double seconds = 0;
  std::shared_ptr<const play::Model> model;
};

SeedRun train_seed(const std::string& preset, std::uint64_t seed) {
  auto cfg = io::preset_config(preset, io::Scale::desk);
  cfg.train.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  auto trainer = io::make_trainer(cfg);
  SeedRun r;
  r.result = trainer->run();
  r.final = trainer->evaluate();
  r.seconds = seconds_since(t0);
  r.model = play::Model::from_checkpoint(io::snapshot(*trainer, cfg));
  std::printf("  %s seed %llu: joint %.3f, due to P %.3f, due to A %.3f (%.0f s)\n", preset.c_str(),
              static_cast<unsigned long long>(seed), r.final.joint.mean, r.final.due_p.mean, r.final.due_a.mean,
              r.seconds);
  std::fflush(stdout);
  return r;
}

Outcome experiment_1a() {
  int ok = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto r = train_seed("1a", seed);
    const bool pass = r.final.joint.mean >= 4.0 && r.final.due_a.mean >= 0.5 && r.seconds <= 4 * 3600;
    ok += pass;
    detail += fmt("%sseed %llu joint %.2f A %.2f", detail.empty() ? "" : "; ", static_cast<unsigned long long>(seed),
                  r.final.joint.mean, r.final.due_a.mean);
  }
  return {ok >= 2, fmt("%d/3 seeds reach joint >= 4.0 with A >= 0.5 (", ok) + detail + ")"};
}

Outcome experiment_1b() {
  int ok = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto r = train_seed("1b", seed);
    ok += r.final.due_a.mean > r.final.due_p.mean;
    detail += fmt("%sseed %llu A %.2f P %.2f", detail.empty() ? "" : "; ", static_cast<unsigned long long>(seed),
                  r.final.due_a.mean, r.final.due_p.mean);
  }
  return {ok >= 2, fmt("%d/3 seeds have reward due to A above reward due to P (", ok) + detail + ")"};
}

// First index j with x_j < 0.1 after some earlier x_i > 0.1.
int naive_failure(const std::vector<double>& x) {
  for (std::size_t j = 0; j < x.size(); ++j)
    for (std::size_t i = 0; i <= j; ++i)
      if (x[i] > 0.1 && x[j] < 0.1) return static_cast<int>(j);
  return -1;
}

std::shared_ptr<const play::Model> pixel_model;

Outcome experiment_4_smoke() {
  auto r = train_seed("4", 1);
  pixel_model = r.model;
  bool finite = !r.result.halted && !r.result.metrics.empty();
  for (const auto& m : r.result.metrics) finite = finite && std::isfinite(m.loss);
  const auto spec = io::preset_config("4", io::Scale::desk).effective_game();
  const auto random = eval::random_baseline(spec, 100000, 7);
  const bool above = r.final.joint.mean > random.mean;

  // Synthetic evaluation streams, including exact threshold values.
  std::mt19937_64 rng(3);
  const double levels[] = {-1.0, 0.0, 0.05, 0.1, 0.1000001, 0.5, 2.0};
  int streams = 0, disagree = 0;
  for (int k = 0; k < 20000; ++k) {
    std::vector<double> x(rng() % 12);
    for (auto& v : x) v = rng() % 2 ? levels[rng() % 7] : std::uniform_real_distribution<double>(-1, 3)(rng);
    train::FailureDetector d;
    int fired_at = -1;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (d.observe(x[i]) && fired_at < 0) fired_at = static_cast<int>(i);
    const int expect = naive_failure(x);
    disagree += fired_at != expect || train::failure_index(x) != expect;
    ++streams;
  }
  return {finite && above && disagree == 0,
          fmt("%d steps, loss %s, final joint %.3f vs random %.3f; detector agrees on %d/%d synthetic streams",
              r.result.metrics.empty() ? 0 : r.result.metrics.back().step, finite ? "finite" : "NOT finite",
              r.final.joint.mean, random.mean, streams - disagree, streams)};
}

// Determinism ---------------------------------------------------------------

Outcome determinism() {
  auto run = [] {
    auto cfg = io::preset_config("1a", io::Scale::desk);
    cfg.train.steps = 500;
    cfg.train.eval_every = 100;
    auto t = io::make_trainer(cfg);
    std::ostringstream os;
    t->run(&os);
    std::istringstream in(os.str());
    std::string line, stripped;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line);
      j.erase("wall_time");
      stripped += j.dump() + "\n";
    }
    return std::make_pair(stripped, t->params());
  };
  auto [a, pa] = run();
  auto [b, pb] = run();
  const auto lines = std::count(a.begin(), a.end(), '\n');
  return {!a.empty() && a == b && pa == pb,
          fmt("%ld metrics records %s, final parameters %s", static_cast<long>(lines),
              a == b ? "identical" : "DIFFER", pa == pb ? "identical" : "DIFFER")};
}

// Protocol parity -----------------------------------------------------------

struct Parity {
  double protocol = 0, in_process = 0;
  bool complete = false;
  double gap() const { return std::abs(protocol - in_process); }
};

Parity parity_for(const std::shared_ptr<const play::Model>& model) {
  play::ServerOptions opt;
  opt.seed = 5;
  play::PlayServer server(model, opt);
  server.start();
  std::vector<std::uint64_t> seeds;
  std::vector<env::TaskSpec> tasks;
  for (int i = 0; i < 100; ++i) {
    seeds.push_back(train::test_task_seed(i));
    tasks.push_back(env::sample_task(model->game, seeds.back()));
  }
  play::PlayClient client("127.0.0.1", server.port());
  auto run = play::scripted_principal(client, model, play::Mode::with_assistant, seeds);
  client.close();
  server.stop();
  return {run.report.joint.mean, eval::evaluate(model->net, model->params, tasks).joint.mean,
          run.summaries.size() == 100};
}

// The trained model, plus the untrained one: its greedy policy is arbitrary but
// moves, so the check still exercises movement if training collapsed to stay.
Outcome protocol_parity() {
  auto cfg = io::preset_config("4", io::Scale::desk);
  std::shared_ptr<const play::Model> untrained = play::Model::from_checkpoint(io::snapshot(*io::make_trainer(cfg), cfg));
  auto trained = pixel_model ? pixel_model : untrained;
  const Parity a = parity_for(trained), b = parity_for(untrained);
  return {a.complete && b.complete && a.gap() <= 0.2 && b.gap() <= 0.2,
          fmt("100 episodes each: trained protocol %.3f vs in-process %.3f (gap %.3f), untrained %.3f vs %.3f "
              "(gap %.3f)",
              a.protocol, a.in_process, a.gap(), b.protocol, b.in_process, b.gap())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-correctness", gradient_correctness},
      {"dueling-decomposition", dueling_decomposition},
      {"environment-golden", environment_golden},
      {"oracle-equivalence", oracle_equivalence},
      {"determinism", determinism},
      {"experiment-4-smoke", experiment_4_smoke},
      {"protocol-parity", protocol_parity},
      {"desk-experiment-1a", experiment_1a},
      {"desk-experiment-1b", experiment_1b},
  };
  int failed = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    bool selected = argc == 1;
    for (int i = 1; i < argc; ++i) selected = selected || name.find(argv[i]) != std::string::npos;
    if (!selected) continue;
    ++ran;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed ? 1 : 0;
}
