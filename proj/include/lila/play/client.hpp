#pragma once

#include <optional>
#include <string>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "lila/play/session.hpp"

namespace lila::play {

/// Blocking WebSocket client for the play protocol.
class PlayClient {
 public:
  PlayClient(const std::string& host, unsigned short port, const std::string& target = "/ws")
      : ws_(ioc_) {
    boost::asio::ip::tcp::resolver resolver(ioc_);
    auto results = resolver.resolve(host, std::to_string(port));
    boost::beast::get_lowest_layer(ws_).connect(results);
    boost::beast::get_lowest_layer(ws_).socket().set_option(boost::asio::ip::tcp::no_delay(true));
    ws_.handshake(host + ":" + std::to_string(port), target);
  }

  void send(const nlohmann::json& msg) {
    ws_.text(true);
    ws_.write(boost::asio::buffer(msg.dump()));
  }

  nlohmann::json receive() {
    boost::beast::flat_buffer buf;
    ws_.read(buf);
    return nlohmann::json::parse(boost::beast::buffers_to_string(buf.data()));
  }

  /// Next message, which must have the given type.
  nlohmann::json expect(const std::string& type) {
    auto m = receive();
    if (m.value("type", "") != type)
      throw ProtocolError("expected " + type + ", got " + m.dump().substr(0, 200));
    if (m.value("v", 0) != kProtocolVersion) throw ProtocolError("unsupported protocol version in " + type);
    return m;
  }

  void close() {
    boost::beast::error_code ec;
    ws_.close(boost::beast::websocket::close_code::normal, ec);
  }

  /// Drops the TCP connection without a closing handshake.
  void drop() {
    boost::beast::error_code ec;
    boost::beast::get_lowest_layer(ws_).socket().shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
    boost::beast::get_lowest_layer(ws_).close();
  }

 private:
  boost::asio::io_context ioc_;
  boost::beast::websocket::stream<boost::beast::tcp_stream> ws_;
};

struct ScriptedRun {
  eval::EvalReport report;
  std::vector<nlohmann::json> summaries;
  std::vector<std::vector<int>> assistant_actions;  // per episode, as reported by the server
};

/// Plays episodes as the principal of `principal` over the protocol: reads
/// the rendered view from each frame, acts greedily and presses the key.
/// Any rejection or unexpected message aborts with ProtocolError.
inline ScriptedRun scripted_principal(PlayClient& client, std::shared_ptr<const Model> principal, Mode mode,
                                      const std::vector<std::uint64_t>& task_seeds) {
  if (task_seeds.empty()) throw std::invalid_argument("scripted_principal: no episodes");
  client.expect("welcome");
  client.send(message("set_mode", {{"mode", mode_name(mode)}}));
  if (client.expect("welcome")["mode"] != mode_name(mode)) throw ProtocolError("server did not switch mode");

  ScriptedRun run;
  std::vector<train::EpisodeRecord> records;
  AgentDriver driver(principal, env::kPrincipal);
  for (auto seed : task_seeds) {
    client.send(message("start_episode", {{"task_seed", seed}}));
    const auto shown = client.expect("task_display");
    const int target = shown.at("target_class");
    auto frame = client.expect("state_frame");
    driver.reset();

    // The server scores the episode; the client keeps enough to recompute
    // the report's inference-error column.
    train::EpisodeRecord rec;
    rec.task.target = target;
    std::vector<int> a_actions;
    const int horizon = frame.at("horizon");
    for (int t = 0; t < horizon; ++t) {
      const int a = driver.act(decode_view(frame.at("view")), target);
      client.send(message("key", {{"key", action_key(a)}}));
      frame = client.expect("state_frame");
      if (frame.at("step") != t + 1) throw ProtocolError("frame out of order");
      const auto& last = frame.at("last");
      env::Transition tr;
      tr.reward = last.at("reward");
      tr.attributed = {last.at("attributed").at("P").get<double>(), last.at("attributed").at("A").get<double>()};
      tr.collected = last.at("collected").get<std::vector<env::Collection>>();
      rec.steps.push_back(std::move(tr));
      rec.actions.push_back({a, 0});
      if (!last.at("actions").at("A").is_null())
        a_actions.push_back(static_cast<int>(env::action_from_name(last["actions"]["A"].get<std::string>())));
    }
    auto summary = client.expect("episode_summary");
    if (std::abs(summary.at("joint").get<double>() - rec.joint()) > 1e-9)
      throw ProtocolError("episode summary disagrees with its frames");
    run.summaries.push_back(std::move(summary));
    run.assistant_actions.push_back(std::move(a_actions));
    records.push_back(std::move(rec));
  }
  run.report = eval::make_report(records);
  return run;
}

}  // namespace lila::play
