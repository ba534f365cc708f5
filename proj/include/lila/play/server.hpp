#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "lila/play/session.hpp"

namespace lila::play {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 0;            // 0 picks a free port
  std::filesystem::path static_dir;   // served over plain HTTP; empty disables
  std::filesystem::path log_dir;      // one trace file per completed episode; empty disables
  SessionConfig session;              // defaults, overridable per connection by query string
  std::uint64_t seed = 1;             // sessions draw their task seeds from this stream
  int threads = 1;
};

struct ServerStats {
  std::atomic<int> sessions_opened{0};
  std::atomic<int> sessions_active{0};
  std::atomic<int> episodes_logged{0};
};

inline std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

/// Applies "?mode=solo&practice=1&debug=1&episodes=20" to session defaults.
inline SessionConfig session_from_query(SessionConfig cfg, std::string_view target) {
  const auto q = target.find('?');
  if (q == std::string_view::npos) return cfg;
  std::istringstream in(std::string(target.substr(q + 1)));
  std::string pair;
  while (std::getline(in, pair, '&')) {
    const auto eq = pair.find('=');
    const std::string k = pair.substr(0, eq), v = eq == std::string::npos ? "" : pair.substr(eq + 1);
    if (k == "mode") cfg.mode = parse_mode(v);
    else if (k == "practice") cfg.practice = v == "1" || v == "true";
    else if (k == "debug") cfg.debug = v == "1" || v == "true";
    else if (k == "episodes") cfg.max_episodes = std::stoi(v);
  }
  return cfg;
}

class PlayServer;

namespace detail {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket&& socket, PlayServer& server, std::unique_ptr<Session> session)
      : ws_(std::move(socket)), server_(server), session_(std::move(session)) {}

  template <class Body>
  void accept(http::request<Body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec);
  void read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this())); }
  void on_read(beast::error_code ec, std::size_t);
  void send(const nlohmann::json& j) {
    outbox_.push_back(j.dump());
    if (outbox_.size() == 1) write_next();
  }
  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), beast::bind_front_handler(&WsConnection::on_write, shared_from_this()));
  }
  void on_write(beast::error_code ec, std::size_t) {
    if (ec) return;
    outbox_.pop_front();
    if (!outbox_.empty()) write_next();
  }
  void close();

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  PlayServer& server_;
  std::unique_ptr<Session> session_;
  std::size_t logged_ = 0;
  bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, PlayServer& server) : stream_(std::move(socket)), server_(server) {}
  void start() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }
  void on_read(beast::error_code ec, std::size_t);
  void respond(http::response<http::string_body> res) {
    auto sp = std::make_shared<http::response<http::string_body>>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec || !sp->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  PlayServer& server_;
};

}  // namespace detail

/// WebSocket game sessions on "/ws" and static files on every other path,
/// sharing one port. Each connection owns an independent Session; the model
/// is shared read-only.
class PlayServer {
 public:
  PlayServer(std::shared_ptr<const Model> model, ServerOptions opt)
      : model_(std::move(model)), opt_(std::move(opt)), acceptor_(ioc_) {
    tcp::endpoint ep(net::ip::make_address(opt_.address), opt_.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    if (!opt_.log_dir.empty()) std::filesystem::create_directories(opt_.log_dir);
  }
  ~PlayServer() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  const ServerStats& stats() const { return stats_; }
  const ServerOptions& options() const { return opt_; }

  /// Serves on background threads until stop().
  void start() {
    accept();
    for (int i = 0; i < std::max(1, opt_.threads); ++i) threads_.emplace_back([this] { ioc_.run(); });
  }

  /// Serves on the calling thread (plus extra workers) until stop().
  void run() {
    accept();
    for (int i = 1; i < opt_.threads; ++i) threads_.emplace_back([this] { ioc_.run(); });
    ioc_.run();
  }

  void stop() {
    ioc_.stop();
    for (auto& t : threads_)
      if (t.joinable()) t.join();
    threads_.clear();
  }

 private:
  friend class detail::WsConnection;
  friend class detail::HttpConnection;

  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) {
        socket.set_option(tcp::no_delay(true), ec);
        std::make_shared<detail::HttpConnection>(std::move(socket), *this)->start();
      }
      if (acceptor_.is_open()) accept();
    });
  }

  std::unique_ptr<Session> open_session(std::string_view target) {
    const int n = stats_.sessions_opened++;
    auto cfg = session_from_query(opt_.session, target);
    cfg.seed = train::splitmix64(opt_.seed + static_cast<std::uint64_t>(n));
    ++stats_.sessions_active;
    return std::make_unique<Session>("s" + std::to_string(n), model_, cfg);
  }

  void log_episode(const Session& s, const train::EpisodeRecord& rec, std::size_t index) {
    ++stats_.episodes_logged;
    if (opt_.log_dir.empty()) return;
    const auto path = opt_.log_dir / (s.id() + "-ep" + std::to_string(index) + ".trace");
    std::ofstream(path) << eval::export_trace(rec);
  }

  http::response<http::string_body> serve_file(const http::request<http::string_body>& req) const {
    auto reply = [&](http::status st, std::string body, std::string type) {
      http::response<http::string_body> res{st, req.version()};
      res.set(http::field::content_type, type);
      res.keep_alive(req.keep_alive());
      res.body() = std::move(body);
      res.prepare_payload();
      return res;
    };
    std::string target(req.target());
    target = target.substr(0, target.find('?'));
    if (target == "/health")
      return reply(http::status::ok,
                   nlohmann::json{{"ok", true}, {"protocol", kProtocolVersion}, {"sessions", stats_.sessions_active.load()}}
                       .dump(),
                   "application/json");
    if (req.method() != http::verb::get) return reply(http::status::bad_request, "unsupported method\n", "text/plain");
    if (opt_.static_dir.empty() || target.find("..") != std::string::npos || target.empty() || target[0] != '/')
      return reply(http::status::not_found, "not found\n", "text/plain");
    auto path = opt_.static_dir / target.substr(1);
    if (target.back() == '/') path /= "index.html";
    std::ifstream in(path, std::ios::binary);
    if (!in) return reply(http::status::not_found, "not found\n", "text/plain");
    std::stringstream ss;
    ss << in.rdbuf();
    return reply(http::status::ok, ss.str(), mime_type(path));
  }

  std::shared_ptr<const Model> model_;
  ServerOptions opt_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  std::vector<std::thread> threads_;
  ServerStats stats_;
};

namespace detail {

inline void HttpConnection::on_read(beast::error_code ec, std::size_t) {
  if (ec) return;
  std::string target(req_.target());
  if (websocket::is_upgrade(req_) && target.substr(0, target.find('?')) == "/ws") {
    std::unique_ptr<Session> session;
    try {
      session = server_.open_session(target);
    } catch (const std::exception& e) {
      http::response<http::string_body> res{http::status::bad_request, req_.version()};
      res.body() = std::string(e.what()) + "\n";
      res.prepare_payload();
      return respond(std::move(res));
    }
    stream_.expires_never();
    std::make_shared<WsConnection>(stream_.release_socket(), server_, std::move(session))->accept(std::move(req_));
    return;
  }
  respond(server_.serve_file(req_));
}

inline void WsConnection::on_accept(beast::error_code ec) {
  if (ec) return close();
  send(session_->welcome());
  read();
}

inline void WsConnection::on_read(beast::error_code ec, std::size_t) {
  if (ec) return close();  // closed or dropped: discard any unfinished episode
  std::vector<nlohmann::json> replies;
  try {
    replies = session_->handle(nlohmann::json::parse(beast::buffers_to_string(buffer_.data())));
  } catch (const nlohmann::json::exception&) {
    replies = {message("rejected", {{"reason", "message is not valid JSON"}, {"phase", phase_name(session_->phase())}})};
  }
  buffer_.consume(buffer_.size());
  const auto& eps = session_->episodes();
  for (; logged_ < eps.size(); ++logged_) server_.log_episode(*session_, eps[logged_], logged_);
  for (const auto& r : replies) send(r);
  read();
}

inline void WsConnection::close() {
  if (closed_) return;
  closed_ = true;
  session_->abandon();
  --server_.stats_.sessions_active;
}

}  // namespace detail

}  // namespace lila::play
