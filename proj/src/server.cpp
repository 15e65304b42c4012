#include "legws/server.hpp"

#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace legws {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t kBodyLimit = 8 * 1024 * 1024;

std::string_view target_path(std::string_view target) {
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  while (target.size() > 1 && target.back() == '/') target.remove_suffix(1);
  return target;
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, const ScenarioStore& store, std::chrono::seconds idle)
      : ws_(std::move(socket)), session_(store), idle_(idle) {}

  void run(http::request<http::string_body> req) {
    beast::get_lowest_layer(ws_).expires_never();
    websocket::stream_base::timeout opts{};
    opts.handshake_timeout = std::chrono::seconds(30);
    opts.idle_timeout = idle_;
    opts.keep_alive_pings = false;
    ws_.set_option(opts);
    ws_.read_message_max(1024 * 1024);
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (!ec) do_read();
  }

  void do_read() {
    buffer_.clear();
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;  // closed, timed out or failed
    const std::string text = beast::buffers_to_string(buffer_.data());
    reply_ = canonical_dump(session_.handle_text(text));
    ws_.text(true);
    ws_.async_write(asio::buffer(reply_), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (!ec) do_read();
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::string reply_;
  InferenceSession session_;
  std::chrono::seconds idle_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, const Api& api, const ScenarioStore& store, std::chrono::seconds idle)
      : stream_(std::move(socket)), api_(api), store_(store), idle_(idle) {}

  void run() { do_read(); }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(kBodyLimit);
    stream_.expires_after(idle_);
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    auto req = parser_->release();
    const std::string_view path = target_path(std::string_view(req.target().data(), req.target().size()));
    if (path == "/api/inference") {
      if (websocket::is_upgrade(req)) {
        std::make_shared<WsSession>(stream_.release_socket(), store_, idle_)->run(std::move(req));
        return;
      }
      send(req, {426, "{\"error\": \"upgrade_required\", \"message\": \"open a WebSocket\"}\n"});
      return;
    }
    if (req.method() == http::verb::options) {
      send(req, {204, ""});
      return;
    }
    const std::string method(req.method_string());
    send(req, api_.handle(method, std::string_view(req.target().data(), req.target().size()), req.body()));
  }

  void send(const http::request<http::string_body>& req, HttpResponse res) {
    auto msg = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(res.status),
                                                                    req.version());
    msg->set(http::field::server, "legws/" LEGWS_VERSION);
    msg->set(http::field::access_control_allow_origin, "*");
    msg->set(http::field::access_control_allow_headers, "Content-Type");
    msg->set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    if (!res.body.empty()) msg->set(http::field::content_type, res.content_type);
    msg->keep_alive(req.keep_alive());
    msg->body() = std::move(res.body);
    msg->prepare_payload();
    response_ = msg;
    http::async_write(stream_, *msg,
                      [self = shared_from_this(), close = msg->need_eof()](beast::error_code ec, std::size_t) {
                        self->response_.reset();
                        if (ec) return;
                        if (close) {
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                          return;
                        }
                        self->do_read();
                      });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  std::shared_ptr<void> response_;
  const Api& api_;
  const ScenarioStore& store_;
  std::chrono::seconds idle_;
};

}  // namespace

struct Server::Impl {
  ServerConfig config;
  ScenarioStore store;
  RunRegistry runs;
  Api api{store, runs};
  std::vector<std::string> problems;
  asio::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::vector<std::thread> threads;
  bool running = false;

  void do_accept() {
    acceptor->async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec == asio::error::operation_aborted || !acceptor->is_open()) return;
      if (!ec) std::make_shared<HttpSession>(std::move(socket), api, store, config.idle_timeout)->run();
      do_accept();
    });
  }
};

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  if (!impl_->config.scenario_dir.empty()) {
    if (!std::filesystem::is_directory(impl_->config.scenario_dir)) {
      throw Error("scenario directory '" + impl_->config.scenario_dir.string() + "' does not exist");
    }
    impl_->problems = impl_->store.load_directory(impl_->config.scenario_dir);
  }
}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
  Impl& m = *impl_;
  if (m.running) return m.acceptor->local_endpoint().port();
  beast::error_code ec;
  const auto address = asio::ip::make_address(m.config.address, ec);
  if (ec) throw Error("invalid address '" + m.config.address + "': " + ec.message());
  const tcp::endpoint endpoint(address, m.config.port);
  tcp::acceptor acceptor(m.ioc);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error("cannot listen on " + m.config.address + ":" + std::to_string(m.config.port) + ": " + ec.message());
  }
  m.acceptor.emplace(std::move(acceptor));
  m.running = true;
  m.do_accept();
  const std::size_t n = std::max<std::size_t>(1, m.config.threads);
  for (std::size_t i = 0; i < n; ++i) m.threads.emplace_back([&m] { m.ioc.run(); });
  return m.acceptor->local_endpoint().port();
}

void Server::stop() {
  Impl& m = *impl_;
  if (!m.running) return;
  m.running = false;
  asio::post(m.ioc, [&m] {
    beast::error_code ec;
    m.acceptor->close(ec);
  });
  m.ioc.stop();
  for (auto& t : m.threads) t.join();
  m.threads.clear();
}

void Server::run_until_signal() {
  asio::io_context signals_ioc;
  asio::signal_set signals(signals_ioc, SIGINT, SIGTERM);
  signals.async_wait([](beast::error_code, int) {});
  signals_ioc.run();
  stop();
}

ScenarioStore& Server::scenarios() { return impl_->store; }
RunRegistry& Server::runs() { return impl_->runs; }
const std::vector<std::string>& Server::load_problems() const { return impl_->problems; }

}  // namespace legws
