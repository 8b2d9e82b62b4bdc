#include "semisteer/bridge/server.hpp"

#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <variant>

namespace semisteer::bridge {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxBacklog = 1024;

std::string mime_type(const std::filesystem::path& p)
{
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
  WsConnection(tcp::socket socket, SessionManager& sessions)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), sessions_(sessions)
  {
  }

  ~WsConnection()
  {
    if (session_) sessions_.close_session(session_->id());
  }

  void accept(http::request<http::string_body> req)
  {
    ws_.text(true);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

private:
  void read()
  {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->timer_.cancel();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(text);
      self->read();
    });
  }

  void handle(const std::string& text)
  {
    try {
      std::visit([this](auto&& msg) { on(msg); }, parse_inbound(text));
    } catch (const std::exception& e) {
      send(encode_error(e.what()));
    }
  }

  Session& require_session()
  {
    if (!session_) throw std::logic_error("no session open on this connection");
    return *session_;
  }

  void on(const OpenRequest& r)
  {
    if (session_) throw std::logic_error("a session is already open on this connection");
    const int id = sessions_.open_session(r);
    session_ = sessions_.find(id);
    send(session_->attach_message());
  }
  void on(const SteerRequest& r) { require_session().steer(r); }
  void on(const SpeedRequest& r) { require_session().set_speed(r.v); }
  void on(const StartRequest&)
  {
    Session& s = require_session();
    s.start();
    send_status();
    if (!ticking_) {
      ticking_ = true;
      next_ = std::chrono::steady_clock::now();
      schedule();
    }
  }
  void on(const StopRequest&)
  {
    require_session().stop();
    send_status();
  }
  void on(const ResetRequest&)
  {
    require_session().reset();
    send_status();
  }

  void send_status()
  {
    const Session& s = *session_;
    send(encode_status(s.id(), s.epoch(), s.tick(), s.running(), s.finished()));
  }

  void schedule()
  {
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(session_->scenario().mpc.t_s));
    next_ += period;
    const auto now = std::chrono::steady_clock::now();
    if (next_ + period < now) {
      next_ = now;  // fell behind; keep ticking without bursts
    }
    timer_.expires_at(next_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_timer(ec); });
  }

  void on_timer(beast::error_code ec)
  {
    if (ec || closed_ || !session_ || !session_->running()) {
      ticking_ = false;
      return;
    }
    try {
      const StateMessage m = session_->advance(session_->scenario().mpc.t_s);
      send(encode_state(m));
    } catch (const std::exception& e) {
      send(encode_error(e.what()));
    }
    if (session_->running()) {
      schedule();
    } else {
      ticking_ = false;
    }
  }

  void send(const json& j)
  {
    if (closed_) return;
    if (queue_.size() >= kMaxBacklog) {
      closed_ = true;
      timer_.cancel();
      beast::get_lowest_layer(ws_).close();
      return;
    }
    queue_.push_back(j.dump());
    if (queue_.size() == 1) write();
  }

  void write()
  {
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->closed_ = true;
                        self->timer_.cancel();
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  SessionManager& sessions_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::shared_ptr<Session> session_;
  std::chrono::steady_clock::time_point next_;
  bool ticking_ = false;
  bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
  HttpConnection(tcp::socket socket, SessionManager& sessions, const std::string& static_dir)
      : stream_(std::move(socket)), sessions_(sessions), static_dir_(static_dir)
  {
  }

  void start()
  {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (!ec) self->on_request();
                     });
  }

private:
  void on_request()
  {
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      std::make_shared<WsConnection>(stream_.release_socket(), sessions_)
          ->accept(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(false);
    res->set(http::field::server, "semisteer");
    const std::string target(req_.target());
    if (req_.method() != http::verb::get) {
      res->result(http::status::method_not_allowed);
      res->body() = "GET only\n";
    } else if (target == "/health") {
      res->result(http::status::ok);
      res->set(http::field::content_type, "application/json");
      res->body() = json{{"status", "ok"},
                         {"sessions", sessions_.count()},
                         {"protocol_version", kProtocolVersion}}
                        .dump();
    } else {
      serve_static(target, *res);
    }
    res->prepare_payload();
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code, std::size_t) {
                        beast::error_code ignored;
                        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                      });
  }

  void serve_static(std::string target, http::response<http::string_body>& res)
  {
    if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (static_dir_.empty() || target.empty() || target[0] != '/' ||
        target.find("..") != std::string::npos) {
      res.result(http::status::not_found);
      res.body() = "not found\n";
      return;
    }
    if (target.back() == '/') target += "index.html";
    const std::filesystem::path file = std::filesystem::path(static_dir_) / target.substr(1);
    std::ifstream in(file, std::ios::binary);
    if (!in || std::filesystem::is_directory(file)) {
      res.result(http::status::not_found);
      res.body() = "not found\n";
      return;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    res.result(http::status::ok);
    res.set(http::field::content_type, mime_type(file));
    res.body() = ss.str();
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  SessionManager& sessions_;
  const std::string& static_dir_;
};

}  // namespace

struct Server::Impl {
  explicit Impl(ServerOptions o)
      : options(std::move(o)),
        acceptor(ioc, tcp::endpoint(net::ip::make_address(options.host), options.port))
  {
  }

  void accept()
  {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == net::error::operation_aborted) return;
        log(LogLevel::warn, "accept failed: " + ec.message());
      } else {
        std::make_shared<HttpConnection>(std::move(socket), sessions, options.static_dir)->start();
      }
      accept();
    });
  }

  ServerOptions options;
  net::io_context ioc{1};
  tcp::acceptor acceptor;
  SessionManager sessions;
};

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() = default;

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

SessionManager& Server::sessions() { return impl_->sessions; }

void Server::run()
{
  std::optional<net::signal_set> signals;
  if (impl_->options.handle_signals) {
    signals.emplace(impl_->ioc, SIGINT, SIGTERM);
    signals->async_wait([this](beast::error_code ec, int) {
      if (!ec) stop();
    });
  }
  impl_->accept();
  impl_->ioc.run();
}

void Server::stop()
{
  net::post(impl_->ioc, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
    impl_->ioc.stop();
  });
}

void run_server(const ServerOptions& options)
{
  ServerOptions o = options;
  o.handle_signals = true;
  Server server(o);
  log(LogLevel::warn, "listening on " + o.host + ":" + std::to_string(server.port()));
  server.run();
}

}  // namespace semisteer::bridge
