#include "teachrl/server.hpp"

#include <deque>
#include <filesystem>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace teachrl::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

ClientMessage parse_client_message(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw SessionError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw SessionError("message needs a string \"type\"");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "text") {
    const char* field = j.contains("body") ? "body" : "text";
    if (!j.contains(field) || !j.at(field).is_string()) throw SessionError("text message needs \"body\"");
    return TextMessage{j.at(field).get<std::string>()};
  }
  if (type == "control") return parse_control(j);
  if (type == "subscribe") return SubscribeMessage{};
  throw SessionError("unknown message type: " + type);
}

namespace {

std::vector<std::string> split_lines(std::string_view data) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string_view::npos) end = data.size();
    std::string_view l = data.substr(start, end - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) lines.emplace_back(l);
    start = end + 1;
  }
  return lines;
}

// "/sessions/s1/stream" -> "s1"
std::optional<std::string> stream_session_id(std::string_view target) {
  constexpr std::string_view prefix = "/sessions/";
  constexpr std::string_view suffix = "/stream";
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  if (!target.starts_with(prefix) || !target.ends_with(suffix)) return std::nullopt;
  auto id = target.substr(prefix.size(), target.size() - prefix.size() - suffix.size());
  if (id.empty() || id.find('/') != std::string_view::npos) return std::nullopt;
  return std::string(id);
}

std::string_view mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, std::shared_ptr<SessionHost> host)
      : ws_(std::move(socket)), host_(std::move(host)) {}

  ~WsSession() {
    if (subscription_) host_->unsubscribe(*subscription_);
  }

  void run(http::request<http::string_body> req) {
    ws_.text(true);
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      if (subscription_) host_->unsubscribe(*subscription_);
      subscription_.reset();
      return;
    }
    const std::string data = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    for (const auto& line : split_lines(data)) handle(line);
    do_read();
  }

  void handle(const std::string& line) {
    try {
      auto msg = parse_client_message(line);
      if (auto* t = std::get_if<TextMessage>(&msg)) {
        host_->submit_text(t->text);
      } else if (auto* c = std::get_if<ControlCommand>(&msg)) {
        host_->control(*c);
      } else {
        if (subscription_) host_->unsubscribe(*subscription_);
        std::weak_ptr<WsSession> weak = shared_from_this();
        auto exec = ws_.get_executor();
        subscription_ = host_->subscribe([weak, exec](const SessionEvent& e) {
          net::post(exec, [weak, line = serialize(e) + "\n"]() mutable {
            if (auto self = weak.lock()) self->send(std::move(line));
          });
        });
      }
    } catch (const std::exception& e) {
      SessionEvent err{"error", {{"message", e.what()}}, host_->id(), host_->last_seq()};
      send(serialize(err) + "\n");
    }
  }

  void send(std::string line) {
    outbox_.push_back(std::move(line));
    if (outbox_.size() == 1) do_write();
  }

  void do_write() {
    ws_.async_write(net::buffer(outbox_.front()),
                    beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) return;
    outbox_.pop_front();
    if (!outbox_.empty()) do_write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::shared_ptr<SessionHost> host_;
  std::optional<std::uint64_t> subscription_;
  std::deque<std::string> outbox_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, SessionRegistry& registry, const ServerOptions& options)
      : stream_(std::move(socket)), registry_(registry), options_(options) {}

  void run() { do_read(); }

 private:
  void do_read() {
    req_ = {};
    http::async_read(stream_, buffer_, req_,
                     beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      auto id = stream_session_id(std::string_view(req_.target().data(), req_.target().size()));
      auto host = id ? registry_.find(*id) : nullptr;
      if (!host) {
        reply(http::status::not_found, json{{"error", "unknown session"}}.dump(), "application/json");
        return;
      }
      std::make_shared<WsSession>(stream_.release_socket(), host)->run(std::move(req_));
      return;
    }
    route();
  }

  void route() {
    const std::string target(req_.target());
    const auto method = req_.method();
    auto json_reply = [&](http::status s, const json& body) { reply(s, body.dump(), "application/json"); };
    try {
      if (target == "/sessions" && method == http::verb::post) {
        json body = req_.body().empty() ? json::object() : json::parse(req_.body());
        auto host = registry_.create(params_from_json(body));
        json_reply(http::status::created, {{"session_id", host->id()}});
      } else if (target == "/sessions" && method == http::verb::get) {
        json_reply(http::status::ok, {{"sessions", registry_.ids()}});
      } else if (target.starts_with("/sessions/") && method == http::verb::delete_) {
        const bool removed = registry_.remove(target.substr(10));
        json_reply(removed ? http::status::ok : http::status::not_found, {{"removed", removed}});
      } else if (target == "/health") {
        json_reply(http::status::ok, {{"status", "ok"}});
      } else if (method == http::verb::get && !options_.static_dir.empty()) {
        serve_static(target);
      } else {
        json_reply(http::status::not_found, {{"error", "no such route"}});
      }
    } catch (const std::exception& e) {
      json_reply(http::status::bad_request, {{"error", e.what()}});
    }
  }

  void serve_static(std::string target) {
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target.find("..") != std::string::npos) {
      reply(http::status::bad_request, "bad path", "text/plain");
      return;
    }
    if (target.ends_with("/")) target += "index.html";
    const std::filesystem::path path = std::filesystem::path(options_.static_dir) / target.substr(1);
    beast::error_code ec;
    http::file_body::value_type file;
    file.open(path.string().c_str(), beast::file_mode::scan, ec);
    if (ec) {
      reply(http::status::not_found, "not found", "text/plain");
      return;
    }
    auto res = std::make_shared<http::response<http::file_body>>(
        std::piecewise_construct, std::make_tuple(std::move(file)),
        std::make_tuple(http::status::ok, req_.version()));
    res->set(http::field::content_type, std::string(mime_type(path)));
    res->keep_alive(req_.keep_alive());
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      self->after_write(ec, res->need_eof());
    });
  }

  void reply(http::status status, std::string body, std::string_view type) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, std::string(type));
    res->keep_alive(req_.keep_alive());
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      self->after_write(ec, res->need_eof());
    });
  }

  void after_write(beast::error_code ec, bool close) {
    if (ec) return;
    if (close) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    do_read();
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  SessionRegistry& registry_;
  const ServerOptions& options_;
};

}  // namespace

struct Server::Impl {
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  net::signal_set signals{ioc, SIGINT, SIGTERM};
  std::thread thread;
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;

  void accept(SessionRegistry& registry, const ServerOptions& options) {
    acceptor.async_accept(net::make_strand(ioc), [this, &registry, &options](beast::error_code ec,
                                                                              tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpSession>(std::move(socket), registry, options)->run();
      accept(registry, options);
    });
  }
};

Server::Server(ServerOptions options)
    : options_(std::move(options)),
      registry_(SessionHost::Mode::Threaded, options_.trace_dir),
      impl_(std::make_unique<Impl>()) {}

Server::~Server() { stop(); }

unsigned short Server::start() {
  const tcp::endpoint endpoint(net::ip::make_address(options_.address), options_.port);
  auto& acc = impl_->acceptor;
  acc.open(endpoint.protocol());
  acc.set_option(net::socket_base::reuse_address(true));
  acc.bind(endpoint);
  acc.listen(net::socket_base::max_listen_connections);
  impl_->accept(registry_, options_);
  impl_->signals.async_wait([this](beast::error_code ec, int) {
    if (!ec) {
      std::lock_guard lock(impl_->mutex);
      impl_->stopped = true;
      impl_->stopped_cv.notify_all();
    }
  });
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
  return acc.local_endpoint().port();
}

void Server::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

void Server::stop() {
  if (!impl_) return;
  registry_.stop_all();
  impl_->ioc.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  std::lock_guard lock(impl_->mutex);
  impl_->stopped = true;
  impl_->stopped_cv.notify_all();
}

}  // namespace teachrl::service
