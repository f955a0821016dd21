#include "transientsynth/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "transientsynth/errors.hpp"
#include "transientsynth/stream.hpp"

namespace tsynth {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

std::variant<ControlMessage, MessageError> parse_control_message(std::string_view text, const Controls& current) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return MessageError{"malformed JSON"};
  if (!j.is_object()) return MessageError{"message must be a JSON object"};
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) return MessageError{"missing string field 'type'"};
  const auto type = type_it->get<std::string>();

  ControlMessage msg;
  msg.controls = current;
  if (type == "ping") {
    msg.kind = ControlMessage::Kind::ping;
  } else if (type == "probe_on") {
    msg.kind = ControlMessage::Kind::probe_on;
  } else if (type == "probe_off") {
    msg.kind = ControlMessage::Kind::probe_off;
  } else if (type == "set") {
    msg.kind = ControlMessage::Kind::set;
    const std::pair<const char*, double*> fields[] = {{"pitch", &msg.controls.pitch},
                                                      {"volume", &msg.controls.volume},
                                                      {"instrument", &msg.controls.instrument}};
    for (const auto& [name, slot] : fields) {
      const auto it = j.find(name);
      if (it == j.end()) continue;
      if (!it->is_number()) return MessageError{std::string("field '") + name + "' must be a number"};
      const double v = it->get<double>();
      if (!std::isfinite(v)) return MessageError{std::string("field '") + name + "' must be finite"};
      const double c = clamp_unit(v);
      if (c != v) msg.clamped.emplace_back(name);
      *slot = c;
    }
  } else {
    return MessageError{"unknown message type '" + type + "'"};
  }
  return msg;
}

std::string pcm_frame_bytes(const std::vector<std::int16_t>& pcm) {
  std::string out(pcm.size() * 2, '\0');
  for (std::size_t i = 0; i < pcm.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(pcm[i]);
    out[2 * i] = static_cast<char>(u & 0xFF);
    out[2 * i + 1] = static_cast<char>(u >> 8);
  }
  return out;
}

std::string pong_json() { return R"({"type":"pong"})"; }

std::string warn_json(const std::vector<std::string>& clamped) {
  return json{{"type", "warn"}, {"message", "values clamped to [0,1]"}, {"clamped", clamped}}.dump();
}

std::string error_json(std::string_view message) {
  return json{{"type", "error"}, {"message", std::string(message)}}.dump();
}

std::string act_json(int layer_label, const std::vector<float>& values) {
  return json{{"type", "act"}, {"layer", layer_label}, {"values", values}}.dump();
}

std::string stats_json(std::uint64_t blocks, std::uint64_t dropped, std::uint64_t underruns) {
  return json{{"type", "stats"}, {"blocks", blocks}, {"dropped", dropped}, {"underruns", underruns}}.dump();
}

namespace {

struct Shared {
  std::shared_ptr<const NetworkParams> params;
  ServerOptions options;
  std::atomic<int> sessions{0};
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, std::shared_ptr<Shared> shared)
      : ws_(std::move(socket)), shared_(std::move(shared)), timer_(ws_.get_executor()),
        queue_(shared_->options.test_mode ? 64 : shared_->options.queue_capacity) {
    shared_->sessions.fetch_add(1);
  }

  ~WsSession() {
    generator_.request_stop();
    queue_.close();
    if (generator_.joinable()) generator_.join();
    shared_->sessions.fetch_sub(1);
  }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  struct Outgoing {
    bool binary;
    std::string data;
  };

  void on_accept(beast::error_code ec) {
    if (ec) {
      spdlog::debug("websocket accept failed: {}", ec.message());
      return;
    }
    start_generator();
    schedule_stats();
    do_read();
  }

  void start_generator() {
    const auto& o = shared_->options;
    StreamOptions so;
    so.prime_seed = o.prime_seed;
    if (o.test_mode) {
      so.paced = false;
      so.drop_when_full = false;
      so.script = o.script.value_or(ControlSchedule{});
      so.max_blocks = o.max_blocks;
    }
    auto exec = ws_.get_executor();
    std::weak_ptr<WsSession> weak = weak_from_this();
    so.on_block = [exec, weak] {
      net::post(exec, [weak] {
        if (auto s = weak.lock()) s->pump();
      });
    };
    generator_ = std::jthread([this, so = std::move(so), exec, weak](std::stop_token st) {
      try {
        run_stream(*shared_->params, mailbox_, queue_, so, stats_, st, &probing_);
      } catch (const std::exception& e) {
        spdlog::error("generation loop failed: {}", e.what());
      }
      net::post(exec, [weak] {
        if (auto s = weak.lock()) {
          s->generator_done_ = true;
          s->pump();
        }
      });
    });
  }

  void schedule_stats() {
    timer_.expires_after(shared_->options.stats_interval);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closing_) return;
      self->send_text(stats_json(self->stats_.blocks.load(), self->stats_.dropped.load(),
                                 self->stats_.underruns.load()));
      self->schedule_stats();
    });
  }

  void do_read() {
    ws_.async_read(read_buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      shutdown();
      return;
    }
    if (!ws_.got_text()) {
      send_text(error_json("binary frames are not accepted"));
    } else {
      handle_text(beast::buffers_to_string(read_buf_.data()));
    }
    read_buf_.consume(read_buf_.size());
    do_read();
  }

  void handle_text(const std::string& text) {
    auto parsed = parse_control_message(text, current_);
    if (auto* err = std::get_if<MessageError>(&parsed)) {
      send_text(error_json(err->message));
      return;
    }
    const auto& msg = std::get<ControlMessage>(parsed);
    switch (msg.kind) {
      case ControlMessage::Kind::ping:
        send_text(pong_json());
        break;
      case ControlMessage::Kind::probe_on:
        probing_ = true;
        break;
      case ControlMessage::Kind::probe_off:
        probing_ = false;
        break;
      case ControlMessage::Kind::set:
        current_ = msg.controls;
        mailbox_.publish(current_);
        if (!msg.clamped.empty()) send_text(warn_json(msg.clamped));
        break;
    }
  }

  void send_text(std::string s) {
    outbox_.push_back({false, std::move(s)});
    pump();
  }

  // Moves generated blocks into the outbox and keeps one write in flight.
  void pump() {
    if (closing_) return;
    // Only a couple of PCM frames wait on the socket; the rest back up in the
    // bounded queue, where the generator drops them if the client stalls.
    while (pcm_pending_ < kMaxPcmPending) {
      auto block = queue_.try_pop();
      if (!block) break;
      outbox_.push_back({true, pcm_frame_bytes(block->pcm)});
      ++pcm_pending_;
      if (!block->activations.empty()) {
        const int layer = shared_->params->config.n_layers;
        outbox_.push_back({false, act_json(layer, block->activations)});
      }
    }
    if (writing_) return;
    if (outbox_.empty()) {
      if (generator_done_ && queue_.size() == 0) close_gracefully();
      return;
    }
    writing_ = true;
    ws_.binary(outbox_.front().binary);
    ws_.async_write(net::buffer(outbox_.front().data),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_write(ec); });
  }

  void on_write(beast::error_code ec) {
    writing_ = false;
    if (ec) {
      shutdown();
      return;
    }
    if (outbox_.front().binary) --pcm_pending_;
    outbox_.pop_front();
    pump();
  }

  void close_gracefully() {
    closing_ = true;
    timer_.cancel();
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  void shutdown() {
    closing_ = true;
    timer_.cancel();
    generator_.request_stop();
    queue_.close();
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Shared> shared_;
  net::steady_timer timer_;
  beast::flat_buffer read_buf_;
  std::deque<Outgoing> outbox_;
  static constexpr int kMaxPcmPending = 2;
  int pcm_pending_ = 0;
  bool writing_ = false;
  bool closing_ = false;
  bool generator_done_ = false;
  Controls current_{};
  ControlMailbox mailbox_;
  BlockQueue queue_;
  StreamStats stats_;
  std::atomic<bool> probing_{false};
  std::jthread generator_;  // last: joined before the members it uses go away
};

std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, std::shared_ptr<Shared> shared)
      : stream_(std::move(socket)), shared_(std::move(shared)) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buf_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

 private:
  void on_read(beast::error_code ec) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), shared_)->run(std::move(req_));
      return;
    }
    respond();
  }

  void respond() {
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(false);
    res->set(http::field::server, "transientsynth");
    const auto& dir = shared_->options.static_dir;
    std::string target(req_.target());
    if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target.empty() || target.back() == '/') target += "index.html";
    std::filesystem::path file;
    bool ok = dir && req_.method() == http::verb::get && target.find("..") == std::string::npos;
    if (ok) {
      file = *dir / std::filesystem::path(target).relative_path();
      std::ifstream in(file, std::ios::binary);
      ok = static_cast<bool>(in);
      if (ok) {
        std::ostringstream ss;
        ss << in.rdbuf();
        res->result(http::status::ok);
        res->set(http::field::content_type, mime_type(file));
        res->body() = ss.str();
      }
    }
    if (!ok) {
      res->result(http::status::not_found);
      res->set(http::field::content_type, "text/plain");
      res->body() = "not found\n";
    }
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  std::shared_ptr<Shared> shared_;
  beast::flat_buffer buf_;
  http::request<http::string_body> req_;
};

}  // namespace

struct Server::Impl {
  net::io_context io{1};
  tcp::acceptor acceptor{io};
  std::shared_ptr<Shared> shared = std::make_shared<Shared>();
  std::thread thread;
  std::atomic<std::uint16_t> port{0};

  void listen() {
    const auto& o = shared->options;
    beast::error_code ec;
    const auto addr = net::ip::make_address(o.address, ec);
    if (ec) throw InvalidArgument("bad listen address '" + o.address + "'");
    tcp::endpoint ep(addr, o.port);
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw IoError(o.address + ":" + std::to_string(o.port), "cannot listen: " + ec.message());
    port = acceptor.local_endpoint().port();
    spdlog::info("listening on {}:{}", o.address, port.load());
    accept();
  }

  void accept() {
    acceptor.async_accept(net::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec != net::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
        if (!acceptor.is_open()) return;
      } else {
        std::make_shared<HttpSession>(std::move(socket), shared)->run();
      }
      accept();
    });
  }
};

Server::Server(std::shared_ptr<const NetworkParams> params, ServerOptions options) : impl_(std::make_unique<Impl>()) {
  if (!params) throw InvalidArgument("server needs parameters");
  validate(*params);
  if (options.queue_capacity == 0) throw InvalidArgument("queue capacity must be positive");
  if (options.test_mode && options.max_blocks == 0) throw InvalidArgument("test mode needs max_blocks > 0");
  impl_->shared->params = std::move(params);
  impl_->shared->options = std::move(options);
}

Server::~Server() { stop(); }

void Server::start() {
  impl_->listen();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

void Server::run_until_signal() {
  impl_->listen();
  net::signal_set signals(impl_->io, SIGINT, SIGTERM);
  signals.async_wait([this](beast::error_code, int sig) {
    spdlog::info("signal {} received, shutting down", sig);
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
    impl_->io.stop();
  });
  impl_->io.run();
}

void Server::stop() {
  if (!impl_) return;
  net::post(impl_->io, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
  });
  impl_->io.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::uint16_t Server::port() const { return impl_->port.load(); }

int Server::active_sessions() const { return impl_->shared->sessions.load(); }

}  // namespace tsynth
