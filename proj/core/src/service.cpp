// Copyright 2026 The protores Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "protores/service.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "protores/error.hpp"

namespace protores {

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto v = std::stoul(value, &used);
    if (used == value.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a positive integer, got '" + value + "'");
}

void set_service_key(ServiceConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "checkpoint") {
    c.checkpoints.clear();
    std::size_t begin = 0;
    while (begin <= value.size()) {
      const auto comma = value.find(',', begin);
      const std::string item = trim(value.substr(begin, comma == std::string::npos ? std::string::npos : comma - begin));
      if (!item.empty()) c.checkpoints.emplace_back(item);
      if (comma == std::string::npos) break;
      begin = comma + 1;
    }
  } else if (key == "bind") {
    c.bind = value;
  } else if (key == "workers") {
    c.workers = parse_count(key, value);
  } else if (key == "io_threads") {
    c.io_threads = parse_count(key, value);
  } else {
    throw ConfigError("unknown service key '" + key + "'");
  }
}

tcp::endpoint parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ConfigError("bind must be host:port, got '" + bind + "'");
  beast::error_code ec;
  const auto address = net::ip::make_address(bind.substr(0, colon), ec);
  if (ec) throw ConfigError("bad bind address '" + bind.substr(0, colon) + "'");
  unsigned long port = 0;
  try {
    port = std::stoul(bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad bind port in '" + bind + "'");
  }
  if (port > 65535) throw ConfigError("bad bind port in '" + bind + "'");
  return {address, static_cast<unsigned short>(port)};
}

struct Shared {
  std::shared_ptr<const ModelRegistry> models;
  net::thread_pool* pool = nullptr;
  std::atomic<std::size_t> stream_requests{0};
  std::atomic<std::size_t> stream_responses{0};
  std::atomic<std::size_t> coalesced{0};
};

struct Reply {
  http::status status = http::status::ok;
  std::string body;
  std::optional<double> latency_ms;
};

Reply json_reply(http::status status, const json& doc) { return {status, doc.dump(), std::nullopt}; }

Reply handle_http(const Shared& shared, http::verb method, std::string target, const std::string& body) {
  if (const auto q = target.find('?'); q != std::string::npos) target.erase(q);
  try {
    const ModelRegistry& models = *shared.models;
    if (target == "/v1/health") {
      if (method != http::verb::get) return json_reply(http::status::method_not_allowed, error_to_json("use GET", ""));
      return json_reply(http::status::ok, json{{"status", "ok"}, {"models", models.ids()}});
    }
    constexpr std::string_view kSkeletons = "/v1/skeletons/";
    if (target.rfind(kSkeletons, 0) == 0) {
      if (method != http::verb::get) return json_reply(http::status::method_not_allowed, error_to_json("use GET", ""));
      return json_reply(http::status::ok, models.get(target.substr(kSkeletons.size())).skeleton().to_json());
    }
    if (target == "/v1/solve") {
      if (method != http::verb::post) {
        return json_reply(http::status::method_not_allowed, error_to_json("use POST", ""));
      }
      const SolveRequest request = parse_solve_request(body, models);
      const SolveResponse response = solve(models, request);
      Reply reply = json_reply(http::status::ok,
                               solve_response_to_json(response, models.get(response.model).skeleton(), false));
      reply.latency_ms = response.latency_ms;
      return reply;
    }
    if (target == "/v1/stream") {
      return json_reply(http::status::upgrade_required, error_to_json("/v1/stream is a WebSocket endpoint", ""));
    }
    return json_reply(http::status::not_found, error_to_json("no route " + target, ""));
  } catch (const BadRequest& e) {
    return json_reply(http::status::bad_request, error_to_json(e.what(), e.field()));
  } catch (const NotFound& e) {
    return json_reply(http::status::not_found, error_to_json(e.what(), ""));
  } catch (const std::exception& e) {
    return json_reply(http::status::internal_server_error, error_to_json(e.what(), ""));
  }
}

std::string handle_stream_message(const Shared& shared, const std::string& text) {
  std::optional<json> id;
  try {
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw BadRequest("malformed request", "");
    if (doc.is_object() && doc.contains("id")) id = doc.at("id");
    const SolveRequest request = parse_solve_request(doc, *shared.models);
    const SolveResponse response = solve(*shared.models, request);
    return solve_response_to_json(response, shared.models->get(response.model).skeleton(), true).dump();
  } catch (const BadRequest& e) {
    return error_to_json(e.what(), e.field(), id).dump();
  } catch (const std::exception& e) {
    return error_to_json(e.what(), "", id).dump();
  }
}

class StreamSession : public std::enable_shared_from_this<StreamSession> {
 public:
  StreamSession(tcp::socket&& socket, std::shared_ptr<Shared> shared)
      : ws_(std::move(socket)), shared_(std::move(shared)) {}

  void run(http::request<http::string_body> req) {
    req_ = std::move(req);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req_, beast::bind_front_handler(&StreamSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    do_read();
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&StreamSession::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      return;
    }
    std::string message = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    ++shared_->stream_requests;
    if (busy_) {
      // Latest request wins: a newer message replaces one still waiting.
      if (pending_) ++shared_->coalesced;
      pending_ = std::move(message);
    } else {
      start_solve(std::move(message));
    }
    do_read();
  }

  void start_solve(std::string message) {
    busy_ = true;
    auto self = shared_from_this();
    net::post(*shared_->pool, [self, message = std::move(message)] {
      std::string out = handle_stream_message(*self->shared_, message);
      net::post(self->ws_.get_executor(), [self, out = std::move(out)]() mutable { self->finish(std::move(out)); });
    });
  }

  void finish(std::string out) {
    busy_ = false;
    if (!closed_) {
      outbox_.push_back(std::move(out));
      if (outbox_.size() == 1) write_next();
    }
    if (pending_ && !closed_) {
      std::string next = std::move(*pending_);
      pending_.reset();
      start_solve(std::move(next));
    }
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    beast::bind_front_handler(&StreamSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      return;
    }
    ++shared_->stream_responses;
    outbox_.pop_front();
    if (!outbox_.empty()) write_next();
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Shared> shared_;
  http::request<http::string_body> req_;
  beast::flat_buffer buffer_;
  bool busy_ = false;
  bool closed_ = false;
  std::optional<std::string> pending_;
  std::deque<std::string> outbox_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, std::shared_ptr<Shared> shared)
      : stream_(std::move(socket)), shared_(std::move(shared)) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) return do_close();
    if (ec) return;
    if (websocket::is_upgrade(req_) && req_.target() == "/v1/stream") {
      stream_.expires_never();
      std::make_shared<StreamSession>(stream_.release_socket(), shared_)->run(std::move(req_));
      return;
    }
    // Solves run on the worker pool; the reply comes back to this connection's strand.
    auto self = shared_from_this();
    net::post(*shared_->pool, [self] {
      Reply reply = handle_http(*self->shared_, self->req_.method(), std::string(self->req_.target()), self->req_.body());
      net::post(self->stream_.get_executor(), [self, reply = std::move(reply)]() mutable { self->send(std::move(reply)); });
    });
  }

  void send(Reply reply) {
    res_ = {};
    res_.result(reply.status);
    res_.version(req_.version());
    res_.set(http::field::server, "protores");
    res_.set(http::field::content_type, "application/json");
    if (reply.latency_ms) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", *reply.latency_ms);
      res_.set("X-Solve-Latency-Ms", buf);
    }
    res_.keep_alive(req_.keep_alive());
    res_.body() = std::move(reply.body);
    res_.prepare_payload();
    http::async_write(stream_, res_,
                      beast::bind_front_handler(&HttpSession::on_write, shared_from_this(), res_.need_eof()));
  }

  void on_write(bool close, beast::error_code ec, std::size_t) {
    if (ec) return;
    if (close) return do_close();
    do_read();
  }

  void do_close() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  std::shared_ptr<Shared> shared_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  http::response<http::string_body> res_;
};

class Listener : public std::enable_shared_from_this<Listener> {
 public:
  Listener(net::io_context& ioc, const tcp::endpoint& endpoint, std::shared_ptr<Shared> shared)
      : ioc_(ioc), acceptor_(net::make_strand(ioc)), shared_(std::move(shared)) {
    beast::error_code ec;
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
      throw ConfigError("cannot listen on " + endpoint.address().to_string() + ":" + std::to_string(endpoint.port()) +
                        ": " + ec.message());
    }
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  void run() { do_accept(); }

 private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), beast::bind_front_handler(&Listener::on_accept, shared_from_this()));
  }

  void on_accept(beast::error_code ec, tcp::socket socket) {
    if (!ec) std::make_shared<HttpSession>(std::move(socket), shared_)->run();
    if (acceptor_.is_open()) do_accept();
  }

  net::io_context& ioc_;
  tcp::acceptor acceptor_;
  std::shared_ptr<Shared> shared_;
};

}  // namespace

const std::vector<std::string>& service_config_keys() {
  static const std::vector<std::string> kKeys = {"checkpoint", "bind", "workers", "io_threads"};
  return kKeys;
}

ServiceConfig resolve_service_config(const std::map<std::string, std::string>& file_values,
                                     const std::map<std::string, std::string>& overrides, const EnvLookup& env) {
  ServiceConfig config;
  for (const auto& [key, value] : file_values) set_service_key(config, key, value);
  if (env) {
    if (auto v = env("PROTORES_CHECKPOINT")) set_service_key(config, "checkpoint", *v);
    if (auto v = env("PROTORES_BIND")) set_service_key(config, "bind", *v);
  }
  for (const auto& [key, value] : overrides) set_service_key(config, key, value);
  (void)parse_bind(config.bind);
  return config;
}

ServiceConfig resolve_service_config(const std::optional<std::filesystem::path>& file,
                                     const std::map<std::string, std::string>& overrides, const EnvLookup& env) {
  std::map<std::string, std::string> values;
  if (file) {
    values = read_key_value_file(*file);
    ServiceConfig probe;
    try {
      for (const auto& [key, value] : values) set_service_key(probe, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
  }
  return resolve_service_config(values, overrides, env);
}

std::shared_ptr<ModelRegistry> load_models(const ServiceConfig& config) {
  if (config.checkpoints.empty()) {
    throw ConfigError("no checkpoint configured; pass --checkpoint or set PROTORES_CHECKPOINT");
  }
  auto registry = std::make_shared<ModelRegistry>();
  for (const auto& path : config.checkpoints) {
    try {
      registry->load(path);
    } catch (const Error& e) {
      throw ConfigError("cannot load checkpoint '" + path.string() + "': " + e.what());
    }
  }
  return registry;
}

struct Service::Impl {
  ServiceConfig config;
  std::shared_ptr<Shared> shared = std::make_shared<Shared>();
  std::unique_ptr<net::io_context> ioc;
  std::unique_ptr<net::thread_pool> pool;
  std::unique_ptr<net::signal_set> signals;
  std::vector<std::thread> threads;
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool running = false;
  bool signalled = false;
};

Service::Service(std::shared_ptr<const ModelRegistry> models, ServiceConfig config) : impl_(std::make_unique<Impl>()) {
  if (!models || models->empty()) throw ConfigError("service needs at least one model");
  impl_->config = std::move(config);
  impl_->shared->models = std::move(models);
}

Service::~Service() { stop(); }

unsigned short Service::start() {
  std::lock_guard lock(impl_->mutex);
  if (impl_->running) throw ConfigError("service already started");
  const auto endpoint = parse_bind(impl_->config.bind);
  const int io_threads = static_cast<int>(std::max<std::size_t>(impl_->config.io_threads, 1));
  impl_->ioc = std::make_unique<net::io_context>(io_threads);
  impl_->pool = std::make_unique<net::thread_pool>(std::max<std::size_t>(impl_->config.workers, 1));
  impl_->shared->pool = impl_->pool.get();
  auto listener = std::make_shared<Listener>(*impl_->ioc, endpoint, impl_->shared);
  const unsigned short port = listener->port();
  listener->run();
  if (impl_->config.handle_signals) {
    impl_->signals = std::make_unique<net::signal_set>(*impl_->ioc, SIGINT, SIGTERM);
    impl_->signals->async_wait([impl = impl_.get()](beast::error_code ec, int) {
      if (ec) return;
      {
        std::lock_guard lock(impl->mutex);
        impl->signalled = true;
      }
      impl->stopped_cv.notify_all();
    });
  }
  for (int i = 0; i < io_threads; ++i) {
    impl_->threads.emplace_back([this] { impl_->ioc->run(); });
  }
  impl_->running = true;
  return port;
}

void Service::wait() {
  {
    std::unique_lock lock(impl_->mutex);
    impl_->stopped_cv.wait(lock, [this] { return !impl_->running || impl_->signalled; });
  }
  stop();
}

void Service::stop() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(impl_->mutex);
    if (!impl_->running) return;
    impl_->running = false;
    impl_->ioc->stop();
    threads.swap(impl_->threads);
  }
  for (auto& t : threads) t.join();
  impl_->pool->join();
  impl_->signals.reset();
  impl_->ioc.reset();
  impl_->pool.reset();
  impl_->stopped_cv.notify_all();
}

Service::StreamStats Service::stream_stats() const {
  return {impl_->shared->stream_requests.load(), impl_->shared->stream_responses.load(),
          impl_->shared->coalesced.load()};
}

}  // namespace protores
