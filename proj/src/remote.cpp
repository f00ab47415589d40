#include "binoculars/remote.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>

#include <nlohmann/json.hpp>

namespace binoculars {

using json = nlohmann::json;

namespace {

constexpr int kRecvTimeoutSec = 60;

void close_fd(int fd) {
  if (fd >= 0) ::close(fd);
}

int dial(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  std::string service = std::to_string(port);
  int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result);
  if (rc != 0) {
    throw std::runtime_error("cannot resolve " + host + ": " +
                             gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    close_fd(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) {
    throw std::runtime_error("cannot connect to " + host + ":" +
                             std::to_string(port));
  }
  timeval tv{kRecvTimeoutSec, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  return fd;
}

void send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(fd, data.data() + sent, data.size() - sent,
                       MSG_NOSIGNAL);
    if (n <= 0) throw std::runtime_error("connection write failed");
    sent += static_cast<std::size_t>(n);
  }
}

}  // namespace

struct RemoteBackend::Conn {
  int fd = -1;
  std::string buffer;

  ~Conn() { close_fd(fd); }

  std::string read_line() {
    for (;;) {
      auto nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      char chunk[65536];
      ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n <= 0)
        throw std::runtime_error("connection closed or timed out mid-reply");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }
};

RemoteBackend::RemoteBackend(std::string host, int port, Role role_hint)
    : host_(std::move(host)), port_(port), role_hint_(role_hint) {}

RemoteBackend::~RemoteBackend() = default;

std::unique_ptr<RemoteBackend::Conn> RemoteBackend::acquire() const {
  {
    std::lock_guard<std::mutex> lock(pool_mutex_);
    if (!pool_.empty()) {
      auto conn = std::move(pool_.back());
      pool_.pop_back();
      return conn;
    }
  }
  auto conn = std::make_unique<Conn>();
  conn->fd = dial(host_, port_);
  return conn;
}

void RemoteBackend::release(std::unique_ptr<Conn> conn) const {
  std::lock_guard<std::mutex> lock(pool_mutex_);
  pool_.push_back(std::move(conn));
}

std::string RemoteBackend::request(const std::string& line) const {
  auto conn = acquire();
  // A failed connection is not returned to the pool.
  send_all(conn->fd, line + "\n");
  std::string reply = conn->read_line();
  release(std::move(conn));
  return reply;
}

std::string RemoteBackend::raw_request(const std::string& line) const {
  return request(line);
}

namespace {

json parse_reply(const std::string& reply) {
  json obj = json::parse(reply);
  if (obj.contains("error")) {
    throw std::runtime_error("remote backend error: " +
                             obj["error"].get<std::string>());
  }
  return obj;
}

}  // namespace

BackendDescriptor RemoteBackend::descriptor() const {
  {
    std::lock_guard<std::mutex> lock(meta_mutex_);
    if (!vocab_id_.empty()) {
      return {"remote:" + host_ + ":" + std::to_string(port_), vocab_size_,
              vocab_id_, role_hint_};
    }
  }
  // Probe once: the protocol has no describe op, but every tokenize reply
  // carries the vocabulary identity.
  json req{{"op", "tokenize"}, {"text", "?"}};
  json reply = parse_reply(request(req.dump()));
  std::lock_guard<std::mutex> lock(meta_mutex_);
  vocab_id_ = reply.at("vocab_id").get<std::string>();
  vocab_size_ = reply.at("vocab_size").get<int32_t>();
  return {"remote:" + host_ + ":" + std::to_string(port_), vocab_size_,
          vocab_id_, role_hint_};
}

TokenSequence RemoteBackend::tokenize(const std::string& text) const {
  if (text.empty()) throw std::invalid_argument("cannot tokenize empty text");
  json req{{"op", "tokenize"}, {"text", text}};
  json reply = parse_reply(request(req.dump()));
  TokenSequence seq;
  seq.tokens = reply.at("tokens").get<std::vector<int32_t>>();
  seq.vocab_id = reply.at("vocab_id").get<std::string>();
  seq.vocab_size = reply.at("vocab_size").get<int32_t>();
  {
    std::lock_guard<std::mutex> lock(meta_mutex_);
    vocab_id_ = seq.vocab_id;
    vocab_size_ = seq.vocab_size;
  }
  return seq;
}

std::string RemoteBackend::detokenize(std::span<const int32_t>) const {
  throw std::runtime_error(
      "remote backends cannot detokenize: the wire protocol has no such op");
}

PredictionMatrix RemoteBackend::predict(const TokenSequence& seq) const {
  auto desc = descriptor();
  if (seq.vocab_id != desc.vocab_id) {
    throw std::runtime_error("tokenizer mismatch: sequence has \"" +
                             seq.vocab_id + "\", backend has \"" +
                             desc.vocab_id + "\"");
  }
  json req{{"op", "predict"}, {"tokens", seq.tokens}, {"topk", nullptr}};
  json reply = parse_reply(request(req.dump()));
  PredictionMatrix m;
  m.vocab_id = reply.at("vocab_id").get<std::string>();
  m.vocab_size = desc.vocab_size;
  m.rows = reply.at("logprobs").get<std::vector<std::vector<double>>>();
  if (m.rows.size() != seq.tokens.size()) {
    throw std::runtime_error("remote predict returned " +
                             std::to_string(m.rows.size()) + " rows for " +
                             std::to_string(seq.tokens.size()) + " tokens");
  }
  return m;
}

TokenSequence RemoteBackend::sample(const TokenSequence& prompt, int max_new,
                                    uint64_t seed) const {
  if (max_new < 1) throw std::invalid_argument("max_new must be >= 1");
  auto desc = descriptor();
  if (prompt.vocab_id != desc.vocab_id) {
    throw std::runtime_error("tokenizer mismatch: prompt has \"" +
                             prompt.vocab_id + "\", backend has \"" +
                             desc.vocab_id + "\"");
  }
  json req{{"op", "sample"},
           {"tokens", prompt.tokens},
           {"max_new", max_new},
           {"seed", seed}};
  json reply = parse_reply(request(req.dump()));
  TokenSequence out;
  out.tokens = reply.at("tokens").get<std::vector<int32_t>>();
  out.vocab_id = desc.vocab_id;
  out.vocab_size = desc.vocab_size;
  return out;
}

LogitServer::LogitServer(BackendPtr backend) : backend_(std::move(backend)) {
  if (!backend_) throw std::invalid_argument("server needs a backend");
}

LogitServer::~LogitServer() { stop(); }

int LogitServer::start(int port) {
  if (listen_fd_ >= 0) throw std::logic_error("server already started");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("cannot create listen socket");
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) !=
      0) {
    close_fd(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot bind 127.0.0.1:" + std::to_string(port));
  }
  if (::listen(listen_fd_, 16) != 0) {
    close_fd(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_number_ = ntohs(addr.sin_port);
  accept_thread_ = std::thread([this]() { accept_loop(); });
  return port_number_;
}

void LogitServer::stop() {
  {
    std::lock_guard<std::mutex> lock(clients_mutex_);
    if (stopping_) return;
    stopping_ = true;
    // Unblock accept() and any in-flight recv().
    if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(clients_mutex_);
    workers.swap(client_threads_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
  {
    std::lock_guard<std::mutex> lock(clients_mutex_);
    for (int fd : client_fds_) close_fd(fd);
    client_fds_.clear();
  }
  close_fd(listen_fd_);
  listen_fd_ = -1;
}

void LogitServer::accept_loop() {
  for (;;) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) return;  // listener shut down
    std::lock_guard<std::mutex> lock(clients_mutex_);
    if (stopping_) {
      close_fd(fd);
      return;
    }
    client_fds_.push_back(fd);
    client_threads_.emplace_back([this, fd]() { handle_client(fd); });
  }
}

void LogitServer::handle_client(int fd) {
  std::string buffer;
  char chunk[65536];
  for (;;) {
    auto nl = buffer.find('\n');
    if (nl == std::string::npos) {
      ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n <= 0) return;  // client closed or server stopping
      buffer.append(chunk, static_cast<std::size_t>(n));
      continue;
    }
    std::string line = buffer.substr(0, nl);
    buffer.erase(0, nl + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string reply = handle_request_line(line);
    try {
      send_all(fd, reply + "\n");
    } catch (const std::exception&) {
      return;
    }
  }
}

std::string LogitServer::handle_request_line(const std::string& line) const {
  auto error_reply = [](const std::string& message) {
    return json{{"error", message}}.dump();
  };
  json req;
  try {
    req = json::parse(line);
  } catch (const std::exception& e) {
    return error_reply(std::string("malformed request: ") + e.what());
  }
  try {
    if (!req.is_object() || !req.contains("op") || !req["op"].is_string())
      return error_reply("request needs a string \"op\"");
    std::string op = req["op"].get<std::string>();
    if (op == "tokenize") {
      auto seq = backend_->tokenize(req.at("text").get<std::string>());
      return json{{"tokens", seq.tokens},
                  {"vocab_id", seq.vocab_id},
                  {"vocab_size", seq.vocab_size}}
          .dump();
    }
    if (op == "predict") {
      if (req.contains("topk") && !req["topk"].is_null())
        return error_reply("topk is reserved and must be null");
      TokenSequence seq;
      seq.tokens = req.at("tokens").get<std::vector<int32_t>>();
      auto desc = backend_->descriptor();
      seq.vocab_id = desc.vocab_id;
      seq.vocab_size = desc.vocab_size;
      auto matrix = backend_->predict(seq);
      return json{{"logprobs", matrix.rows}, {"vocab_id", matrix.vocab_id}}
          .dump();
    }
    if (op == "sample") {
      TokenSequence prompt;
      prompt.tokens = req.at("tokens").get<std::vector<int32_t>>();
      auto desc = backend_->descriptor();
      prompt.vocab_id = desc.vocab_id;
      prompt.vocab_size = desc.vocab_size;
      auto out = backend_->sample(prompt, req.at("max_new").get<int>(),
                                  req.at("seed").get<uint64_t>());
      return json{{"tokens", out.tokens}}.dump();
    }
    return error_reply("unknown op: " + op);
  } catch (const std::exception& e) {
    return error_reply(e.what());
  }
}

namespace {

void add_check(std::vector<ConformanceCheck>& checks, const std::string& name,
               bool passed, const std::string& detail = "") {
  checks.push_back({name, passed, detail});
}

}  // namespace

std::vector<ConformanceCheck> run_protocol_conformance(const std::string& host,
                                                       int port) {
  std::vector<ConformanceCheck> checks;
  RemoteBackend backend(host, port);
  const std::string probe_text = "the quick brown fox jumps over the lazy dog";

  TokenSequence seq;
  try {
    seq = backend.tokenize(probe_text);
    bool in_range = true;
    for (int32_t t : seq.tokens)
      in_range = in_range && t >= 0 && t < seq.vocab_size;
    add_check(checks, "tokenize returns bounded token ids",
              !seq.tokens.empty() && seq.vocab_size >= 2 && in_range,
              "vocab_size=" + std::to_string(seq.vocab_size) +
                  " tokens=" + std::to_string(seq.tokens.size()));
  } catch (const std::exception& e) {
    add_check(checks, "tokenize returns bounded token ids", false, e.what());
    return checks;  // nothing else can run without tokenize
  }

  try {
    auto m = backend.predict(seq);
    bool shape = m.rows.size() == seq.tokens.size();
    for (const auto& row : m.rows)
      shape = shape && row.size() == static_cast<std::size_t>(seq.vocab_size);
    add_check(checks, "predict row count equals token count", shape);
    try {
      check_simplex(m);
      add_check(checks, "rows are full-vocabulary log distributions", true);
    } catch (const std::exception& e) {
      add_check(checks, "rows are full-vocabulary log distributions", false,
                e.what());
    }
    auto m2 = backend.predict(seq);
    add_check(checks, "predict is deterministic", m.rows == m2.rows);
  } catch (const std::exception& e) {
    add_check(checks, "predict row count equals token count", false, e.what());
  }

  try {
    auto s1 = backend.sample(seq, 8, 7);
    auto s2 = backend.sample(seq, 8, 7);
    bool prefix = s1.tokens.size() >= seq.tokens.size() &&
                  std::equal(seq.tokens.begin(), seq.tokens.end(),
                             s1.tokens.begin());
    add_check(checks, "sample extends the prompt", prefix,
              "returned " + std::to_string(s1.tokens.size()) + " tokens");
    add_check(checks, "sample is seed-deterministic", s1.tokens == s2.tokens);
  } catch (const std::exception& e) {
    add_check(checks, "sample extends the prompt", false, e.what());
  }

  auto expect_error = [&](const std::string& name, const std::string& line) {
    try {
      json reply = json::parse(backend.raw_request(line));
      add_check(checks, name, reply.contains("error"), reply.dump());
    } catch (const std::exception& e) {
      add_check(checks, name, false, e.what());
    }
  };
  expect_error("unknown op gets an error reply", "{\"op\":\"nope\"}");
  expect_error("non-null topk is rejected",
               json{{"op", "predict"}, {"tokens", seq.tokens}, {"topk", 4}}
                   .dump());
  expect_error("malformed JSON gets an error reply", "{not json");

  try {
    json reply = json::parse(
        backend.raw_request(json{{"op", "tokenize"}, {"text", "still alive"}}
                                .dump()));
    add_check(checks, "connection survives an error reply",
              reply.contains("tokens"));
  } catch (const std::exception& e) {
    add_check(checks, "connection survives an error reply", false, e.what());
  }
  return checks;
}

}  // namespace binoculars
