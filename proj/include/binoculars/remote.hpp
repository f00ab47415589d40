#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "binoculars/backend.hpp"

namespace binoculars {

// Remote logits protocol: newline-delimited JSON over TCP, one request and
// one reply per line.
//
//   {"op":"tokenize","text":str}
//       -> {"tokens":[int], "vocab_id":str, "vocab_size":int}
//   {"op":"predict","tokens":[int],"topk":null}
//       -> {"logprobs":[[float; V]; L], "vocab_id":str}
//   {"op":"sample","tokens":[int],"max_new":int,"seed":int}
//       -> {"tokens":[int]}
//
// Any failure is {"error":str}. Rows are full-vocabulary natural-log
// probabilities; "topk" is reserved and must be null.

/// Client side. Keeps a small pool of connections, each owned by one
/// in-flight request, so scoring workers can call it concurrently.
class RemoteBackend : public LogitBackend {
 public:
  RemoteBackend(std::string host, int port, Role role_hint = Role::generic);
  ~RemoteBackend() override;

  BackendDescriptor descriptor() const override;
  TokenSequence tokenize(const std::string& text) const override;
  std::string detokenize(std::span<const int32_t> tokens) const override;
  PredictionMatrix predict(const TokenSequence& seq) const override;
  TokenSequence sample(const TokenSequence& prompt, int max_new,
                       uint64_t seed) const override;

  // One raw request line -> raw reply line; used by the conformance probe.
  std::string raw_request(const std::string& line) const;

 private:
  struct Conn;
  std::unique_ptr<Conn> acquire() const;
  void release(std::unique_ptr<Conn> conn) const;
  std::string request(const std::string& line) const;

  std::string host_;
  int port_;
  Role role_hint_;
  mutable std::mutex pool_mutex_;
  mutable std::vector<std::unique_ptr<Conn>> pool_;
  mutable std::mutex meta_mutex_;
  mutable std::string vocab_id_;    // cached from first reply
  mutable int32_t vocab_size_ = 0;  // cached from first reply
};

/// Serves any LogitBackend over the wire; wraps the synthetic n-gram backend
/// as the in-repo reference server for tests and for `binoculars serve`.
class LogitServer {
 public:
  explicit LogitServer(BackendPtr backend);
  ~LogitServer();

  LogitServer(const LogitServer&) = delete;
  LogitServer& operator=(const LogitServer&) = delete;

  // Binds 127.0.0.1:port (0 picks an ephemeral port) and starts serving.
  // Returns the bound port.
  int start(int port = 0);
  void stop();
  int port() const { return port_number_; }

 private:
  void accept_loop();
  void handle_client(int fd);
  std::string handle_request_line(const std::string& line) const;

  BackendPtr backend_;
  int listen_fd_ = -1;
  int port_number_ = 0;
  std::thread accept_thread_;
  std::mutex clients_mutex_;
  std::vector<int> client_fds_;
  std::vector<std::thread> client_threads_;
  bool stopping_ = false;
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Protocol conformance probes runnable against any address: shapes, simplex
// rows, determinism, and error replies.
std::vector<ConformanceCheck> run_protocol_conformance(const std::string& host,
                                                       int port);

}  // namespace binoculars
