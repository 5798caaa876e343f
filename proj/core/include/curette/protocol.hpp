// Copyright 2026 The Curette Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "curette/backends.hpp"

namespace curette::protocol {

// Wire format: newline-delimited JSON over a child's stdin/stdout.
//
//   backend -> engine, first line: {"protocol":"curette/1","ops":[...],"embed_dim":N}
//   engine  -> backend:            {"id":1,"op":"loss_batch","payload":{...}}
//   backend -> engine:             {"id":1,"ok":true,"result":{...}}
//                                  {"id":1,"ok":false,"error":{"code":"...","message":"..."}}

inline constexpr const char* kProtocolVersion = "curette/1";

inline constexpr const char* kOpLossBatch = "loss_batch";
inline constexpr const char* kOpCaptionBatch = "caption_batch";
inline constexpr const char* kOpGenerateImage = "generate_image";
inline constexpr const char* kOpEmbedBatch = "embed_batch";
inline constexpr const char* kOpPairScoreBatch = "pair_score_batch";

struct Handshake {
  std::string protocol = kProtocolVersion;
  std::set<std::string> ops;
  std::optional<std::size_t> embed_dim;
};

nlohmann::json to_json(const Handshake& h);
Handshake handshake_from_json(const nlohmann::json& j);

struct Request {
  std::uint64_t id = 0;
  std::string op;
  nlohmann::json payload;
};

struct Response {
  std::uint64_t id = 0;
  bool ok = false;
  nlohmann::json result;
  std::string error_code;
  std::string error_message;

  static Response success(std::uint64_t id, nlohmann::json result);
  static Response failure(std::uint64_t id, std::string code, std::string message);
};

nlohmann::json to_json(const Request& r);
nlohmann::json to_json(const Response& r);
Request request_from_json(const nlohmann::json& j);
Response response_from_json(const nlohmann::json& j);

/// Line transport. recv_line returns nullopt when `timeout` elapses without a
/// complete line and throws Error(kBackendUnavailable) once the peer is gone.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(std::string_view line) = 0;
  virtual std::optional<std::string> recv_line(std::chrono::milliseconds timeout) = 0;
};

/// Runs `/bin/sh -c command` with piped stdin/stdout; stderr is inherited.
/// The child is terminated when the transport is destroyed.
class ProcessTransport : public Transport {
 public:
  explicit ProcessTransport(const std::string& command);
  ~ProcessTransport() override;
  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  void send_line(std::string_view line) override;
  std::optional<std::string> recv_line(std::chrono::milliseconds timeout) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Server side of the protocol, backed by in-process role implementations.
/// Any role may be absent; requests for it answer "unsupported_op".
class Server {
 public:
  struct Roles {
    LossOracle* loss = nullptr;
    Captioner* captioner = nullptr;
    ImageGenerator* generator = nullptr;
    Embedder* embedder = nullptr;
    PairScorer* scorer = nullptr;
  };

  explicit Server(Roles roles) : roles_(roles) {}

  Handshake handshake() const;
  Response handle(const Request& request);
  /// Parses one request line; malformed input yields a "bad_request"
  /// response with id 0.
  std::string handle_line(std::string_view line);

  /// Writes the handshake, then answers each input line until EOF.
  void serve(std::istream& in, std::ostream& out);

 private:
  Roles roles_;
};

/// In-memory transport in front of a Server, for tests. Requests are queued
/// and answered on the next recv; `shuffle_seed` answers each queued batch in
/// a seeded random order. Requests for `silent_ops` are never answered, which
/// looks like a timeout to the client.
class LoopbackTransport : public Transport {
 public:
  struct Options {
    std::optional<std::uint64_t> shuffle_seed;
    std::set<std::string> silent_ops;
    bool send_handshake = true;
    std::string protocol_override;  // replaces the handshake version when set
  };

  LoopbackTransport(Server& server, Options options);

  void send_line(std::string_view line) override;
  std::optional<std::string> recv_line(std::chrono::milliseconds timeout) override;

  std::size_t requests_seen() const { return requests_seen_; }
  std::size_t max_in_flight() const { return max_in_flight_; }

 private:
  Server& server_;
  Options options_;
  std::deque<std::string> pending_requests_;
  std::deque<std::string> ready_;
  std::mt19937_64 rng_;
  std::size_t requests_seen_ = 0;
  std::size_t max_in_flight_ = 0;
};

struct ClientOptions {
  std::chrono::milliseconds generate_timeout{120'000};
  std::chrono::milliseconds default_timeout{30'000};
  std::chrono::milliseconds handshake_timeout{30'000};
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 8;
  /// Extra attempts after a timeout or a failed response (0 or 1).
  int retries = 0;
};

/// Engine side of one backend connection. Performs the handshake on
/// construction and refuses a version mismatch with BackendUnavailable.
class Client {
 public:
  Client(std::unique_ptr<Transport> transport, ClientOptions options = {});

  const Handshake& handshake() const { return handshake_; }
  const ClientOptions& options() const { return options_; }
  bool supports(const std::string& op) const { return handshake_.ops.contains(op); }

  /// Sends one request per payload, keeping up to max_in_flight outstanding,
  /// and returns the responses in payload order. Responses may arrive in any
  /// order; stray ids are dropped. A request with no answer inside its
  /// timeout yields a "timeout" failure response (after retries).
  std::vector<Response> call(const std::string& op, const std::vector<nlohmann::json>& payloads);

  /// As call(), but throws BackendError on the first failed response.
  std::vector<nlohmann::json> call_checked(const std::string& op, const std::vector<nlohmann::json>& payloads);

 private:
  std::chrono::milliseconds timeout_for(const std::string& op) const;

  std::unique_ptr<Transport> transport_;
  ClientOptions options_;
  Handshake handshake_;
  std::uint64_t next_id_ = 1;
};

// Role adapters over a Client. Batches larger than batch_size are split.

class RemoteLossOracle : public LossOracle {
 public:
  explicit RemoteLossOracle(std::shared_ptr<Client> client) : client_(std::move(client)) {}
  std::vector<double> loss_batch(int epoch, std::span<const LossQuery> samples) override;

 private:
  std::shared_ptr<Client> client_;
};

class RemoteGenerator : public ImageGenerator {
 public:
  explicit RemoteGenerator(std::shared_ptr<Client> client) : client_(std::move(client)) {}
  std::vector<GenerationOutcome> generate(std::span<const GenerationRequest> requests) override;

 private:
  std::shared_ptr<Client> client_;
};

class RemoteCaptioner : public Captioner {
 public:
  explicit RemoteCaptioner(std::shared_ptr<Client> client) : client_(std::move(client)) {}
  std::vector<std::string> caption_batch(std::span<const std::string> image_uris) override;

 private:
  std::shared_ptr<Client> client_;
};

class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(std::shared_ptr<Client> client);
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;

 private:
  std::shared_ptr<Client> client_;
  std::size_t dimension_ = 0;
};

class RemotePairScorer : public PairScorer {
 public:
  explicit RemotePairScorer(std::shared_ptr<Client> client) : client_(std::move(client)) {}
  std::vector<double> pair_score_batch(std::span<const PairQuery> pairs) override;

 private:
  std::shared_ptr<Client> client_;
};

// Golden transcripts: NDJSON where the first line is {"handshake":{...}} and
// every further line is {"request":{...},"response":{...}}.

struct TranscriptResult {
  std::size_t exchanges = 0;
  std::vector<std::string> mismatches;
  bool passed() const { return mismatches.empty(); }
};

/// Replays a transcript against a live backend: checks the handshake, sends
/// every recorded request (pipelined, so responses may come back in any
/// order) and compares each response with the recording. Floating-point
/// values compare within `float_tolerance`; everything else exactly.
TranscriptResult replay_transcript(Transport& transport, std::string_view transcript,
                                   double float_tolerance = 1e-6,
                                   std::chrono::milliseconds timeout = std::chrono::milliseconds(30'000));

/// Records a transcript by running `requests` through `server`.
std::string record_transcript(Server& server, const std::vector<Request>& requests);

/// Structural equality with a tolerance on floating-point leaves.
bool json_close(const nlohmann::json& a, const nlohmann::json& b, double tolerance, std::string* where = nullptr);

}  // namespace curette::protocol
