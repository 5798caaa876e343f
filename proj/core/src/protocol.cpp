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

#include "curette/protocol.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "curette/error.hpp"

namespace curette::protocol {
namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void unavailable(const std::string& what) { throw Error(ErrorCode::kBackendUnavailable, what); }

[[noreturn]] void bad_result(const std::string& op, const std::string& what) {
  throw BackendError("bad_result", op + ": " + what);
}

std::vector<std::size_t> batch_bounds(std::size_t n, std::size_t batch) {
  std::vector<std::size_t> bounds;
  if (batch == 0) batch = n;
  for (std::size_t i = 0; i < n; i += batch) bounds.push_back(i);
  bounds.push_back(n);
  return bounds;
}

void require_op(const Client& client, const std::string& op) {
  if (!client.supports(op)) unavailable("backend does not support '" + op + "'");
}

}  // namespace

nlohmann::json to_json(const Handshake& h) {
  nlohmann::json j{{"protocol", h.protocol}, {"ops", h.ops}};
  if (h.embed_dim) j["embed_dim"] = *h.embed_dim;
  return j;
}

Handshake handshake_from_json(const nlohmann::json& j) {
  Handshake h;
  h.protocol = j.at("protocol").get<std::string>();
  if (const auto ops = j.find("ops"); ops != j.end()) h.ops = ops->get<std::set<std::string>>();
  if (const auto dim = j.find("embed_dim"); dim != j.end() && !dim->is_null()) h.embed_dim = dim->get<std::size_t>();
  return h;
}

Response Response::success(std::uint64_t id, nlohmann::json result) {
  Response r;
  r.id = id;
  r.ok = true;
  r.result = std::move(result);
  return r;
}

Response Response::failure(std::uint64_t id, std::string code, std::string message) {
  Response r;
  r.id = id;
  r.ok = false;
  r.error_code = std::move(code);
  r.error_message = std::move(message);
  return r;
}

nlohmann::json to_json(const Request& r) { return {{"id", r.id}, {"op", r.op}, {"payload", r.payload}}; }

nlohmann::json to_json(const Response& r) {
  if (r.ok) return {{"id", r.id}, {"ok", true}, {"result", r.result}};
  return {{"id", r.id}, {"ok", false}, {"error", {{"code", r.error_code}, {"message", r.error_message}}}};
}

Request request_from_json(const nlohmann::json& j) {
  Request r;
  r.id = j.at("id").get<std::uint64_t>();
  r.op = j.at("op").get<std::string>();
  r.payload = j.value("payload", nlohmann::json::object());
  return r;
}

Response response_from_json(const nlohmann::json& j) {
  Response r;
  r.id = j.at("id").get<std::uint64_t>();
  r.ok = j.at("ok").get<bool>();
  if (r.ok) {
    r.result = j.value("result", nlohmann::json::object());
  } else {
    const auto& err = j.at("error");
    r.error_code = err.value("code", std::string("unknown"));
    r.error_message = err.value("message", std::string());
  }
  return r;
}

// ---------------------------------------------------------------------------
// ProcessTransport

ProcessTransport::ProcessTransport(const std::string& command) {
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) unavailable("pipe: " + std::string(std::strerror(errno)));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    unavailable("pipe: " + std::string(std::strerror(errno)));
  }
  const pid_t pid = ::fork();
  if (pid < 0) unavailable("fork: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

ProcessTransport::~ProcessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // give a well-behaved backend a moment to exit on EOF
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, &status, 0);
  }
}

void ProcessTransport::send_line(std::string_view line) {
  std::string data(line);
  data.push_back('\n');
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      unavailable("write to backend: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> ProcessTransport::recv_line(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() < 0) return std::nullopt;
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      unavailable("poll: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) return std::nullopt;
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      unavailable("read from backend: " + std::string(std::strerror(errno)));
    }
    if (n == 0) unavailable("backend closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

// ---------------------------------------------------------------------------
// Server

Handshake Server::handshake() const {
  Handshake h;
  if (roles_.loss) h.ops.insert(kOpLossBatch);
  if (roles_.captioner) h.ops.insert(kOpCaptionBatch);
  if (roles_.generator) h.ops.insert(kOpGenerateImage);
  if (roles_.embedder) {
    h.ops.insert(kOpEmbedBatch);
    h.embed_dim = roles_.embedder->dimension();
  }
  if (roles_.scorer) h.ops.insert(kOpPairScoreBatch);
  return h;
}

Response Server::handle(const Request& req) {
  const auto& p = req.payload;
  try {
    if (req.op == kOpLossBatch && roles_.loss) {
      std::vector<LossQuery> queries;
      for (const auto& s : p.at("samples")) {
        queries.push_back({s.at("sample_id").get<std::string>(), s.value("image_uri", std::string()),
                           s.at("caption_text").get<std::string>()});
      }
      const auto losses = roles_.loss->loss_batch(p.value("epoch", 0), queries);
      nlohmann::json out = nlohmann::json::array();
      for (std::size_t i = 0; i < queries.size(); ++i) {
        out.push_back({{"sample_id", queries[i].sample_id}, {"loss", losses[i]}});
      }
      return Response::success(req.id, {{"losses", std::move(out)}});
    }
    if (req.op == kOpCaptionBatch && roles_.captioner) {
      std::vector<std::string> uris;
      for (const auto& img : p.at("images")) uris.push_back(img.at("image_uri").get<std::string>());
      const auto captions = roles_.captioner->caption_batch(uris);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& c : captions) out.push_back({{"caption_text", c}});
      return Response::success(req.id, {{"captions", std::move(out)}});
    }
    if (req.op == kOpGenerateImage && roles_.generator) {
      GenerationRequest g{p.at("prompt").get<std::string>(), p.value("prompt_id", std::string()),
                          p.at("seed").get<std::uint64_t>(), p.at("out_uri").get<std::string>(),
                          p.value("image_id", std::string())};
      const auto outcome = roles_.generator->generate(std::span<const GenerationRequest>(&g, 1)).at(0);
      if (!outcome.ok) return Response::failure(req.id, outcome.error_code, outcome.message);
      return Response::success(req.id, {{"image_uri", outcome.image_uri}});
    }
    if (req.op == kOpEmbedBatch && roles_.embedder) {
      const auto texts = p.at("texts").get<std::vector<std::string>>();
      return Response::success(req.id, {{"embeddings", roles_.embedder->embed_batch(texts)}});
    }
    if (req.op == kOpPairScoreBatch && roles_.scorer) {
      std::vector<PairQuery> pairs;
      for (const auto& q : p.at("pairs")) {
        pairs.push_back({q.at("image_uri").get<std::string>(), q.at("text").get<std::string>()});
      }
      return Response::success(req.id, {{"scores", roles_.scorer->pair_score_batch(pairs)}});
    }
    return Response::failure(req.id, "unsupported_op", "op '" + req.op + "' is not served here");
  } catch (const BackendError& e) {
    return Response::failure(req.id, e.wire_code(), e.message());
  } catch (const nlohmann::json::exception& e) {
    return Response::failure(req.id, "bad_request", e.what());
  } catch (const std::exception& e) {
    return Response::failure(req.id, "internal", e.what());
  }
}

std::string Server::handle_line(std::string_view line) {
  Request req;
  try {
    req = request_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::exception& e) {
    return to_json(Response::failure(0, "bad_request", e.what())).dump();
  }
  return to_json(handle(req)).dump();
}

void Server::serve(std::istream& in, std::ostream& out) {
  out << to_json(handshake()).dump() << "\n" << std::flush;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << handle_line(line) << "\n" << std::flush;
  }
}

// ---------------------------------------------------------------------------
// LoopbackTransport

LoopbackTransport::LoopbackTransport(Server& server, Options options)
    : server_(server), options_(std::move(options)), rng_(options_.shuffle_seed.value_or(0)) {
  if (options_.send_handshake) {
    auto h = server_.handshake();
    if (!options_.protocol_override.empty()) h.protocol = options_.protocol_override;
    ready_.push_back(to_json(h).dump());
  }
}

void LoopbackTransport::send_line(std::string_view line) {
  ++requests_seen_;
  pending_requests_.emplace_back(line);
  max_in_flight_ = std::max(max_in_flight_, pending_requests_.size() + ready_.size());
}

std::optional<std::string> LoopbackTransport::recv_line(std::chrono::milliseconds timeout) {
  if (ready_.empty() && !pending_requests_.empty()) {
    std::vector<std::string> answers;
    for (const auto& line : pending_requests_) {
      if (!options_.silent_ops.empty()) {
        try {
          if (options_.silent_ops.contains(nlohmann::json::parse(line).value("op", std::string()))) continue;
        } catch (const nlohmann::json::exception&) {
        }
      }
      answers.push_back(server_.handle_line(line));
    }
    pending_requests_.clear();
    if (options_.shuffle_seed) std::shuffle(answers.begin(), answers.end(), rng_);
    for (auto& a : answers) ready_.push_back(std::move(a));
  }
  if (ready_.empty()) {
    std::this_thread::sleep_for(timeout);
    return std::nullopt;
  }
  std::string line = std::move(ready_.front());
  ready_.pop_front();
  return line;
}

// ---------------------------------------------------------------------------
// Client

Client::Client(std::unique_ptr<Transport> transport, ClientOptions options)
    : transport_(std::move(transport)), options_(options) {
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  const auto line = transport_->recv_line(options_.handshake_timeout);
  if (!line) unavailable("no handshake from backend");
  try {
    handshake_ = handshake_from_json(nlohmann::json::parse(*line));
  } catch (const nlohmann::json::exception& e) {
    unavailable(std::string("malformed handshake: ") + e.what());
  }
  if (handshake_.protocol != kProtocolVersion) {
    unavailable("protocol mismatch: backend speaks '" + handshake_.protocol + "', engine needs '" +
                kProtocolVersion + "'");
  }
}

std::chrono::milliseconds Client::timeout_for(const std::string& op) const {
  return op == kOpGenerateImage ? options_.generate_timeout : options_.default_timeout;
}

std::vector<Response> Client::call(const std::string& op, const std::vector<nlohmann::json>& payloads) {
  struct Pending {
    std::size_t index;
    int attempt;
    Clock::time_point deadline;
  };
  const std::size_t n = payloads.size();
  std::vector<std::optional<Response>> results(n);
  std::map<std::uint64_t, Pending> in_flight;
  std::deque<std::pair<std::size_t, int>> queue;
  for (std::size_t i = 0; i < n; ++i) queue.emplace_back(i, 0);
  std::size_t done = 0;
  const auto timeout = timeout_for(op);

  const auto finish = [&](const Pending& p, Response r) {
    if (!r.ok && p.attempt < options_.retries) {
      queue.emplace_front(p.index, p.attempt + 1);
      return;
    }
    results[p.index] = std::move(r);
    ++done;
  };

  while (done < n) {
    while (in_flight.size() < options_.max_in_flight && !queue.empty()) {
      const auto [index, attempt] = queue.front();
      queue.pop_front();
      const std::uint64_t id = next_id_++;
      transport_->send_line(to_json(Request{id, op, payloads[index]}).dump());
      in_flight.emplace(id, Pending{index, attempt, Clock::now() + timeout});
    }
    auto earliest = Clock::time_point::max();
    for (const auto& [_, p] : in_flight) earliest = std::min(earliest, p.deadline);
    const auto wait = std::max(std::chrono::milliseconds(0),
                               std::chrono::duration_cast<std::chrono::milliseconds>(earliest - Clock::now()));
    const auto line = transport_->recv_line(wait);
    if (!line) {
      const auto now = Clock::now();
      for (auto it = in_flight.begin(); it != in_flight.end();) {
        if (it->second.deadline <= now) {
          const Pending p = it->second;
          it = in_flight.erase(it);
          finish(p, Response::failure(0, "timeout", op + " timed out after " + std::to_string(timeout.count()) + " ms"));
        } else {
          ++it;
        }
      }
      continue;
    }
    Response resp;
    try {
      resp = response_from_json(nlohmann::json::parse(*line));
    } catch (const nlohmann::json::exception& e) {
      unavailable(std::string("malformed response line: ") + e.what());
    }
    const auto it = in_flight.find(resp.id);
    if (it == in_flight.end()) continue;  // late answer to a timed-out request
    const Pending p = it->second;
    in_flight.erase(it);
    finish(p, std::move(resp));
  }

  std::vector<Response> out;
  out.reserve(n);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

std::vector<nlohmann::json> Client::call_checked(const std::string& op, const std::vector<nlohmann::json>& payloads) {
  auto responses = call(op, payloads);
  std::vector<nlohmann::json> out;
  out.reserve(responses.size());
  for (auto& r : responses) {
    if (!r.ok) throw BackendError(r.error_code, op + ": " + r.error_message);
    out.push_back(std::move(r.result));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Role adapters

std::vector<double> RemoteLossOracle::loss_batch(int epoch, std::span<const LossQuery> samples) {
  require_op(*client_, kOpLossBatch);
  if (samples.empty()) throw BackendError("empty_batch", "loss_batch needs at least one sample");
  const auto bounds = batch_bounds(samples.size(), client_->options().batch_size);
  std::vector<nlohmann::json> payloads;
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = bounds[b]; i < bounds[b + 1]; ++i) {
      items.push_back({{"sample_id", samples[i].sample_id},
                       {"image_uri", samples[i].image_uri},
                       {"caption_text", samples[i].caption_text}});
    }
    payloads.push_back({{"epoch", epoch}, {"samples", std::move(items)}});
  }
  const auto results = client_->call_checked(kOpLossBatch, payloads);
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t b = 0; b < results.size(); ++b) {
    const auto& losses = results[b].at("losses");
    if (losses.size() != bounds[b + 1] - bounds[b]) bad_result(kOpLossBatch, "wrong number of losses");
    for (std::size_t k = 0; k < losses.size(); ++k) {
      const auto& expected_id = samples[bounds[b] + k].sample_id;
      if (losses[k].value("sample_id", expected_id) != expected_id) bad_result(kOpLossBatch, "sample order changed");
      const double loss = losses[k].at("loss").get<double>();
      if (!std::isfinite(loss) || loss < 0.0) bad_result(kOpLossBatch, "loss for '" + expected_id + "' not finite >= 0");
      out.push_back(loss);
    }
  }
  return out;
}

std::vector<GenerationOutcome> RemoteGenerator::generate(std::span<const GenerationRequest> requests) {
  require_op(*client_, kOpGenerateImage);
  if (requests.empty()) throw BackendError("empty_batch", "generate needs at least one request");
  std::vector<nlohmann::json> payloads;
  for (const auto& r : requests) {
    payloads.push_back({{"prompt", r.prompt},
                        {"prompt_id", r.prompt_id},
                        {"seed", r.seed},
                        {"out_uri", r.out_uri},
                        {"image_id", r.image_id}});
  }
  const auto responses = client_->call(kOpGenerateImage, payloads);
  std::vector<GenerationOutcome> out;
  for (const auto& r : responses) {
    if (!r.ok) {
      out.push_back(GenerationOutcome::failure(r.error_code, r.error_message));
    } else if (!r.result.contains("image_uri") || !r.result["image_uri"].is_string()) {
      out.push_back(GenerationOutcome::failure("bad_result", "generate_image: missing image_uri"));
    } else {
      out.push_back(GenerationOutcome::success(r.result["image_uri"].get<std::string>()));
    }
  }
  return out;
}

std::vector<std::string> RemoteCaptioner::caption_batch(std::span<const std::string> image_uris) {
  require_op(*client_, kOpCaptionBatch);
  if (image_uris.empty()) throw BackendError("empty_batch", "caption_batch needs at least one image");
  const auto bounds = batch_bounds(image_uris.size(), client_->options().batch_size);
  std::vector<nlohmann::json> payloads;
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = bounds[b]; i < bounds[b + 1]; ++i) items.push_back({{"image_uri", image_uris[i]}});
    payloads.push_back({{"images", std::move(items)}});
  }
  const auto results = client_->call_checked(kOpCaptionBatch, payloads);
  std::vector<std::string> out;
  for (std::size_t b = 0; b < results.size(); ++b) {
    const auto& caps = results[b].at("captions");
    if (caps.size() != bounds[b + 1] - bounds[b]) bad_result(kOpCaptionBatch, "wrong number of captions");
    for (const auto& c : caps) out.push_back(c.at("caption_text").get<std::string>());
  }
  return out;
}

RemoteEmbedder::RemoteEmbedder(std::shared_ptr<Client> client) : client_(std::move(client)) {
  require_op(*client_, kOpEmbedBatch);
  if (!client_->handshake().embed_dim) unavailable("embedding backend did not announce embed_dim");
  dimension_ = *client_->handshake().embed_dim;
}

std::vector<std::vector<double>> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
  if (texts.empty()) throw BackendError("empty_batch", "embed_batch needs at least one text");
  const auto bounds = batch_bounds(texts.size(), client_->options().batch_size);
  std::vector<nlohmann::json> payloads;
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    payloads.push_back({{"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(bounds[b]),
                                                           texts.begin() + static_cast<std::ptrdiff_t>(bounds[b + 1]))}});
  }
  const auto results = client_->call_checked(kOpEmbedBatch, payloads);
  std::vector<std::vector<double>> out;
  for (std::size_t b = 0; b < results.size(); ++b) {
    auto vecs = results[b].at("embeddings").get<std::vector<std::vector<double>>>();
    if (vecs.size() != bounds[b + 1] - bounds[b]) bad_result(kOpEmbedBatch, "wrong number of embeddings");
    for (auto& v : vecs) {
      if (v.size() != dimension_) bad_result(kOpEmbedBatch, "embedding dimension differs from handshake");
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<double> RemotePairScorer::pair_score_batch(std::span<const PairQuery> pairs) {
  require_op(*client_, kOpPairScoreBatch);
  if (pairs.empty()) throw BackendError("empty_batch", "pair_score_batch needs at least one pair");
  const auto bounds = batch_bounds(pairs.size(), client_->options().batch_size);
  std::vector<nlohmann::json> payloads;
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = bounds[b]; i < bounds[b + 1]; ++i) {
      items.push_back({{"image_uri", pairs[i].image_uri}, {"text", pairs[i].text}});
    }
    payloads.push_back({{"pairs", std::move(items)}});
  }
  const auto results = client_->call_checked(kOpPairScoreBatch, payloads);
  std::vector<double> out;
  for (std::size_t b = 0; b < results.size(); ++b) {
    const auto scores = results[b].at("scores").get<std::vector<double>>();
    if (scores.size() != bounds[b + 1] - bounds[b]) bad_result(kOpPairScoreBatch, "wrong number of scores");
    out.insert(out.end(), scores.begin(), scores.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transcripts

namespace {

// Prefixes a path segment onto a mismatch description: ".a[2].b: 1 vs 2".
std::string nest(const std::string& segment, const std::string& inner) {
  const bool is_path = !inner.empty() && (inner.front() == '.' || inner.front() == '[');
  return segment + (is_path ? "" : ": ") + inner;
}

}  // namespace

bool json_close(const nlohmann::json& a, const nlohmann::json& b, double tolerance, std::string* where) {
  const auto fail = [&](const std::string& msg) {
    if (where) *where = msg;
    return false;
  };
  if (a.is_number() && b.is_number()) {
    if (a.is_number_float() || b.is_number_float()) {
      const double x = a.get<double>();
      const double y = b.get<double>();
      if (std::abs(x - y) > tolerance) return fail(a.dump() + " vs " + b.dump());
      return true;
    }
    if (a != b) return fail(a.dump() + " vs " + b.dump());
    return true;
  }
  if (a.type() != b.type()) return fail("type differs: " + a.dump() + " vs " + b.dump());
  if (a.is_array()) {
    if (a.size() != b.size()) return fail("array length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!json_close(a[i], b[i], tolerance, where)) {
        if (where) *where = nest("[" + std::to_string(i) + "]", *where);
        return false;
      }
    }
    return true;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) return fail("object keys differ: " + a.dump() + " vs " + b.dump());
    for (const auto& [key, value] : a.items()) {
      const auto it = b.find(key);
      if (it == b.end()) return fail("missing key '" + key + "'");
      if (!json_close(value, *it, tolerance, where)) {
        if (where) *where = nest("." + key, *where);
        return false;
      }
    }
    return true;
  }
  if (a != b) return fail(a.dump() + " vs " + b.dump());
  return true;
}

TranscriptResult replay_transcript(Transport& transport, std::string_view transcript, double float_tolerance,
                                   std::chrono::milliseconds timeout) {
  TranscriptResult result;
  std::optional<nlohmann::json> recorded_handshake;
  std::map<std::uint64_t, std::pair<Request, nlohmann::json>> exchanges;
  std::vector<std::uint64_t> order;

  std::istringstream in{std::string(transcript)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, "transcript line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("handshake")) {
      recorded_handshake = j["handshake"];
      continue;
    }
    Request req = request_from_json(j.at("request"));
    order.push_back(req.id);
    exchanges.emplace(req.id, std::make_pair(std::move(req), j.at("response")));
  }

  const auto hs = transport.recv_line(timeout);
  if (!hs) {
    result.mismatches.push_back("no handshake");
    return result;
  }
  if (recorded_handshake) {
    std::string where;
    if (!json_close(*recorded_handshake, nlohmann::json::parse(*hs), float_tolerance, &where)) {
      result.mismatches.push_back("handshake: " + where);
    }
  }

  for (const auto id : order) transport.send_line(to_json(exchanges.at(id).first).dump());
  std::set<std::uint64_t> outstanding(order.begin(), order.end());
  while (!outstanding.empty()) {
    const auto got = transport.recv_line(timeout);
    if (!got) {
      for (const auto id : outstanding) result.mismatches.push_back("id " + std::to_string(id) + ": no response");
      break;
    }
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(*got);
    } catch (const nlohmann::json::exception& e) {
      result.mismatches.push_back(std::string("malformed response: ") + e.what());
      continue;
    }
    const auto id = resp.value("id", std::uint64_t{0});
    if (!outstanding.erase(id)) {
      result.mismatches.push_back("unexpected or duplicate response id " + std::to_string(id));
      continue;
    }
    ++result.exchanges;
    std::string where;
    if (!json_close(exchanges.at(id).second, resp, float_tolerance, &where)) {
      result.mismatches.push_back("id " + std::to_string(id) + ": " + where);
    }
  }
  return result;
}

std::string record_transcript(Server& server, const std::vector<Request>& requests) {
  std::string out = nlohmann::json{{"handshake", to_json(server.handshake())}}.dump() + "\n";
  for (const auto& req : requests) {
    out += nlohmann::json{{"request", to_json(req)}, {"response", to_json(server.handle(req))}}.dump() + "\n";
  }
  return out;
}

}  // namespace curette::protocol
