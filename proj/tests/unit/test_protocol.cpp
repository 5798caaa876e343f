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

#include <doctest.h>

#include <sstream>

#include "curette/backends.hpp"
#include "curette/protocol.hpp"
#include "test_support.hpp"

using namespace curette;
using namespace curette::protocol;
using testing_support::code_of;

namespace {

struct Fixture {
  std::vector<LossQuery> universe;
  SyntheticLossOracle loss;
  StubGenerator generator;
  ConstantCaptioner captioner{"a constant caption"};
  HashedBowEmbedder embedder{16};
  HashPairScorer scorer;
  Server server;

  static std::vector<LossQuery> make_universe() {
    std::vector<LossQuery> u;
    for (int i = 0; i < 40; ++i) u.push_back({"s" + std::to_string(i), "/i/" + std::to_string(i), "text " + std::to_string(i)});
    return u;
  }
  Fixture()
      : universe(make_universe()),
        loss(SyntheticLossConfig{}, universe),
        server(Server::Roles{&loss, &captioner, &generator, &embedder, &scorer}) {}
};

nlohmann::json loss_payload(const std::vector<LossQuery>& qs, int epoch) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& q : qs) samples.push_back({{"sample_id", q.sample_id}, {"image_uri", q.image_uri}, {"caption_text", q.caption_text}});
  return {{"epoch", epoch}, {"samples", samples}};
}

}  // namespace

TEST_CASE("message json round trips") {
  const Request r{7, kOpEmbedBatch, {{"texts", {"a"}}}};
  const auto back = request_from_json(to_json(r));
  CHECK(back.id == 7);
  CHECK(back.op == kOpEmbedBatch);
  CHECK(back.payload == r.payload);

  const auto ok = response_from_json(to_json(Response::success(3, {{"x", 1}})));
  CHECK(ok.ok);
  CHECK(ok.result["x"] == 1);
  const auto bad = response_from_json(to_json(Response::failure(4, "timeout", "slow")));
  CHECK(!bad.ok);
  CHECK(bad.error_code == "timeout");
  CHECK(to_json(Response::failure(4, "timeout", "slow")).dump() ==
        R"({"error":{"code":"timeout","message":"slow"},"id":4,"ok":false})");
}

TEST_CASE("server handshake and error codes") {
  Fixture f;
  const auto hs = f.server.handshake();
  CHECK(hs.protocol == "curette/1");
  CHECK(hs.ops.size() == 5);
  CHECK(hs.embed_dim == 16);

  CHECK(f.server.handle({1, "nope", {}}).error_code == "unsupported_op");
  CHECK(f.server.handle({2, kOpLossBatch, {{"epoch", 0}, {"samples", nlohmann::json::array()}}}).error_code ==
        "empty_batch");
  const auto bad_line = nlohmann::json::parse(f.server.handle_line("{oops"));
  CHECK(bad_line["id"] == 0);
  CHECK(bad_line["error"]["code"] == "bad_request");

  Server empty(Server::Roles{});
  CHECK(empty.handshake().ops.empty());
  CHECK(empty.handle({1, kOpLossBatch, loss_payload(f.universe, 0)}).error_code == "unsupported_op");
}

TEST_CASE("serve over streams") {
  Fixture f;
  std::istringstream in(nlohmann::json(to_json(Request{5, kOpCaptionBatch, {{"images", {{{"image_uri", "/x"}}}}}}))
                            .dump() +
                        "\n");
  std::ostringstream out;
  f.server.serve(in, out);
  std::istringstream lines(out.str());
  std::string first;
  std::string second;
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(nlohmann::json::parse(first)["protocol"] == "curette/1");
  const auto resp = response_from_json(nlohmann::json::parse(second));
  CHECK(resp.id == 5);
  CHECK(resp.ok);
}

TEST_CASE("client pairs ids under shuffled responses") {
  Fixture f;
  LoopbackTransport::Options opts;
  opts.shuffle_seed = 99;
  auto transport = std::make_unique<LoopbackTransport>(f.server, opts);
  auto* raw = transport.get();
  ClientOptions co;
  co.batch_size = 3;
  co.max_in_flight = 4;
  auto client = std::make_shared<Client>(std::move(transport), co);
  RemoteLossOracle remote(client);
  const auto got = remote.loss_batch(1, f.universe);
  const auto want = f.loss.loss_batch(1, f.universe);
  CHECK(got == want);
  CHECK(raw->requests_seen() == 14);  // ceil(40 / 3)
  CHECK(raw->max_in_flight() <= 4);
  CHECK(raw->max_in_flight() > 1);
}

TEST_CASE("remote roles match local roles") {
  Fixture f;
  auto client = std::make_shared<Client>(std::make_unique<LoopbackTransport>(f.server, LoopbackTransport::Options{}));
  RemoteEmbedder emb(client);
  CHECK(emb.dimension() == 16);
  const std::vector<std::string> texts{"a b", "c"};
  CHECK(emb.embed_batch(texts) == f.embedder.embed_batch(texts));
  RemoteCaptioner cap(client);
  CHECK(cap.caption_batch(texts) == std::vector<std::string>{"a constant caption", "a constant caption"});
  RemotePairScorer scorer(client);
  const std::vector<PairQuery> pairs{{"/a", "x"}};
  CHECK(scorer.pair_score_batch(pairs) == f.scorer.pair_score_batch(pairs));
}

TEST_CASE("timeouts and version mismatch") {
  Fixture f;
  LoopbackTransport::Options silent;
  silent.silent_ops = {kOpGenerateImage};
  ClientOptions co;
  co.generate_timeout = std::chrono::milliseconds(20);
  co.retries = 1;
  auto client = std::make_shared<Client>(std::make_unique<LoopbackTransport>(f.server, silent), co);
  RemoteGenerator gen(client);
  const std::vector<GenerationRequest> reqs{{"p", "pid", 1, "/tmp/never.png", "i"}};
  const auto out = gen.generate(reqs);
  REQUIRE(out.size() == 1);
  CHECK(!out[0].ok);
  CHECK(out[0].error_code == "timeout");
  // other ops still work on the same connection
  RemoteCaptioner cap(client);
  CHECK(cap.caption_batch(std::vector<std::string>{"/x"}).size() == 1);

  LoopbackTransport::Options wrong;
  wrong.protocol_override = "curette/2";
  CHECK(code_of([&] { Client c(std::make_unique<LoopbackTransport>(f.server, wrong)); }) ==
        ErrorCode::kBackendUnavailable);

  LoopbackTransport::Options mute;
  mute.send_handshake = false;
  ClientOptions quick;
  quick.handshake_timeout = std::chrono::milliseconds(20);
  CHECK(code_of([&] { Client c(std::make_unique<LoopbackTransport>(f.server, mute), quick); }) ==
        ErrorCode::kBackendUnavailable);
}

TEST_CASE("failed responses surface as BackendError") {
  Fixture f;
  auto client = std::make_shared<Client>(std::make_unique<LoopbackTransport>(f.server, LoopbackTransport::Options{}));
  std::string code;
  try {
    client->call_checked(kOpLossBatch, {{{"epoch", 0}, {"samples", nlohmann::json::array()}}});
  } catch (const BackendError& e) {
    code = e.wire_code();
  }
  CHECK(code == "empty_batch");
}

TEST_CASE("transcripts record and replay") {
  Fixture f;
  std::vector<Request> reqs{{1, kOpLossBatch, loss_payload({f.universe.begin(), f.universe.begin() + 3}, 2)},
                            {2, kOpEmbedBatch, {{"texts", {"a dog", "a cat"}}}},
                            {3, kOpCaptionBatch, {{"images", nlohmann::json::array()}}},
                            {4, "bogus", nlohmann::json::object()}};
  const auto transcript = record_transcript(f.server, reqs);

  LoopbackTransport::Options opts;
  opts.shuffle_seed = 5;
  LoopbackTransport loop(f.server, opts);
  const auto result = replay_transcript(loop, transcript);
  CHECK(result.passed());
  CHECK(result.exchanges == 4);

  // a server with a different caption breaks nothing but the caption exchanges
  ConstantCaptioner other("different");
  Server changed(Server::Roles{&f.loss, &other, &f.generator, &f.embedder, &f.scorer});
  std::vector<Request> cap_req{{1, kOpCaptionBatch, {{"images", {{{"image_uri", "/x"}}}}}}};
  const auto t2 = record_transcript(f.server, cap_req);
  LoopbackTransport loop2(changed, {});
  const auto r2 = replay_transcript(loop2, t2);
  CHECK(!r2.passed());
  CHECK(r2.mismatches.size() == 1);
}

TEST_CASE("json_close") {
  const auto a = nlohmann::json::parse(R"({"x":[1.0,2.0],"s":"t"})");
  const auto b = nlohmann::json::parse(R"({"x":[1.0000001,2.0],"s":"t"})");
  const auto c = nlohmann::json::parse(R"({"x":[1.1,2.0],"s":"t"})");
  CHECK(json_close(a, b, 1e-6));
  std::string where;
  CHECK(!json_close(a, c, 1e-6, &where));
  CHECK(where.find("x") != std::string::npos);
  CHECK(!json_close(a, nlohmann::json::parse(R"({"x":[1.0,2.0],"s":"u"})"), 1e-6));
}

#ifdef CURETTE_CLI_PATH
TEST_CASE("process transport talks to the CLI backend server") {
  auto client = std::make_shared<Client>(
      std::make_unique<ProcessTransport>(std::string(CURETTE_CLI_PATH) + " backend serve --seed 3"));
  CHECK(client->supports(kOpGenerateImage));
  CHECK(client->supports(kOpEmbedBatch));
  RemoteEmbedder emb(client);
  HashedBowEmbedder local;
  const std::vector<std::string> texts{"a dog runs"};
  const auto got = emb.embed_batch(texts);
  const auto want = local.embed_batch(texts);
  REQUIRE(got.size() == 1);
  REQUIRE(got[0].size() == want[0].size());
  for (std::size_t i = 0; i < want[0].size(); ++i) CHECK(got[0][i] == doctest::Approx(want[0][i]).epsilon(1e-12));

  CHECK(code_of([] {
          Client c(std::make_unique<ProcessTransport>("exit 0"));
        }) == ErrorCode::kBackendUnavailable);
}
#endif
