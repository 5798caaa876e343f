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

#include "curette/backends.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "curette/capmetrics.hpp"
#include "curette/dataset.hpp"
#include "curette/error.hpp"
#include "curette/hash.hpp"

namespace curette {
namespace {

constexpr std::array<unsigned char, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
constexpr std::uint32_t kStubSide = 8;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 3]));
}

void put_chunk(std::string& out, std::string_view type, std::string_view data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type);
  body += data;
  out += body;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

std::string encode_stub_png(const GenerationRequest& req) {
  const std::uint64_t key = hash64({std::string_view(req.prompt_id), req.seed});
  std::string raw;
  for (std::uint32_t y = 0; y < kStubSide; ++y) {
    raw.push_back('\0');  // filter: none
    for (std::uint32_t x = 0; x < kStubSide; ++x) {
      const std::uint64_t px = hash64({key, static_cast<std::uint64_t>(y * kStubSide + x)});
      raw.push_back(static_cast<char>(px & 0xff));
      raw.push_back(static_cast<char>((px >> 8) & 0xff));
      raw.push_back(static_cast<char>((px >> 16) & 0xff));
    }
  }
  uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_len, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error(ErrorCode::kIoError, "zlib compression failed");
  }
  packed.resize(packed_len);

  std::string png(kPngSignature.begin(), kPngSignature.end());
  std::string ihdr;
  put_u32(ihdr, kStubSide);
  put_u32(ihdr, kStubSide);
  ihdr += std::string{8, 2, 0, 0, 0};  // 8-bit RGB, no interlace
  put_chunk(png, "IHDR", ihdr);
  const auto text = [&](std::string_view k, const std::string& v) {
    std::string data(k);
    data.push_back('\0');
    data += v;
    put_chunk(png, "tEXt", data);
  };
  text("prompt_id", req.prompt_id);
  text("seed", std::to_string(req.seed));
  text("prompt", req.prompt);
  put_chunk(png, "IDAT", packed);
  put_chunk(png, "IEND", {});
  return png;
}

}  // namespace

double hashed_normal(std::uint64_t seed, std::string_view key) {
  // 1 - u keeps the log argument in (0, 1]
  const double u1 = 1.0 - unit_interval(hash64({seed, std::string_view("z1"), key}));
  const double u2 = unit_interval(hash64({seed, std::string_view("z2"), key}));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SyntheticLossOracle::SyntheticLossOracle(SyntheticLossConfig config, std::span<const LossQuery> universe)
    : config_(config) {
  if (!(config_.noisy_fraction >= 0.0 && config_.noisy_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noisy_fraction must be in [0, 1]");
  }
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& q : universe) {
    if (original_.emplace(q.sample_id, std::make_pair(q.image_uri, q.caption_text)).second) {
      ranked.emplace_back(hash64({config_.rng_seed, std::string_view("noisy"), std::string_view(q.sample_id)}),
                          q.sample_id);
    }
  }
  std::sort(ranked.begin(), ranked.end());
  const auto count = static_cast<std::size_t>(
      std::llround(config_.noisy_fraction * static_cast<double>(ranked.size())));
  for (std::size_t i = 0; i < count && i < ranked.size(); ++i) noisy_.insert(ranked[i].second);
}

bool SyntheticLossOracle::is_noisy(const LossQuery& query) const {
  if (!noisy_.contains(query.sample_id)) return false;
  const auto& [uri, text] = original_.at(query.sample_id);
  return uri == query.image_uri && text == query.caption_text;
}

double SyntheticLossOracle::loss_of(int epoch, const LossQuery& query) const {
  const double z = hashed_normal(config_.rng_seed, query.sample_id);
  if (is_noisy(query)) return std::max(0.0, config_.noisy.mean + config_.noisy.stddev * z);
  const double base = std::max(0.0, config_.clean.mean + config_.clean.stddev * z);
  return base * std::pow(config_.decay, epoch);
}

std::vector<double> SyntheticLossOracle::loss_batch(int epoch, std::span<const LossQuery> samples) {
  if (samples.empty()) throw BackendError("empty_batch", "loss_batch needs at least one sample");
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& q : samples) out.push_back(loss_of(epoch, q));
  return out;
}

std::vector<GenerationOutcome> StubGenerator::generate(std::span<const GenerationRequest> requests) {
  if (requests.empty()) throw BackendError("empty_batch", "generate needs at least one request");
  std::vector<GenerationOutcome> out;
  for (const auto& req : requests) {
    try {
      write_file_atomic(req.out_uri, encode_stub_png(req));
      out.push_back(GenerationOutcome::success(req.out_uri));
    } catch (const Error& e) {
      out.push_back(GenerationOutcome::failure("io_error", e.detail()));
    }
  }
  return out;
}

std::vector<GenerationOutcome> IdentityGenerator::generate(std::span<const GenerationRequest> requests) {
  if (requests.empty()) throw BackendError("empty_batch", "generate needs at least one request");
  std::vector<GenerationOutcome> out;
  for (const auto& req : requests) {
    const auto it = uri_by_image_id_.find(req.image_id);
    if (it == uri_by_image_id_.end()) {
      out.push_back(GenerationOutcome::failure("unknown_image", "no uri for image '" + req.image_id + "'"));
    } else {
      out.push_back(GenerationOutcome::success(it->second));
    }
  }
  return out;
}

std::vector<GenerationOutcome> FailingGenerator::generate(std::span<const GenerationRequest> requests) {
  if (requests.empty()) throw BackendError("empty_batch", "generate needs at least one request");
  return std::vector<GenerationOutcome>(requests.size(), GenerationOutcome::failure("generation_failed", message_));
}

std::vector<std::string> ReferenceEchoCaptioner::caption_batch(std::span<const std::string> image_uris) {
  if (image_uris.empty()) throw BackendError("empty_batch", "caption_batch needs at least one image");
  std::vector<std::string> out;
  for (const auto& uri : image_uris) {
    if (const auto it = by_uri_.find(uri); it != by_uri_.end()) {
      out.push_back(it->second);
      continue;
    }
    const auto text = read_png_text(uri);
    const auto pid = text.find("prompt_id");
    if (pid != text.end()) {
      if (const auto it = by_prompt_id_.find(pid->second); it != by_prompt_id_.end()) {
        out.push_back(it->second);
        continue;
      }
    }
    throw BackendError("unknown_image", "no reference for '" + uri + "'");
  }
  return out;
}

std::vector<std::string> ConstantCaptioner::caption_batch(std::span<const std::string> image_uris) {
  if (image_uris.empty()) throw BackendError("empty_batch", "caption_batch needs at least one image");
  return std::vector<std::string>(image_uris.size(), text_);
}

std::vector<std::vector<double>> HashedBowEmbedder::embed_batch(std::span<const std::string> texts) {
  if (texts.empty()) throw BackendError("empty_batch", "embed_batch needs at least one text");
  std::vector<std::vector<double>> out;
  for (const auto& text : texts) {
    std::vector<double> v(dimension_, 0.0);
    for (const auto& tok : metrics::tokenize(text)) {
      v[hash64({std::string_view("bow"), std::string_view(tok)}) % dimension_] += 1.0;
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& x : v) x /= n;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<double> HashPairScorer::pair_score_batch(std::span<const PairQuery> pairs) {
  if (pairs.empty()) throw BackendError("empty_batch", "pair_score_batch needs at least one pair");
  std::vector<double> out;
  for (const auto& p : pairs) {
    out.push_back(unit_interval(hash64({std::string_view(p.image_uri), std::string_view(p.text)})));
  }
  return out;
}

std::map<std::string, std::string> read_png_text(const std::string& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kPngSignature.size() ||
      !std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin(),
                  [](unsigned char a, char b) { return a == static_cast<unsigned char>(b); })) {
    return out;
  }
  std::size_t pos = kPngSignature.size();
  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = get_u32(bytes, pos);
    if (pos + 12 + len > bytes.size()) break;
    const std::string_view type(bytes.data() + pos + 4, 4);
    const std::string_view data(bytes.data() + pos + 8, len);
    if (type == "tEXt") {
      const auto nul = data.find('\0');
      if (nul != std::string_view::npos) out[std::string(data.substr(0, nul))] = std::string(data.substr(nul + 1));
    }
    if (type == "IEND") break;
    pos += 12 + len;
  }
  return out;
}

}  // namespace curette
