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

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace curette {

// Role interfaces for the external model processes. Every call is a batch;
// results come back in input order. Op-level failures throw BackendError
// (with a wire code such as "empty_batch"); a dead or unreachable backend
// throws Error(kBackendUnavailable).

struct LossQuery {
  std::string sample_id;
  std::string image_uri;
  std::string caption_text;
};

class LossOracle {
 public:
  virtual ~LossOracle() = default;
  /// One finite, non-negative loss per query.
  virtual std::vector<double> loss_batch(int epoch, std::span<const LossQuery> samples) = 0;
};

struct GenerationRequest {
  std::string prompt;
  std::string prompt_id;
  std::uint64_t seed = 0;
  std::string out_uri;
  /// Image the prompt was built from; lets lookup-style generators answer.
  std::string image_id;
};

struct GenerationOutcome {
  bool ok = false;
  std::string image_uri;
  std::string error_code;
  std::string message;

  static GenerationOutcome success(std::string uri) { return {true, std::move(uri), {}, {}}; }
  static GenerationOutcome failure(std::string code, std::string message) {
    return {false, {}, std::move(code), std::move(message)};
  }
};

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  /// Per-item failures are reported in the outcome, not thrown.
  virtual std::vector<GenerationOutcome> generate(std::span<const GenerationRequest> requests) = 0;
};

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual std::vector<std::string> caption_batch(std::span<const std::string> image_uris) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) = 0;
};

struct PairQuery {
  std::string image_uri;
  std::string text;
};

class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual std::vector<double> pair_score_batch(std::span<const PairQuery> pairs) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic synthetic backends.

struct Gaussian {
  double mean = 0.0;
  double stddev = 1.0;
};

struct SyntheticLossConfig {
  std::uint64_t rng_seed = 0;
  double noisy_fraction = 0.05;
  Gaussian clean{1.0, 0.2};
  Gaussian noisy{4.0, 0.5};
  /// Clean losses are multiplied by decay^epoch.
  double decay = 0.9;
};

/// Loss oracle modelling a corpus with a small population of mismatched
/// pairs.
///
/// The noisy set is fixed at construction: the round(noisy_fraction * N)
/// samples of the universe with the smallest hash64(seed, "noisy", sample_id).
/// A noisy sample keeps drawing from the noisy distribution only while it is
/// queried with its original (image_uri, caption_text); once a policy
/// repairs the pair it behaves like a clean sample. Each sample has one fixed
/// standard-normal draw z = f(seed, sample_id), so
///   clean loss = max(0, clean.mean + clean.stddev * z) * decay^epoch
///   noisy loss = max(0, noisy.mean + noisy.stddev * z)
/// Order of queries never affects results.
class SyntheticLossOracle : public LossOracle {
 public:
  SyntheticLossOracle(SyntheticLossConfig config, std::span<const LossQuery> universe);

  std::vector<double> loss_batch(int epoch, std::span<const LossQuery> samples) override;

  const std::set<std::string>& noisy_samples() const { return noisy_; }
  bool is_noisy(const LossQuery& query) const;
  double loss_of(int epoch, const LossQuery& query) const;

 private:
  SyntheticLossConfig config_;
  std::set<std::string> noisy_;
  std::map<std::string, std::pair<std::string, std::string>> original_;  // sample -> (uri, text)
};

/// Standard-normal draw derived from hash64(seed, "z", key) (Box-Muller).
double hashed_normal(std::uint64_t seed, std::string_view key);

/// Writes a small PNG whose pixel colours encode hash64(prompt_id, seed) and
/// whose tEXt chunks carry "prompt_id", "seed" and "prompt". Byte-identical
/// for identical requests.
class StubGenerator : public ImageGenerator {
 public:
  std::vector<GenerationOutcome> generate(std::span<const GenerationRequest> requests) override;
};

/// Returns the uri registered for the request's image_id (the round-trip
/// upper bound). Unknown ids fail with "unknown_image".
class IdentityGenerator : public ImageGenerator {
 public:
  explicit IdentityGenerator(std::map<std::string, std::string> uri_by_image_id)
      : uri_by_image_id_(std::move(uri_by_image_id)) {}
  std::vector<GenerationOutcome> generate(std::span<const GenerationRequest> requests) override;

 private:
  std::map<std::string, std::string> uri_by_image_id_;
};

/// Fails every request with the given message.
class FailingGenerator : public ImageGenerator {
 public:
  explicit FailingGenerator(std::string message = "synthetic failure") : message_(std::move(message)) {}
  std::vector<GenerationOutcome> generate(std::span<const GenerationRequest> requests) override;

 private:
  std::string message_;
};

/// Answers with a stored reference: first by image uri, then by the
/// prompt_id embedded in a StubGenerator PNG. Unknown images raise
/// BackendError("unknown_image").
class ReferenceEchoCaptioner : public Captioner {
 public:
  ReferenceEchoCaptioner(std::map<std::string, std::string> by_uri,
                         std::map<std::string, std::string> by_prompt_id)
      : by_uri_(std::move(by_uri)), by_prompt_id_(std::move(by_prompt_id)) {}
  std::vector<std::string> caption_batch(std::span<const std::string> image_uris) override;

 private:
  std::map<std::string, std::string> by_uri_;
  std::map<std::string, std::string> by_prompt_id_;
};

class ConstantCaptioner : public Captioner {
 public:
  explicit ConstantCaptioner(std::string text) : text_(std::move(text)) {}
  std::vector<std::string> caption_batch(std::span<const std::string> image_uris) override;

 private:
  std::string text_;
};

/// L2-normalized hashed bag-of-words over the canonical tokens. Texts with
/// no tokens embed to the zero vector.
class HashedBowEmbedder : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 256;

  explicit HashedBowEmbedder(std::size_t dimension = kDefaultDimension) : dimension_(dimension) {}
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;

 private:
  std::size_t dimension_;
};

/// Scores a pair by its hash; a stand-in for CLIP-style scorers.
class HashPairScorer : public PairScorer {
 public:
  std::vector<double> pair_score_batch(std::span<const PairQuery> pairs) override;
};

/// Text chunks ("tEXt") of a PNG file; empty when unreadable.
std::map<std::string, std::string> read_png_text(const std::string& path);

}  // namespace curette
