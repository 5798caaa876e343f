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

#include "curette/capmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "curette/error.hpp"

namespace curette::metrics {
namespace {

constexpr int kMaxN = 4;

using NgramCounts = std::map<std::string, int>;

NgramCounts ngrams(const Tokens& tokens, int n) {
  NgramCounts out;
  if (tokens.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++out[key];
  }
  return out;
}

struct ClippedCounts {
  std::array<long, kMaxN> matched{};
  std::array<long, kMaxN> total{};
};

ClippedCounts clipped_counts(const Tokens& candidate, std::span<const Tokens> references) {
  ClippedCounts out;
  for (int n = 1; n <= kMaxN; ++n) {
    const NgramCounts cand = ngrams(candidate, n);
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, count] : ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    for (const auto& [gram, count] : cand) {
      out.total[n - 1] += count;
      const auto it = max_ref.find(gram);
      if (it != max_ref.end()) out.matched[n - 1] += std::min(count, it->second);
    }
  }
  return out;
}

std::size_t closest_ref_length(std::size_t cand_len, std::span<const Tokens> references) {
  std::size_t best = references.front().size();
  for (const auto& ref : references) {
    const auto d = [&](std::size_t r) {
      return r > cand_len ? r - cand_len : cand_len - r;
    };
    if (d(ref.size()) < d(best) || (d(ref.size()) == d(best) && ref.size() < best)) {
      best = ref.size();
    }
  }
  return best;
}

double brevity_penalty(double cand_len, double ref_len) {
  if (cand_len <= 0.0) return 0.0;
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - ref_len / cand_len);
}

std::array<double, kMaxN> cumulative_bleu(const std::array<double, kMaxN>& precisions, double bp) {
  std::array<double, kMaxN> out{};
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < kMaxN; ++n) {
    if (precisions[n] <= 0.0) zero = true;
    if (!zero) log_sum += std::log(precisions[n]);
    out[n] = zero ? 0.0 : bp * std::exp(log_sum / (n + 1));
  }
  return out;
}

void require_refs(std::span<const Tokens> references) {
  if (references.empty()) throw Error(ErrorCode::kNoReferences, "candidate has no references");
}

double rouge_f(std::size_t lcs, std::size_t cand_len, std::size_t ref_len) {
  if (lcs == 0 || cand_len == 0 || ref_len == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(cand_len);
  const double r = static_cast<double>(lcs) / static_cast<double>(ref_len);
  const double b2 = kRougeBeta * kRougeBeta;
  return ((1.0 + b2) * p * r) / (r + b2 * p);
}

double meteor_single(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<bool> used(ref.size(), false);
  // alignment[i] = reference position matched by candidate token i, or -1
  std::vector<long> alignment(cand.size(), -1);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && ref[j] == cand[i]) {
        used[j] = true;
        alignment[i] = static_cast<long>(j);
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;
  std::size_t chunks = 0;
  long prev_cand = -2;
  long prev_ref = -2;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (alignment[i] < 0) continue;
    const long ci = static_cast<long>(i);
    if (ci != prev_cand + 1 || alignment[i] != prev_ref + 1) ++chunks;
    prev_cand = ci;
    prev_ref = alignment[i];
  }
  const double m = static_cast<double>(matches);
  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double f_mean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return f_mean * (1.0 - penalty);
}

using TfIdf = std::map<std::string, double>;

double norm(const TfIdf& v) {
  double s = 0.0;
  for (const auto& [_, x] : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  for (char raw : text) {
    char c = raw;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
    if (keep) {
      current.push_back(c);
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::array<double, 4> bleu_sentence(const Tokens& candidate, std::span<const Tokens> references) {
  require_refs(references);
  if (candidate.empty()) return {};
  const ClippedCounts counts = clipped_counts(candidate, references);
  std::array<double, kMaxN> precisions{};
  precisions[0] = counts.total[0] == 0
                      ? 0.0
                      : static_cast<double>(counts.matched[0]) / static_cast<double>(counts.total[0]);
  for (int n = 1; n < kMaxN; ++n) {
    precisions[n] = static_cast<double>(counts.matched[n] + 1) / static_cast<double>(counts.total[n] + 1);
  }
  const double bp = brevity_penalty(static_cast<double>(candidate.size()),
                                    static_cast<double>(closest_ref_length(candidate.size(), references)));
  return cumulative_bleu(precisions, bp);
}

double bleu(const Tokens& candidate, std::span<const Tokens> references, int max_n) {
  if (max_n < 1 || max_n > kMaxN) throw Error(ErrorCode::kInvalidArgument, "max_n must be in 1..4");
  return bleu_sentence(candidate, references)[max_n - 1];
}

std::array<double, 4> bleu_corpus(std::span<const Tokens> candidates,
                                  std::span<const std::vector<Tokens>> references) {
  if (candidates.size() != references.size()) {
    throw Error(ErrorCode::kKeyMismatch, "candidate and reference counts differ");
  }
  std::array<long, kMaxN> matched{}, total{};
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    require_refs(references[i]);
    const ClippedCounts c = clipped_counts(candidates[i], references[i]);
    for (int n = 0; n < kMaxN; ++n) {
      matched[n] += c.matched[n];
      total[n] += c.total[n];
    }
    cand_len += static_cast<double>(candidates[i].size());
    ref_len += static_cast<double>(closest_ref_length(candidates[i].size(), references[i]));
  }
  std::array<double, kMaxN> precisions{};
  for (int n = 0; n < kMaxN; ++n) {
    precisions[n] = total[n] == 0 ? 0.0 : static_cast<double>(matched[n]) / static_cast<double>(total[n]);
  }
  return cumulative_bleu(precisions, brevity_penalty(cand_len, ref_len));
}

double rouge_l(const Tokens& candidate, std::span<const Tokens> references) {
  require_refs(references);
  double best = 0.0;
  for (const auto& ref : references) {
    best = std::max(best, rouge_f(lcs_length(candidate, ref), candidate.size(), ref.size()));
  }
  return best;
}

double meteor_lite(const Tokens& candidate, std::span<const Tokens> references) {
  require_refs(references);
  double best = 0.0;
  for (const auto& ref : references) best = std::max(best, meteor_single(candidate, ref));
  return best;
}

std::vector<double> cider(std::span<const Tokens> candidates,
                          std::span<const std::vector<Tokens>> references) {
  if (candidates.size() != references.size()) {
    throw Error(ErrorCode::kKeyMismatch, "candidate and reference counts differ");
  }
  for (const auto& refs : references) require_refs(refs);
  const std::size_t images = candidates.size();
  std::vector<double> scores(images, 0.0);
  if (images == 0) return scores;
  const double log_images = std::log(static_cast<double>(images));

  for (int n = 1; n <= kMaxN; ++n) {
    // document frequency: number of images whose reference set contains the n-gram
    std::map<std::string, int> df;
    std::vector<std::vector<NgramCounts>> ref_counts(images);
    for (std::size_t i = 0; i < images; ++i) {
      std::set<std::string> seen;
      for (const auto& ref : references[i]) {
        ref_counts[i].push_back(ngrams(ref, n));
        for (const auto& [gram, _] : ref_counts[i].back()) seen.insert(gram);
      }
      for (const auto& gram : seen) ++df[gram];
    }
    const auto idf = [&](const std::string& gram) {
      const auto it = df.find(gram);
      const int d = it == df.end() ? 1 : std::max(1, it->second);
      return log_images - std::log(static_cast<double>(d));
    };
    for (std::size_t i = 0; i < images; ++i) {
      TfIdf cand_vec;
      for (const auto& [gram, count] : ngrams(candidates[i], n)) cand_vec[gram] = count * idf(gram);
      TfIdf mean_ref;
      const double k = static_cast<double>(references[i].size());
      for (const auto& counts : ref_counts[i]) {
        for (const auto& [gram, count] : counts) mean_ref[gram] += count * idf(gram) / k;
      }
      const double nc = norm(cand_vec);
      const double nr = norm(mean_ref);
      if (nc == 0.0 || nr == 0.0) continue;
      double dot = 0.0;
      for (const auto& [gram, w] : cand_vec) {
        const auto it = mean_ref.find(gram);
        if (it != mean_ref.end()) dot += w * it->second;
      }
      scores[i] += dot / (nc * nr);
    }
  }
  for (auto& s : scores) s = 10.0 * s / kMaxN;
  return scores;
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kBleu1: return "bleu1";
    case Metric::kBleu2: return "bleu2";
    case Metric::kBleu3: return "bleu3";
    case Metric::kBleu4: return "bleu4";
    case Metric::kRougeL: return "rougeL";
    case Metric::kCider: return "cider";
    case Metric::kMeteorLite: return "meteor_lite";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : all_metrics()) {
    if (metric_name(m) == name) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
}

std::set<Metric> all_metrics() {
  return {Metric::kBleu1, Metric::kBleu2, Metric::kBleu3, Metric::kBleu4,
          Metric::kRougeL, Metric::kCider, Metric::kMeteorLite};
}

MetricReport score_corpus(const CaptionSet& candidates, const CaptionSet& references,
                          const std::set<Metric>& metrics) {
  MetricReport report;
  if (metrics.empty()) return report;
  for (const auto& [image_id, _] : candidates) {
    if (!references.contains(image_id)) {
      throw Error(ErrorCode::kKeyMismatch, "candidate image '" + image_id + "' has no reference entry");
    }
  }
  for (const auto& [image_id, _] : references) {
    if (!candidates.contains(image_id)) {
      throw Error(ErrorCode::kKeyMismatch, "reference image '" + image_id + "' has no candidate entry");
    }
  }

  std::vector<std::string> ids;
  std::vector<Tokens> cands;
  std::vector<std::vector<Tokens>> refs;
  for (const auto& [image_id, texts] : candidates) {
    if (texts.size() != 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "image '" + image_id + "' must have exactly one candidate caption");
    }
    const auto& ref_texts = references.at(image_id);
    if (ref_texts.empty()) throw Error(ErrorCode::kNoReferences, "image '" + image_id + "'");
    ids.push_back(image_id);
    cands.push_back(tokenize(texts.front()));
    auto& r = refs.emplace_back();
    for (const auto& t : ref_texts) r.push_back(tokenize(t));
  }

  const bool any_bleu = metrics.contains(Metric::kBleu1) || metrics.contains(Metric::kBleu2) ||
                        metrics.contains(Metric::kBleu3) || metrics.contains(Metric::kBleu4);
  const auto mean = [](const std::map<std::string, double>& m) {
    double s = 0.0;
    for (const auto& [_, v] : m) s += v;
    return m.empty() ? 0.0 : s / static_cast<double>(m.size());
  };

  if (any_bleu) {
    const auto corpus = bleu_corpus(cands, refs);
    std::vector<std::array<double, 4>> sentence;
    for (std::size_t i = 0; i < ids.size(); ++i) sentence.push_back(bleu_sentence(cands[i], refs[i]));
    const Metric bleu_metrics[] = {Metric::kBleu1, Metric::kBleu2, Metric::kBleu3, Metric::kBleu4};
    for (int n = 0; n < 4; ++n) {
      if (!metrics.contains(bleu_metrics[n])) continue;
      const std::string name(metric_name(bleu_metrics[n]));
      report.corpus[name] = corpus[n];
      auto& per = report.per_sample[name];
      for (std::size_t i = 0; i < ids.size(); ++i) per[ids[i]] = sentence[i][n];
    }
  }
  if (metrics.contains(Metric::kRougeL)) {
    auto& per = report.per_sample["rougeL"];
    for (std::size_t i = 0; i < ids.size(); ++i) per[ids[i]] = rouge_l(cands[i], refs[i]);
    report.corpus["rougeL"] = mean(per);
  }
  if (metrics.contains(Metric::kMeteorLite)) {
    auto& per = report.per_sample["meteor_lite"];
    for (std::size_t i = 0; i < ids.size(); ++i) per[ids[i]] = meteor_lite(cands[i], refs[i]);
    report.corpus["meteor_lite"] = mean(per);
  }
  if (metrics.contains(Metric::kCider)) {
    const auto scores = cider(cands, refs);
    auto& per = report.per_sample["cider"];
    for (std::size_t i = 0; i < ids.size(); ++i) per[ids[i]] = scores[i];
    report.corpus["cider"] = mean(per);
  }
  return report;
}

nlohmann::json to_json(const MetricReport& report) {
  return nlohmann::json{{"corpus", report.corpus}, {"per_sample", report.per_sample}};
}

MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.corpus = j.at("corpus").get<std::map<std::string, double>>();
  r.per_sample = j.at("per_sample").get<std::map<std::string, std::map<std::string, double>>>();
  return r;
}

std::string to_csv(const MetricReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,image_id,score\n";
  for (const auto& [name, value] : report.corpus) out << name << ",*," << value << "\n";
  for (const auto& [name, per] : report.per_sample) {
    for (const auto& [id, value] : per) out << name << "," << id << "," << value << "\n";
  }
  return out.str();
}

}  // namespace curette::metrics
