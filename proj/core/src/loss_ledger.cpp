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

#include "curette/loss_ledger.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "curette/error.hpp"

namespace curette {
namespace {

std::vector<HistogramBin> build_histogram(std::span<const LossRecord> records, double max) {
  std::vector<HistogramBin> bins(kHistogramBins);
  const double width = max / static_cast<double>(kHistogramBins);
  for (std::size_t i = 0; i < kHistogramBins; ++i) {
    bins[i].low = width * static_cast<double>(i);
    bins[i].high = i + 1 == kHistogramBins ? max : width * static_cast<double>(i + 1);
  }
  for (const auto& r : records) {
    std::size_t idx = 0;
    if (width > 0.0) {
      idx = std::min(kHistogramBins - 1, static_cast<std::size_t>(std::floor(r.loss / width)));
    }
    ++bins[idx].count;
  }
  return bins;
}

bool at_or_above(double loss, double threshold) {
  return loss >= threshold - kThresholdSlack * std::max(1.0, std::abs(threshold));
}

}  // namespace

SelectionRule SelectionRule::top_fraction(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "top-fraction ratio must be in [0, 1]");
  }
  return {Kind::kTopFraction, ratio};
}

SelectionRule SelectionRule::sigma_threshold(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw Error(ErrorCode::kInvalidArgument, "sigma k must be > 0");
  return {Kind::kSigmaThreshold, k};
}

std::string SelectionRule::describe() const {
  std::ostringstream out;
  if (kind_ == Kind::kTopFraction) {
    out << "top_fraction:" << value_;
  } else {
    out << "sigma:" << value_;
  }
  return out.str();
}

nlohmann::json to_json(const SelectionRule& rule) {
  if (rule.kind() == SelectionRule::Kind::kTopFraction) {
    return {{"kind", "top_fraction"}, {"ratio", rule.value()}};
  }
  return {{"kind", "sigma"}, {"k", rule.value()}};
}

SelectionRule selection_rule_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "top_fraction") return SelectionRule::top_fraction(j.at("ratio").get<double>());
  if (kind == "sigma") return SelectionRule::sigma_threshold(j.at("k").get<double>());
  throw Error(ErrorCode::kInvalidArgument, "unknown selection rule '" + kind + "'");
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  // a constant series has exactly zero spread; rounding in sum/n must not say otherwise
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    return {values.front(), 0.0};
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

const EpochStats& LossLedger::record_epoch(std::vector<LossRecord> records, int epoch,
                                           std::optional<std::span<const Sample>> expected) {
  if (epochs_.contains(epoch)) {
    throw Error(ErrorCode::kDuplicateRecord, "epoch " + std::to_string(epoch) + " already recorded");
  }
  if (!epochs_.empty() && epoch < epochs_.rbegin()->first) {
    throw Error(ErrorCode::kInvalidArgument, "epoch " + std::to_string(epoch) + " is not increasing");
  }

  EpochData data;
  for (const auto& r : records) {
    if (r.epoch != epoch) {
      throw Error(ErrorCode::kInvalidArgument,
                  "record for '" + r.sample_id + "' has epoch " + std::to_string(r.epoch));
    }
    if (!std::isfinite(r.loss) || r.loss < 0.0) {
      throw Error(ErrorCode::kNonFiniteLoss, "sample '" + r.sample_id + "' loss is not finite and >= 0");
    }
    if (!data.by_sample.emplace(r.sample_id, r.loss).second) {
      throw Error(ErrorCode::kDuplicateRecord,
                  "sample '" + r.sample_id + "' recorded twice in epoch " + std::to_string(epoch));
    }
  }
  if (expected) {
    std::set<std::string_view> want;
    for (const auto& s : *expected) want.insert(s.sample_id);
    for (const auto& id : want) {
      if (!data.by_sample.contains(id)) {
        throw Error(ErrorCode::kMissingSample, "no loss for sample '" + std::string(id) + "'");
      }
    }
    for (const auto& [id, _] : data.by_sample) {
      if (!want.contains(id)) {
        throw Error(ErrorCode::kMissingSample, "loss for sample '" + id + "' not in snapshot");
      }
    }
  }

  std::sort(records.begin(), records.end(),
            [](const LossRecord& a, const LossRecord& b) { return a.sample_id < b.sample_id; });
  std::vector<double> losses;
  losses.reserve(records.size());
  double max = 0.0;
  for (const auto& r : records) {
    losses.push_back(r.loss);
    max = std::max(max, r.loss);
  }
  const auto [mean, sd] = mean_and_std(losses);
  data.stats = EpochStats{epoch, mean, sd, records.size(), max, build_histogram(records, max)};
  data.records = std::move(records);
  return epochs_.emplace(epoch, std::move(data)).first->second.stats;
}

const LossLedger::EpochData& LossLedger::epoch_data(int epoch) const {
  const auto it = epochs_.find(epoch);
  if (it == epochs_.end()) throw Error(ErrorCode::kNoSuchEpoch, "epoch " + std::to_string(epoch));
  return it->second;
}

std::vector<std::string> LossLedger::select_difficult(int epoch, const SelectionRule& rule) const {
  const EpochData& data = epoch_data(epoch);
  std::vector<const LossRecord*> ranked;
  ranked.reserve(data.records.size());
  for (const auto& r : data.records) ranked.push_back(&r);
  std::sort(ranked.begin(), ranked.end(), [](const LossRecord* a, const LossRecord* b) {
    return a->loss != b->loss ? a->loss > b->loss : a->sample_id < b->sample_id;
  });

  std::size_t take = 0;
  if (rule.kind() == SelectionRule::Kind::kTopFraction) {
    const double n = static_cast<double>(ranked.size());
    // guard against ratio * N landing a hair above an integer
    take = static_cast<std::size_t>(std::ceil(rule.value() * n - 1e-9));
    take = std::min(take, ranked.size());
  } else {
    const double threshold = data.stats.mean + rule.value() * data.stats.stddev;
    while (take < ranked.size() && at_or_above(ranked[take]->loss, threshold)) ++take;
  }
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(ranked[i]->sample_id);
  return out;
}

const EpochStats& LossLedger::stats(int epoch) const { return epoch_data(epoch).stats; }

const std::vector<LossRecord>& LossLedger::records(int epoch) const { return epoch_data(epoch).records; }

std::vector<int> LossLedger::epochs() const {
  std::vector<int> out;
  for (const auto& [e, _] : epochs_) out.push_back(e);
  return out;
}

std::optional<int> LossLedger::last_epoch() const {
  if (epochs_.empty()) return std::nullopt;
  return epochs_.rbegin()->first;
}

std::optional<double> LossLedger::loss_at(std::string_view sample_id, int epoch) const {
  const auto it = epochs_.find(epoch);
  if (it == epochs_.end()) return std::nullopt;
  const auto rec = it->second.by_sample.find(sample_id);
  if (rec == it->second.by_sample.end()) return std::nullopt;
  return rec->second;
}

std::optional<double> LossLedger::latest_loss(std::string_view sample_id) const {
  for (auto it = epochs_.rbegin(); it != epochs_.rend(); ++it) {
    const auto rec = it->second.by_sample.find(sample_id);
    if (rec != it->second.by_sample.end()) return rec->second;
  }
  return std::nullopt;
}

std::size_t LossLedger::count_above_sigma(int epoch, double k) const {
  const EpochData& data = epoch_data(epoch);
  const double threshold = data.stats.mean + k * data.stats.stddev;
  return static_cast<std::size_t>(std::count_if(data.records.begin(), data.records.end(),
                                                [&](const LossRecord& r) { return at_or_above(r.loss, threshold); }));
}

std::string LossLedger::export_loss_distribution(std::span<const int> epochs) const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,bin_low,bin_high,count\n";
  for (int e : epochs) {
    for (const auto& bin : stats(e).histogram) {
      out << e << "," << bin.low << "," << bin.high << "," << bin.count << "\n";
    }
  }
  return out.str();
}

std::string LossLedger::to_ndjson(int epoch) const {
  std::string out;
  for (const auto& r : records(epoch)) {
    out += nlohmann::json{{"sample_id", r.sample_id}, {"epoch", r.epoch}, {"loss", r.loss}}.dump();
    out += "\n";
  }
  return out;
}

std::vector<LossRecord> parse_loss_ndjson(std::string_view text) {
  std::vector<LossRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("sample_id").get<std::string>(), j.at("epoch").get<int>(), j.at("loss").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, "loss ledger line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace curette
