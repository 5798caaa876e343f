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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "curette/dataset.hpp"

namespace curette {

struct LossRecord {
  std::string sample_id;
  int epoch = 0;
  double loss = 0.0;

  bool operator==(const LossRecord&) const = default;
};

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;

  bool operator==(const HistogramBin&) const = default;
};

inline constexpr std::size_t kHistogramBins = 50;

struct EpochStats {
  int epoch = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::size_t count = 0;
  double max = 0.0;
  std::vector<HistogramBin> histogram;  // kHistogramBins equal-width bins over [0, max]

  bool operator==(const EpochStats&) const = default;
};

class SelectionRule {
 public:
  enum class Kind { kTopFraction, kSigmaThreshold };

  /// ratio in [0, 1]; selects the ceil(ratio * N) highest losses.
  static SelectionRule top_fraction(double ratio);
  /// k > 0; selects every loss >= mean + k * std.
  static SelectionRule sigma_threshold(double k);

  Kind kind() const { return kind_; }
  double value() const { return value_; }
  std::string describe() const;

  bool operator==(const SelectionRule&) const = default;

 private:
  SelectionRule(Kind kind, double value) : kind_(kind), value_(value) {}
  Kind kind_;
  double value_;
};

nlohmann::json to_json(const SelectionRule& rule);
SelectionRule selection_rule_from_json(const nlohmann::json& j);

/// Relative slack applied to the inclusive sigma comparison so that a loss
/// sitting exactly on mean + k*std is selected despite rounding in the stats.
inline constexpr double kThresholdSlack = 1e-12;

/// Population mean/std of `values`, two-pass, in the given order.
std::pair<double, double> mean_and_std(std::span<const double> values);

/// Per-sample, per-epoch loss records. One writer; once an epoch is recorded
/// it never changes.
class LossLedger {
 public:
  /// Seals `epoch`. Epochs must be strictly increasing. When `expected` is
  /// given, the record set must cover exactly those samples.
  /// Throws DuplicateRecord, MissingSample, NonFiniteLoss, InvalidArgument.
  const EpochStats& record_epoch(std::vector<LossRecord> records, int epoch,
                                 std::optional<std::span<const Sample>> expected = std::nullopt);

  /// Ordered by descending loss, then ascending sample_id. Throws NoSuchEpoch.
  std::vector<std::string> select_difficult(int epoch, const SelectionRule& rule) const;

  const EpochStats& stats(int epoch) const;
  /// Records of an epoch sorted by sample_id. Throws NoSuchEpoch.
  const std::vector<LossRecord>& records(int epoch) const;
  bool has_epoch(int epoch) const { return epochs_.contains(epoch); }
  std::vector<int> epochs() const;
  std::optional<int> last_epoch() const;

  std::optional<double> loss_at(std::string_view sample_id, int epoch) const;
  /// Loss from the most recent epoch that recorded this sample.
  std::optional<double> latest_loss(std::string_view sample_id) const;

  /// Samples with loss >= mean + k * std in `epoch` (same comparison as the
  /// sigma rule).
  std::size_t count_above_sigma(int epoch, double k) const;

  /// CSV "epoch,bin_low,bin_high,count", one row per bin per epoch, in the
  /// order given. Throws NoSuchEpoch.
  std::string export_loss_distribution(std::span<const int> epochs) const;

  /// One JSON LossRecord per line for `epoch`.
  std::string to_ndjson(int epoch) const;

 private:
  struct EpochData {
    std::vector<LossRecord> records;  // sorted by sample_id
    std::map<std::string, double, std::less<>> by_sample;
    EpochStats stats;
  };
  const EpochData& epoch_data(int epoch) const;

  std::map<int, EpochData> epochs_;
};

/// Parses NDJSON LossRecords (blank lines ignored). Throws ParseError.
std::vector<LossRecord> parse_loss_ndjson(std::string_view text);

}  // namespace curette
