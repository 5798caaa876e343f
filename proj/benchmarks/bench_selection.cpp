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

#include <benchmark/benchmark.h>

#include "corpus.hpp"
#include "curette/curation.hpp"
#include "curette/loss_ledger.hpp"

using namespace curette;

namespace {

const Dataset& corpus_155k() {
  static const Dataset d = bench::flickr_like(31000);
  return d;
}

std::vector<LossRecord> random_losses(const Dataset& d, int epoch) {
  std::mt19937_64 rng(9);
  std::gamma_distribution<double> loss(2.0, 0.5);
  std::vector<LossRecord> out;
  out.reserve(d.sample_count());
  for (const auto& s : d.samples()) out.push_back({s.sample_id, epoch, loss(rng)});
  return out;
}

void BM_RecordEpoch(benchmark::State& state) {
  const auto& d = corpus_155k();
  const auto records = random_losses(d, 1);
  for (auto _ : state) {
    LossLedger ledger;
    benchmark::DoNotOptimize(ledger.record_epoch(records, 1, std::span<const Sample>(d.samples())));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.size()));
}

void BM_SelectDifficult(benchmark::State& state, SelectionRule rule) {
  const auto& d = corpus_155k();
  LossLedger ledger;
  ledger.record_epoch(random_losses(d, 1), 1);
  for (auto _ : state) benchmark::DoNotOptimize(ledger.select_difficult(1, rule));
}

void BM_ApplyRemove(benchmark::State& state) {
  const auto& d = corpus_155k();
  LossLedger ledger;
  ledger.record_epoch(random_losses(d, 1), 1);
  const auto sel = ledger.select_difficult(1, SelectionRule::top_fraction(0.01));
  const DatasetSnapshot snap{0, d, {}};
  for (auto _ : state) benchmark::DoNotOptimize(apply_remove(snap, sel));
}

void BM_ApplyReplaceCap(benchmark::State& state) {
  const auto& d = corpus_155k();
  LossLedger ledger;
  ledger.record_epoch(random_losses(d, 1), 1);
  const auto sel = ledger.select_difficult(1, SelectionRule::top_fraction(0.01));
  const DatasetSnapshot snap{0, d, {}};
  for (auto _ : state) benchmark::DoNotOptimize(apply_replace_cap(snap, sel, ledger));
}

}  // namespace

BENCHMARK(BM_RecordEpoch)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SelectDifficult, top1pct, SelectionRule::top_fraction(0.01))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SelectDifficult, sigma2, SelectionRule::sigma_threshold(2.0))->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ApplyRemove)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ApplyReplaceCap)->Unit(benchmark::kMillisecond);
