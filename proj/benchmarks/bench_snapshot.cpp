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

#include <filesystem>
#include <unistd.h>

#include "corpus.hpp"
#include "curette/curation.hpp"

using namespace curette;

namespace {

std::filesystem::path scratch() {
  return std::filesystem::temp_directory_path() / ("curette-bench-" + std::to_string(::getpid()));
}

// Save + load of a Flickr-sized (155k sample) snapshot.
void BM_SnapshotRoundTrip(benchmark::State& state) {
  const DatasetSnapshot snap{1, bench::flickr_like(static_cast<std::size_t>(state.range(0))), {}};
  const auto dir = scratch();
  std::filesystem::create_directories(dir);
  const auto path = dir / "snapshot.json";
  for (auto _ : state) {
    save_snapshot(snap, path);
    benchmark::DoNotOptimize(load_snapshot(path));
  }
  state.counters["samples"] = static_cast<double>(snap.dataset.sample_count());
  state.counters["bytes"] = static_cast<double>(std::filesystem::file_size(path));
  std::filesystem::remove_all(dir);
}

void BM_SnapshotLoad(benchmark::State& state) {
  const DatasetSnapshot snap{1, bench::flickr_like(static_cast<std::size_t>(state.range(0))), {}};
  const auto dir = scratch();
  std::filesystem::create_directories(dir);
  const auto path = dir / "snapshot.json";
  save_snapshot(snap, path);
  for (auto _ : state) benchmark::DoNotOptimize(load_snapshot(path));
  std::filesystem::remove_all(dir);
}

}  // namespace

BENCHMARK(BM_SnapshotRoundTrip)->Arg(31000)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK(BM_SnapshotLoad)->Arg(31000)->Unit(benchmark::kMillisecond)->Iterations(3);
