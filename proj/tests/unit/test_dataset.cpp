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

#include <fstream>
#include <random>

#include "curette/dataset.hpp"
#include "../support/fixtures.hpp"
#include "test_support.hpp"

using namespace curette;
using testing_support::code_of;
using testing_support::message_of;

namespace {

const char* kTwoByFive = R"({"split":"train","images":[
  {"image_id":"a","uri":"/a.jpg","provenance":{"kind":"original"},"captions":[
    {"caption_id":"a1","text":"a dog"},{"caption_id":"a2","text":"a brown dog"},{"caption_id":"a3","text":"dog"},
    {"caption_id":"a4","text":"the dog runs"},{"caption_id":"a5","text":"dog on grass"}]},
  {"image_id":"b","uri":"/b.jpg","captions":[
    {"caption_id":"b1","text":"a cat"},{"caption_id":"b2","text":"cat"},{"caption_id":"b3","text":"cat sleeping"},
    {"caption_id":"b4","text":"a grey cat"},{"caption_id":"b5","text":"cat on sofa"}]}]})";

}  // namespace

TEST_CASE("parse corpus: 2 images x 5 captions gives 10 samples") {
  const auto d = parse_dataset(kTwoByFive);
  CHECK(d.sample_count() == 10);
  CHECK(d.image_count() == 2);
  CHECK(d.samples().front().sample_id == "a1");
  CHECK(d.find_caption("a4")->token_count == 3);
  CHECK(d.split() == Split::kTrain);
  CHECK(parse_dataset(kTwoByFive, Split::kTest).split() == Split::kTest);
}

TEST_CASE("parse errors name the offending record") {
  CHECK(code_of([] { parse_dataset("{not json"); }) == ErrorCode::kParseError);
  CHECK(code_of([] { parse_dataset(R"({"images":[]})"); }) == ErrorCode::kSchemaError);

  const auto dangling = R"({"split":"train","images":[{"image_id":"a","uri":"/a","captions":[{"caption_id":"a1","text":"x"}]}],
    "samples":[{"sample_id":"s1","image_id":"zz","caption_id":"a1"}]})";
  CHECK(code_of([&] { parse_dataset(dangling); }) == ErrorCode::kSchemaError);
  CHECK(message_of([&] { parse_dataset(dangling); }).find("a1") != std::string::npos);

  const auto dup = R"({"split":"train","images":[{"image_id":"a","uri":"/a","captions":[
    {"caption_id":"c","text":"x"},{"caption_id":"c","text":"y"}]}]})";
  CHECK(message_of([&] { parse_dataset(dup); }).find("duplicate caption_id 'c'") != std::string::npos);

  const auto missing_text = R"({"split":"train","images":[{"image_id":"a","uri":"/a","captions":[{"caption_id":"c9"}]}]})";
  CHECK(message_of([&] { parse_dataset(missing_text); }).find("c9") != std::string::npos);

  Dataset::Parts parts;
  parts.images["a"] = ImageAsset{"a", "/a", {}};
  parts.captions_by_image["ghost"] = {Caption::make("g1", "text")};
  parts.derive_samples = true;
  const auto msg = message_of([&] { Dataset::from_parts(parts); });
  CHECK(msg.find("SchemaError") == 0);
  CHECK(msg.find("g1") != std::string::npos);

  CHECK(code_of([] { load_dataset("/nonexistent/corpus.json"); }) == ErrorCode::kIoError);
}

TEST_CASE("json round trip for random corpora") {
  std::mt19937_64 rng(3);
  fixtures::TempDir dir("dataset");
  for (int i = 0; i < 30; ++i) {
    const auto d = fixtures::random_corpus(rng, {});
    CHECK(dataset_from_json(to_json(d)) == d);
    save_dataset(d, dir / "c.json");
    CHECK(load_dataset(dir / "c.json") == d);
  }
}

TEST_CASE("synthesized provenance survives a round trip") {
  Dataset::Parts parts;
  parts.images["s"] = ImageAsset{"s", "/gen/s.png", Provenance::synthesized("abcd", 99)};
  parts.captions_by_image["s"] = {Caption::make("c", "a red bus")};
  parts.derive_samples = true;
  const auto d = Dataset::from_parts(parts);
  const auto back = dataset_from_json(to_json(d));
  CHECK(back.find_image("s")->provenance == Provenance::synthesized("abcd", 99));
}

TEST_CASE("caption_length_stats") {
  Dataset::Parts parts;
  parts.images["a"] = ImageAsset{"a", "/a", {}};
  parts.captions_by_image["a"] = {Caption::make("c1", "a b"), Caption::make("c2", "a b c")};
  parts.derive_samples = true;
  const auto stats = caption_length_stats(Dataset::from_parts(parts));
  CHECK(stats.mean == doctest::Approx(2.5));
  CHECK(stats.max == 3);
  CHECK(stats.histogram.at(2) == 1);
  CHECK(stats.histogram.at(3) == 1);

  CHECK(code_of([] { caption_length_stats(Dataset{}); }) == ErrorCode::kEmptyDataset);
}

TEST_CASE("caption_length_stats flags a very long caption") {
  Dataset::Parts parts;
  parts.derive_samples = true;
  std::string eleven;
  for (int t = 0; t < 11; ++t) eleven += "w" + std::to_string(t) + " ";
  std::string long_text;
  for (int t = 0; t < 35; ++t) long_text += "x" + std::to_string(t) + " ";
  for (int i = 0; i < 20; ++i) {
    const std::string id = "i" + std::to_string(i);
    parts.images[id] = ImageAsset{id, "/" + id, {}};
    parts.captions_by_image[id] = {Caption::make(id + "c", i == 7 ? long_text : eleven)};
  }
  const auto stats = caption_length_stats(Dataset::from_parts(parts));
  CHECK(stats.max == 35);
  CHECK(stats.histogram.rbegin()->first == 35);
  CHECK(stats.mean == doctest::Approx(12.2));
  REQUIRE(stats.above_mean.size() == 1);
  CHECK(stats.above_mean[0] == std::pair<std::string, std::size_t>{"i7c", 35});
}

TEST_CASE("Flickr-size corpus loads 155k samples") {
  fixtures::TempDir dir("flickr");
  const auto path = dir / "flickr.json";
  {
    std::ofstream out(path);
    out << R"({"split":"train","images":[)";
    for (int i = 0; i < 31000; ++i) {
      out << (i ? "," : "") << R"({"image_id":"f)" << i << R"(","uri":"/flickr/)" << i << R"(.jpg","captions":[)";
      for (int j = 0; j < 5; ++j) {
        out << (j ? "," : "") << R"({"caption_id":"f)" << i << '_' << j << R"(","text":"a person doing thing )" << j
            << R"("})";
      }
      out << "]}";
    }
    out << "]}";
  }
  // independent count straight from the file text
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t raw = 0;
  for (auto pos = text.find("\"caption_id\""); pos != std::string::npos; pos = text.find("\"caption_id\"", pos + 1)) ++raw;
  CHECK(raw == 155000);
  const auto d = load_dataset(path);
  CHECK(d.sample_count() == raw);
  CHECK(d.image_count() == 31000);
}

TEST_CASE("write_file_atomic replaces contents") {
  fixtures::TempDir dir("atomic");
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  CHECK(read_file(dir / "f.txt") == "two");
  CHECK(code_of([] { read_file("/nonexistent/x"); }) == ErrorCode::kIoError);
}
