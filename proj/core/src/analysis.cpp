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

#include "curette/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "curette/capmetrics.hpp"
#include "curette/dataset.hpp"
#include "curette/error.hpp"

namespace curette::analysis {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// RFC 4180-ish: quoted fields with "" escapes, no embedded newlines.
std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::kParseError, "annotations line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(trim(cur));
  return fields;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::string_view to_string(LossGroup g) { return g == LossGroup::kHigh ? "high" : "low"; }

LossGroup parse_loss_group(std::string_view s) {
  std::string lower(s);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "high") return LossGroup::kHigh;
  if (lower == "low") return LossGroup::kLow;
  throw Error(ErrorCode::kParseError, "loss_group must be high or low, got '" + std::string(s) + "'");
}

std::vector<std::string> default_taxonomy() {
  return {"color",       "count",          "deformation", "object",      "missing_object",
          "extra_object", "spatial_relation", "size",      "shape",       "texture",
          "text_rendering", "pose",        "action",      "attribute",   "background",
          "scene",       "lighting",       "style",       "blur",        "artifact",
          "watermark",   "duplication",    "occlusion",   "perspective", "other"};
}

std::vector<std::string> parse_taxonomy(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("taxonomy: ") + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::kSchemaError, "taxonomy must be a JSON array of strings");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& v : j) {
    if (!v.is_string()) throw Error(ErrorCode::kSchemaError, "taxonomy entries must be strings");
    if (!seen.insert(v.get<std::string>()).second) {
      throw Error(ErrorCode::kSchemaError, "duplicate taxonomy entry '" + v.get<std::string>() + "'");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<AnnotationRecord> parse_annotations_csv(std::string_view text) {
  std::vector<AnnotationRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  bool has_loss = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line, line_no);
    if (header) {
      if (f.size() < 4 || f[0] != "image_id" || f[1] != "annotator_id" || f[2] != "loss_group" || f[3] != "categories") {
        throw Error(ErrorCode::kParseError, "annotations header must be image_id,annotator_id,loss_group,categories[,loss]");
      }
      has_loss = f.size() >= 5 && f[4] == "loss";
      header = false;
      continue;
    }
    if (f.size() < 4) throw Error(ErrorCode::kParseError, "annotations line " + std::to_string(line_no) + ": too few fields");
    AnnotationRecord r;
    r.image_id = f[0];
    r.annotator_id = f[1];
    r.loss_group = parse_loss_group(f[2]);
    std::string_view cats = f[3];
    while (!cats.empty()) {
      const auto semi = cats.find(';');
      const std::string cat = trim(cats.substr(0, semi));
      if (!cat.empty()) r.categories.insert(cat);
      if (semi == std::string_view::npos) break;
      cats.remove_prefix(semi + 1);
    }
    if (has_loss && f.size() >= 5 && !f[4].empty()) {
      try {
        std::size_t used = 0;
        r.loss = std::stod(f[4], &used);
        if (used != f[4].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParseError, "annotations line " + std::to_string(line_no) + ": bad loss '" + f[4] + "'");
      }
    }
    out.push_back(std::move(r));
  }
  if (header) throw Error(ErrorCode::kParseError, "annotations CSV is empty");
  return out;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

AnnotationSummary aggregate_annotations(std::span<const AnnotationRecord> records,
                                        std::span<const std::string> taxonomy, std::size_t min_annotators) {
  const std::set<std::string> known(taxonomy.begin(), taxonomy.end());
  struct Acc {
    LossGroup group;
    std::optional<double> loss;
    std::set<std::string> annotators;
    std::vector<const AnnotationRecord*> records;
  };
  std::map<std::string, Acc> by_image;
  for (const auto& r : records) {
    for (const auto& c : r.categories) {
      if (!known.contains(c)) {
        throw Error(ErrorCode::kUnknownCategory,
                    "'" + c + "' (image '" + r.image_id + "', annotator '" + r.annotator_id + "')");
      }
    }
    auto [it, fresh] = by_image.try_emplace(r.image_id, Acc{r.loss_group, r.loss, {}, {}});
    Acc& acc = it->second;
    if (!fresh) {
      if (acc.group != r.loss_group) {
        throw Error(ErrorCode::kInvalidArgument, "image '" + r.image_id + "' has conflicting loss groups");
      }
      if (r.loss && acc.loss && *r.loss != *acc.loss) {
        throw Error(ErrorCode::kInvalidArgument, "image '" + r.image_id + "' has conflicting losses");
      }
      if (!acc.loss) acc.loss = r.loss;
    }
    if (!acc.annotators.insert(r.annotator_id).second) {
      throw Error(ErrorCode::kDuplicateAnnotator, "image '" + r.image_id + "', annotator '" + r.annotator_id + "'");
    }
    acc.records.push_back(&r);
  }

  AnnotationSummary s;
  for (const auto& c : taxonomy) s.category_counts[c] = 0;
  std::map<std::string, std::pair<double, std::size_t>> group_sums;
  std::vector<double> losses;
  std::vector<double> means;
  for (const auto& [image_id, acc] : by_image) {
    if (acc.annotators.size() < min_annotators) {
      s.excluded_images.push_back(image_id);
      continue;
    }
    ImageErrors e{image_id, acc.group, acc.annotators.size(), 0, 0.0, acc.loss};
    for (const auto* r : acc.records) {
      e.selections += r->categories.size();
      for (const auto& c : r->categories) ++s.category_counts[c];
    }
    e.mean_errors = static_cast<double>(e.selections) / static_cast<double>(e.annotators);
    auto& g = group_sums[std::string(to_string(acc.group))];
    g.first += e.mean_errors;
    ++g.second;
    if (e.loss) {
      losses.push_back(*e.loss);
      means.push_back(e.mean_errors);
    }
    s.images.push_back(std::move(e));
  }
  for (const auto& [g, sum] : group_sums) s.group_mean_errors[g] = sum.first / static_cast<double>(sum.second);
  s.spearman = spearman(losses, means);
  return s;
}

nlohmann::json to_json(const AnnotationSummary& s) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& e : s.images) {
    nlohmann::json j{{"image_id", e.image_id},
                     {"loss_group", to_string(e.loss_group)},
                     {"annotators", e.annotators},
                     {"selections", e.selections},
                     {"mean_errors", e.mean_errors}};
    j["loss"] = e.loss ? nlohmann::json(*e.loss) : nlohmann::json(nullptr);
    images.push_back(std::move(j));
  }
  nlohmann::json out{{"category_counts", s.category_counts},
                     {"images", images},
                     {"excluded_images", s.excluded_images},
                     {"group_mean_errors", s.group_mean_errors}};
  out["spearman"] = s.spearman ? nlohmann::json(*s.spearman) : nlohmann::json(nullptr);
  return out;
}

std::string category_csv(const AnnotationSummary& s) {
  std::string out = "category,count\n";
  for (const auto& [c, n] : s.category_counts) out += c + "," + std::to_string(n) + "\n";
  return out;
}

std::string image_errors_csv(const AnnotationSummary& s) {
  std::string out = "image_id,loss_group,annotators,mean_errors,loss\n";
  for (const auto& e : s.images) {
    out += e.image_id + "," + std::string(to_string(e.loss_group)) + "," + std::to_string(e.annotators) + "," +
           fmt_double(e.mean_errors) + "," + (e.loss ? fmt_double(*e.loss) : std::string()) + "\n";
  }
  return out;
}

std::string sweep_report(std::span<const std::filesystem::path> run_dirs) {
  struct Row {
    std::string run, policy, rule, mode;
    double value = 0.0;
    std::size_t final_samples = 0;
    std::map<std::string, double> metrics;
  };
  std::vector<Row> rows;
  std::set<std::string> metric_names;
  for (const auto& dir : run_dirs) {
    const auto report_path = dir / "report.json";
    const auto metrics_path = dir / "metrics.json";
    if (!std::filesystem::is_regular_file(report_path)) {
      throw Error(ErrorCode::kIncompleteRun, dir.string() + ": missing report.json");
    }
    if (!std::filesystem::is_regular_file(metrics_path)) {
      throw Error(ErrorCode::kIncompleteRun, dir.string() + ": missing metrics.json");
    }
    Row row;
    row.run = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    try {
      const auto report = nlohmann::json::parse(read_file(report_path));
      const auto& policy = report.at("config").at("policy");
      row.policy = policy.at("kind").get<std::string>();
      const auto& rule = policy.at("rule");
      row.rule = rule.at("kind").get<std::string>();
      row.value = rule.contains("ratio") ? rule.at("ratio").get<double>() : rule.at("k").get<double>();
      row.mode = report.at("config").at("mode").at("kind").get<std::string>();
      row.final_samples = report.at("final_samples").get<std::size_t>();
      row.metrics = metrics::report_from_json(nlohmann::json::parse(read_file(metrics_path))).corpus;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kIncompleteRun, dir.string() + ": " + e.what());
    }
    for (const auto& [m, _] : row.metrics) metric_names.insert(m);
    rows.push_back(std::move(row));
  }
  std::string out = "run,policy,rule,value,mode,final_samples";
  for (const auto& m : metric_names) out += "," + m;
  out += "\n";
  for (const auto& r : rows) {
    out += r.run + "," + r.policy + "," + r.rule + "," + fmt_double(r.value) + "," + r.mode + "," +
           std::to_string(r.final_samples);
    for (const auto& m : metric_names) {
      out += ",";
      if (const auto it = r.metrics.find(m); it != r.metrics.end()) out += fmt_double(it->second);
    }
    out += "\n";
  }
  return out;
}

}  // namespace curette::analysis
