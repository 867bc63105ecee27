// Copyright 2026 The EdgeQuant Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "edgequant/eval.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "edgequant/container.hpp"
#include "edgequant/errors.hpp"
#include "nlohmann/json.hpp"

namespace eq {

using nlohmann::json;

int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

Metrics metrics_from_cm(const ConfusionMatrix& cm) {
  const int k = cm.num_classes;
  const int64_t total = cm.total();
  if (k < 1 || total == 0) throw InvalidArgument("metrics: empty confusion matrix");

  Metrics m;
  int64_t trace = 0;
  for (int c = 0; c < k; ++c) {
    int64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    trace += tp;
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f1 = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    m.precision.push_back(p);
    m.recall.push_back(r);
    m.f1.push_back(f1);
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  m.macro_precision = std::accumulate(m.precision.begin(), m.precision.end(), 0.0) / k;
  m.macro_recall = std::accumulate(m.recall.begin(), m.recall.end(), 0.0) / k;
  m.macro_f1 = std::accumulate(m.f1.begin(), m.f1.end(), 0.0) / k;
  return m;
}

std::string content_hash_hex(const std::vector<std::byte>& bytes) {
  uint64_t h = 14695981039346656037ull;
  for (const std::byte b : bytes) {
    h ^= static_cast<uint64_t>(b);
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

EvalReport evaluate(const Graph& g, const LabeledDataset& ds, ExecMode mode,
                    const EvalOptions& opts) {
  if (ds.samples.empty()) throw InvalidArgument("evaluate: dataset is empty");
  if (opts.batch_size < 1) throw InvalidArgument("evaluate: batch_size must be positive");
  const int k = g.meta.num_classes;
  for (const Sample& s : ds.samples)
    if (s.label < 0 || s.label >= k)
      throw InvalidArgument("evaluate: label " + std::to_string(s.label) +
                            " out of range for a " + std::to_string(k) + "-class model");

  ConfusionMatrix cm(k);
  RunOptions ropts;
  ropts.threads = opts.threads;
  double run_seconds = 0.0;
  std::vector<int64_t> idx;
  for (std::size_t pos = 0; pos < ds.samples.size();) {
    const std::size_t end =
        std::min(ds.samples.size(), pos + static_cast<std::size_t>(opts.batch_size));
    idx.clear();
    for (std::size_t i = pos; i < end; ++i) idx.push_back(static_cast<int64_t>(i));
    const Tensor batch = batch_of(ds, idx);
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor probs = run(g, batch, mode, ropts);
    run_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const int64_t rows = probs.dim(0);
    const int64_t width = probs.numel() / rows;
    const float* pp = probs.f32().data();
    for (int64_t r = 0; r < rows; ++r) {
      const float* row = pp + r * width;
      int64_t pred = 0;
      for (int64_t j = 1; j < width; ++j)
        if (row[j] > row[pred]) pred = j;
      cm.at(ds.samples[pos + static_cast<std::size_t>(r)].label, static_cast<int>(pred)) += 1;
    }
    pos = end;
  }

  EvalReport rep;
  rep.model_id = !opts.model_id.empty() ? opts.model_id : g.meta.family;
  rep.mode = exec_mode_name(mode);
  const std::vector<std::byte> blob = serialize_model(g);
  rep.size_bytes = blob.size();
  rep.content_hash = content_hash_hex(blob);
  rep.num_samples = static_cast<int64_t>(ds.samples.size());
  rep.latency_ms_per_sample = 1000.0 * run_seconds / static_cast<double>(ds.samples.size());
  if (static_cast<int>(ds.class_names.size()) == k) {
    rep.class_names = ds.class_names;
  } else if (static_cast<int>(g.meta.class_names.size()) == k) {
    rep.class_names = g.meta.class_names;
  } else {
    for (int c = 0; c < k; ++c) rep.class_names.push_back("class_" + std::to_string(c));
  }
  rep.metrics = metrics_from_cm(cm);
  return rep;
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["format"] = "eqreport";
  j["version"] = 1;
  j["model_id"] = r.model_id;
  j["mode"] = r.mode;
  j["size_bytes"] = r.size_bytes;
  j["content_hash"] = r.content_hash;
  j["num_samples"] = r.num_samples;
  j["latency_ms_per_sample"] = r.latency_ms_per_sample;
  j["class_names"] = r.class_names;
  j["accuracy"] = r.metrics.accuracy;
  j["macro_precision"] = r.metrics.macro_precision;
  j["macro_recall"] = r.metrics.macro_recall;
  j["macro_f1"] = r.metrics.macro_f1;
  json per = json::array();
  for (std::size_t c = 0; c < r.metrics.f1.size(); ++c) {
    per.push_back({{"precision", r.metrics.precision[c]},
                   {"recall", r.metrics.recall[c]},
                   {"f1", r.metrics.f1[c]}});
  }
  j["per_class"] = per;
  if (!r.config_json.empty()) j["config"] = json::parse(r.config_json);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "eqreport")
      throw ParseError("report: missing eqreport format marker");
    EvalReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.size_bytes = j.at("size_bytes").get<uint64_t>();
    r.content_hash = j.value("content_hash", "");
    r.num_samples = j.value("num_samples", int64_t{0});
    r.latency_ms_per_sample = j.value("latency_ms_per_sample", 0.0);
    r.class_names = j.value("class_names", std::vector<std::string>{});
    r.metrics.accuracy = j.at("accuracy").get<double>();
    r.metrics.macro_precision = j.value("macro_precision", 0.0);
    r.metrics.macro_recall = j.value("macro_recall", 0.0);
    r.metrics.macro_f1 = j.at("macro_f1").get<double>();
    for (const json& row : j.value("per_class", json::array())) {
      r.metrics.precision.push_back(row.value("precision", 0.0));
      r.metrics.recall.push_back(row.value("recall", 0.0));
      r.metrics.f1.push_back(row.value("f1", 0.0));
    }
    if (j.contains("config")) r.config_json = j.at("config").dump();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

void save_report(const EvalReport& r, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << report_to_json(r);
  if (!f) throw DataError("short write to '" + path + "'");
}

EvalReport load_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open report '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return report_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError("report '" + path + "': " + e.what());
  }
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

ComparisonTable compare(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InvalidArgument("compare: no reports");

  // Group baselines: the f32 row per model id, else the group's largest.
  std::map<std::string, uint64_t> baseline;
  for (const EvalReport& r : reports) {
    auto it = baseline.find(r.model_id);
    if (it == baseline.end()) {
      baseline.emplace(r.model_id, r.size_bytes);
    } else if (it->second < r.size_bytes) {
      it->second = r.size_bytes;
    }
  }
  for (const EvalReport& r : reports)
    if (r.mode == "f32") baseline[r.model_id] = r.size_bytes;

  const std::vector<std::string> header = {"model",  "mode",      "size_bytes", "ratio",
                                           "acc",    "precision", "recall",     "f1"};
  std::vector<std::vector<std::string>> rows;
  for (const EvalReport& r : reports) {
    const auto base = static_cast<double>(baseline.at(r.model_id));
    const double ratio = base > 0.0 ? static_cast<double>(r.size_bytes) / base : 0.0;
    rows.push_back({r.model_id, r.mode, std::to_string(r.size_bytes), fixed(ratio, 4),
                    fixed(r.metrics.accuracy, 4), fixed(r.metrics.macro_precision, 4),
                    fixed(r.metrics.macro_recall, 4), fixed(r.metrics.macro_f1, 4)});
  }
  // Keep rows of one model adjacent without reordering groups.
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a[0] < b[0]; });

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

  ComparisonTable out;
  std::ostringstream text, csv;
  const auto emit_text_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      text << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      text << (c + 1 < row.size() ? "  " : "");
    }
    text << "\n";
  };
  const auto emit_csv_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) csv << row[c] << (c + 1 < row.size() ? "," : "");
    csv << "\n";
  };
  emit_text_row(header);
  emit_csv_row(header);
  for (const auto& row : rows) {
    emit_text_row(row);
    emit_csv_row(row);
  }
  out.text = text.str();
  out.csv = csv.str();
  return out;
}

const EvalReport& select_model(const std::vector<EvalReport>& reports,
                               const SelectionPolicy& policy) {
  if (reports.empty()) throw InvalidArgument("select: no reports");

  if (const auto* size = std::get_if<SizePriority>(&policy)) {
    const EvalReport* best = nullptr;
    for (const EvalReport& r : reports) {
      if (r.metrics.macro_f1 < size->f1_floor) continue;
      if (!best || r.size_bytes < best->size_bytes ||
          (r.size_bytes == best->size_bytes && r.metrics.macro_f1 > best->metrics.macro_f1))
        best = &r;
    }
    if (!best) {
      const EvalReport* near = &reports.front();
      for (const EvalReport& r : reports)
        if (r.metrics.macro_f1 > near->metrics.macro_f1) near = &r;
      std::ostringstream os;
      os << "select: no model reaches the F1 floor " << fixed(size->f1_floor, 4) << "; best is "
         << near->label() << " with F1 " << fixed(near->metrics.macro_f1, 4);
      throw InvalidState(os.str());
    }
    return *best;
  }

  const EvalReport* best = &reports.front();
  for (const EvalReport& r : reports) {
    if (r.metrics.macro_f1 > best->metrics.macro_f1 ||
        (r.metrics.macro_f1 == best->metrics.macro_f1 && r.size_bytes < best->size_bytes))
      best = &r;
  }
  return *best;
}

}  // namespace eq
