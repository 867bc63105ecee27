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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgequant/builders.hpp"
#include "edgequant/container.hpp"
#include "edgequant/dataset.hpp"
#include "edgequant/engine.hpp"
#include "edgequant/errors.hpp"
#include "edgequant/eval.hpp"
#include "edgequant/graph.hpp"
#include "edgequant/quantize.hpp"
#include "edgequant/threading.hpp"
#include "edgequant/train.hpp"
#include "nlohmann/json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOpts {
  int threads = 0;
  uint64_t seed = 0;
};

void apply_globals(const GlobalOpts& g) {
  if (g.threads > 0) eq::set_default_threads(g.threads);
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw eq::InvalidArgument("--synth: bad value '" + value + "' for key '" + key + "'");
  }
}

// "classes=4,per_class=500,size=32,noise=0.1,seed=7"
eq::SynthSpec parse_synth_spec(const std::string& spec, uint64_t default_seed) {
  eq::SynthSpec s;
  s.seed = default_seed;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const std::size_t eq_pos = item.find('=');
    if (eq_pos == std::string::npos)
      throw eq::InvalidArgument("--synth: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq_pos);
    const std::string value = item.substr(eq_pos + 1);
    if (key == "classes") {
      s.num_classes = static_cast<int>(parse_number(key, value));
    } else if (key == "per_class") {
      s.per_class = static_cast<int>(parse_number(key, value));
    } else if (key == "size") {
      s.h = s.w = static_cast<int>(parse_number(key, value));
    } else if (key == "noise") {
      s.noise = static_cast<float>(parse_number(key, value));
    } else if (key == "seed") {
      s.seed = static_cast<uint64_t>(parse_number(key, value));
    } else {
      throw eq::InvalidArgument("--synth: unknown key '" + key + "'");
    }
  }
  return s;
}

eq::SplitSpec parse_split_spec(const std::string& ratios, uint64_t seed) {
  eq::SplitSpec spec;
  spec.seed = seed;
  if (ratios.empty()) return spec;
  std::istringstream in(ratios);
  std::string item;
  std::vector<double> parts;
  while (std::getline(in, item, ',')) parts.push_back(parse_number("--split", item));
  if (parts.size() != 3)
    throw eq::InvalidArgument("--split: expected three comma-separated ratios");
  spec.train = parts[0];
  spec.val = parts[1];
  spec.test = parts[2];
  return spec;
}

struct DataArgs {
  std::string data_dir;
  std::string synth;
};

eq::LabeledDataset load_dataset(const DataArgs& d, const eq::Graph& g, uint64_t seed) {
  if (!d.data_dir.empty() && !d.synth.empty())
    throw eq::InvalidArgument("pass either --data or --synth, not both");
  if (!d.data_dir.empty())
    return eq::load_image_dir(d.data_dir,
                              {static_cast<int>(g.input.h), static_cast<int>(g.input.w)});
  if (!d.synth.empty()) return eq::synth_generate(parse_synth_spec(d.synth, seed));
  throw eq::InvalidArgument("one of --data or --synth is required");
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw eq::DataError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw eq::DataError("short write to '" + path + "'");
}

std::vector<std::string> class_names_of(const eq::Graph& g) {
  std::vector<std::string> names = g.meta.class_names;
  if (static_cast<int>(names.size()) != g.meta.num_classes) {
    names.clear();
    for (int c = 0; c < g.meta.num_classes; ++c) names.push_back("class_" + std::to_string(c));
  }
  return names;
}

// ---------------------------------------------------------------------------
// Subcommand actions
// ---------------------------------------------------------------------------

struct BuildArgs {
  std::string family;
  int classes = 0;
  int input_size = 0;
  int tiny_width = 8;
  int tiny_depth = 3;
  std::string out;
};

void cmd_build(const BuildArgs& a, const GlobalOpts& g) {
  apply_globals(g);
  const eq::Family family = eq::family_from_string(a.family);
  std::pair<int, int> size = eq::default_input_size(family);
  if (a.input_size > 0) size = {a.input_size, a.input_size};
  eq::TinyCnnConfig tiny;
  tiny.width = a.tiny_width;
  tiny.depth = a.tiny_depth;
  const eq::Graph graph = eq::build_architecture(family, a.classes, size, g.seed, tiny);
  std::cout << "params: " << eq::param_count(graph) << "\n";
  if (!a.out.empty()) {
    eq::save_model(graph, a.out);
    std::cout << "wrote " << a.out << " (" << fs::file_size(a.out) << " bytes)\n";
  }
}

struct TrainArgs {
  std::string model;
  DataArgs data;
  std::string split;
  std::string out;
  std::string report;
  bool replace_head = false;
  eq::TrainConfig cfg;
};

void cmd_train(const TrainArgs& a, const GlobalOpts& g) {
  apply_globals(g);
  eq::Graph graph = eq::load_model(a.model);
  eq::LabeledDataset ds = load_dataset(a.data, graph, g.seed);
  if (ds.num_classes() != graph.meta.num_classes) {
    if (!a.replace_head)
      throw eq::InvalidState("model '" + a.model + "' expects " +
                             std::to_string(graph.meta.num_classes) +
                             " classes but the dataset has " + std::to_string(ds.num_classes()) +
                             "; pass --replace-head to re-initialize the final layer");
    graph = eq::replace_head(graph, ds.num_classes(), g.seed);
  }
  const auto parts = eq::split(ds, parse_split_spec(a.split, g.seed));

  eq::TrainConfig cfg = a.cfg;
  cfg.seed = g.seed;
  auto [trained, report] = eq::train(graph, parts[0], parts[1], cfg, g.threads);
  trained.meta.class_names = ds.class_names;
  eq::save_model(trained, a.out);
  report.checkpoint_path = a.out;

  std::cout << "epoch  lr        train_loss  train_acc  val_acc\n";
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const eq::EpochRow& row = report.epochs[e];
    std::cout << std::left << std::setw(7) << e << std::setw(10) << fixed(row.lr, 6)
              << std::setw(12) << fixed(row.train_loss, 4) << std::setw(11)
              << fixed(row.train_acc, 4) << fixed(row.val_acc, 4) << "\n";
  }
  std::cout << "best epoch: " << report.best_epoch << " (val_acc "
            << fixed(report.best_val_acc, 4) << ")\n"
            << "checkpoint: " << a.out << "\n";

  if (!a.report.empty()) {
    json rows = json::array();
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
      rows.push_back({{"epoch", e},
                      {"lr", report.epochs[e].lr},
                      {"train_loss", report.epochs[e].train_loss},
                      {"train_acc", report.epochs[e].train_acc},
                      {"val_acc", report.epochs[e].val_acc}});
    }
    const json doc = {{"format", "eqtrain"},
                      {"version", 1},
                      {"epochs", rows},
                      {"best_epoch", report.best_epoch},
                      {"best_val_acc", report.best_val_acc},
                      {"checkpoint", a.out},
                      {"split_sizes",
                       {{"train", parts[0].samples.size()},
                        {"val", parts[1].samples.size()},
                        {"test", parts[2].samples.size()}}},
                      {"config",
                       {{"model", a.model},
                        {"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"lr0", cfg.lr0},
                        {"momentum", cfg.momentum},
                        {"lr_step_epochs", cfg.lr_step_epochs},
                        {"lr_gamma", cfg.lr_gamma},
                        {"weight_decay", cfg.weight_decay},
                        {"seed", cfg.seed},
                        {"threads", g.threads}}}};
    write_text_file(a.report, doc.dump(2) + "\n");
  }
}

struct CalibrateArgs {
  std::string model;
  DataArgs data;
  int batches = 100;
  int batch_size = 32;
  std::string out;
};

void cmd_calibrate(const CalibrateArgs& a, const GlobalOpts& g) {
  apply_globals(g);
  const eq::Graph graph = eq::load_model(a.model);
  const eq::LabeledDataset ds = load_dataset(a.data, graph, g.seed);
  std::vector<int64_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(g.seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const uint64_t j = gen() % i;
    std::swap(order[i - 1], order[j]);
  }
  std::vector<eq::Tensor> batches;
  for (std::size_t pos = 0;
       pos < order.size() && batches.size() < static_cast<std::size_t>(a.batches);) {
    const std::size_t end =
        std::min(order.size(), pos + static_cast<std::size_t>(a.batch_size));
    batches.push_back(eq::batch_of(
        ds, std::vector<int64_t>(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                 order.begin() + static_cast<std::ptrdiff_t>(end))));
    pos = end;
  }
  const eq::CalibrationStats stats = eq::calibrate(graph, batches, a.batches, g.threads);
  stats.save(a.out);
  std::cout << "calibrated " << stats.all().size() << " tensors from " << batches.size()
            << " batches\nwrote " << a.out << "\n";
}

struct QuantizeArgs {
  std::string model;
  std::string mode;
  std::string stats;
  bool per_tensor_weights = false;
  std::string out;
};

void cmd_quantize(const QuantizeArgs& a, const GlobalOpts&) {
  const eq::Graph graph = eq::load_model(a.model);
  eq::Graph q;
  if (a.mode == "fp16") {
    q = eq::quantize_fp16(graph);
  } else if (a.mode == "dynamic") {
    q = eq::quantize_dynamic(graph, a.per_tensor_weights);
  } else if (a.mode == "full") {
    if (a.stats.empty()) throw eq::CalibrationError("calibration stats required: pass --stats");
    q = eq::quantize_full(graph, eq::CalibrationStats::load(a.stats), a.per_tensor_weights);
  } else {
    throw eq::InvalidArgument("--mode must be fp16, dynamic, or full");
  }
  eq::save_model(q, a.out);
  const auto before = static_cast<double>(fs::file_size(a.model));
  const auto after = static_cast<double>(fs::file_size(a.out));
  std::cout << "wrote " << a.out << " (" << static_cast<uint64_t>(after) << " bytes, "
            << fixed(after / before, 4) << " of " << a.model << ")\n";
}

struct EvalArgs {
  std::string model;
  DataArgs data;
  std::string split;
  std::string use_split = "none";
  std::string mode = "auto";
  int batch_size = 32;
  std::string model_id;
  std::string report;
};

void cmd_eval(const EvalArgs& a, const GlobalOpts& g) {
  apply_globals(g);
  const eq::Graph graph = eq::load_model(a.model);
  eq::LabeledDataset ds = load_dataset(a.data, graph, g.seed);
  if (a.use_split != "none") {
    const auto parts = eq::split(ds, parse_split_spec(a.split, g.seed));
    if (a.use_split == "train") {
      ds = parts[0];
    } else if (a.use_split == "val") {
      ds = parts[1];
    } else if (a.use_split == "test") {
      ds = parts[2];
    } else {
      throw eq::InvalidArgument("--use-split must be none, train, val, or test");
    }
  }
  const eq::ExecMode mode = a.mode == "auto" ? eq::exec_mode_for_tag(graph.meta.quant)
                                             : eq::exec_mode_from_name(a.mode);
  eq::EvalOptions opts;
  opts.batch_size = a.batch_size;
  opts.threads = g.threads;
  opts.model_id = a.model_id;
  eq::EvalReport rep = eq::evaluate(graph, ds, mode, opts);
  const json cfg = {{"model", a.model},       {"mode", eq::exec_mode_name(mode)},
                    {"batch_size", a.batch_size}, {"seed", g.seed},
                    {"threads", g.threads},   {"use_split", a.use_split}};
  rep.config_json = cfg.dump();

  std::cout << "model: " << rep.label() << "\n"
            << "samples: " << rep.num_samples << "\n"
            << "size_bytes: " << rep.size_bytes << "\n"
            << "accuracy: " << fixed(rep.metrics.accuracy, 4) << "\n"
            << "macro_precision: " << fixed(rep.metrics.macro_precision, 4) << "\n"
            << "macro_recall: " << fixed(rep.metrics.macro_recall, 4) << "\n"
            << "macro_f1: " << fixed(rep.metrics.macro_f1, 4) << "\n"
            << "latency_ms_per_sample: " << fixed(rep.latency_ms_per_sample, 3) << "\n";
  if (!a.report.empty()) {
    eq::save_report(rep, a.report);
    std::cout << "wrote " << a.report << "\n";
  }
}

struct CompareArgs {
  std::vector<std::string> reports;
  std::string out;
};

void cmd_compare(const CompareArgs& a, const GlobalOpts&) {
  std::vector<eq::EvalReport> reports;
  for (const std::string& path : a.reports) reports.push_back(eq::load_report(path));
  const eq::ComparisonTable table = eq::compare(reports);
  std::cout << table.text;
  if (!a.out.empty()) {
    write_text_file(a.out, table.csv);
    std::cout << "wrote " << a.out << "\n";
  }
}

struct SelectArgs {
  std::string policy;
  std::vector<std::string> reports;
};

void cmd_select(const SelectArgs& a, const GlobalOpts&) {
  eq::SelectionPolicy policy;
  if (a.policy == "accuracy") {
    policy = eq::AccuracyPriority{};
  } else if (a.policy.rfind("size:", 0) == 0) {
    policy = eq::SizePriority{parse_number("--policy", a.policy.substr(5))};
  } else {
    throw eq::InvalidArgument("--policy must be size:<f1_floor> or accuracy");
  }
  std::vector<eq::EvalReport> reports;
  for (const std::string& path : a.reports) reports.push_back(eq::load_report(path));
  std::cout << eq::select_model(reports, policy).label() << "\n";
}

struct PredictArgs {
  std::string model;
  std::string image;
};

void cmd_predict(const PredictArgs& a, const GlobalOpts& g) {
  apply_globals(g);
  const eq::Graph graph = eq::load_model(a.model);
  eq::Tensor img = eq::load_image(a.image);
  img = eq::resize_bilinear(img, graph.input.h, graph.input.w);
  eq::Tensor batch = eq::Tensor::zeros({1, graph.input.h, graph.input.w, graph.input.c},
                                       eq::DType::F32);
  std::copy(img.f32().begin(), img.f32().end(), batch.f32().begin());

  eq::RunOptions opts;
  opts.threads = g.threads;
  const eq::Tensor probs = eq::run_auto(graph, batch, opts);
  const int64_t k = probs.numel();
  const float* pp = probs.f32().data();
  int64_t pred = 0;
  for (int64_t j = 1; j < k; ++j)
    if (pp[j] > pp[pred]) pred = j;

  const std::vector<std::string> names = class_names_of(graph);
  std::cout << "prediction: " << names.at(static_cast<std::size_t>(pred)) << " (p="
            << fixed(pp[pred], 4) << ")\n";
  for (int64_t j = 0; j < k; ++j)
    std::cout << "  " << names.at(static_cast<std::size_t>(j)) << " " << fixed(pp[j], 4) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EdgeQuant: train, quantize, and evaluate compact CNN classifiers"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file with long-option defaults (ini/toml)");
  app.set_version_flag("--version", "eqc 1.0.0");

  GlobalOpts global;
  app.add_option("--threads", global.threads, "worker threads (0 = all cores)")
      ->capture_default_str();
  app.add_option("--seed", global.seed, "seed for all randomized behavior")
      ->capture_default_str();

  // model build
  auto* model_cmd = app.add_subcommand("model", "model container operations");
  model_cmd->require_subcommand(1);
  auto* build = model_cmd->add_subcommand("build", "construct an architecture and report params");
  BuildArgs build_args;
  build->add_option("--family", build_args.family,
                    "vgg16|googlenet|resnet18|mobilenet_v2|efficientnet_b0|tiny_cnn")
      ->required();
  build->add_option("--classes", build_args.classes, "number of output classes")->required();
  build->add_option("--input-size", build_args.input_size,
                    "square input resolution (default: per family)");
  build->add_option("--tiny-width", build_args.tiny_width, "tiny_cnn: first block channels")
      ->capture_default_str();
  build->add_option("--tiny-depth", build_args.tiny_depth, "tiny_cnn: number of conv blocks")
      ->capture_default_str();
  build->add_option("--out", build_args.out, "output container path (.eqm)");
  build->callback([&] { cmd_build(build_args, global); });

  // train
  auto* train = app.add_subcommand("train", "train a model with SGD + step-decay");
  TrainArgs train_args;
  train->add_option("--model", train_args.model, "input container")->required();
  train->add_option("--data", train_args.data.data_dir, "dataset directory (class subdirs)");
  train->add_option("--synth", train_args.data.synth,
                    "synthetic dataset spec: classes=4,per_class=500,size=32,noise=0.1[,seed=7]");
  train->add_option("--split", train_args.split, "train,val,test ratios (default 0.70,0.15,0.15)");
  train->add_option("--epochs", train_args.cfg.epochs, "training epochs")->capture_default_str();
  train->add_option("--batch-size", train_args.cfg.batch_size, "minibatch size")
      ->capture_default_str();
  train->add_option("--lr0", train_args.cfg.lr0, "initial learning rate")->capture_default_str();
  train->add_option("--momentum", train_args.cfg.momentum, "SGD momentum")->capture_default_str();
  train->add_option("--lr-step-epochs", train_args.cfg.lr_step_epochs,
                    "epochs between learning-rate decays")
      ->capture_default_str();
  train->add_option("--lr-gamma", train_args.cfg.lr_gamma, "learning-rate decay factor")
      ->capture_default_str();
  train->add_option("--weight-decay", train_args.cfg.weight_decay, "L2 penalty")
      ->capture_default_str();
  train->add_flag("--replace-head", train_args.replace_head,
                  "re-initialize the final layer to match the dataset's class count");
  train->add_option("--report", train_args.report, "write the epoch table as JSON");
  train->add_option("--out", train_args.out, "output checkpoint container")->required();
  train->callback([&] { cmd_train(train_args, global); });

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "record activation ranges for full-int PTQ");
  CalibrateArgs cal_args;
  calibrate->add_option("--model", cal_args.model, "input container")->required();
  calibrate->add_option("--data", cal_args.data.data_dir, "dataset directory");
  calibrate->add_option("--synth", cal_args.data.synth, "synthetic dataset spec");
  calibrate->add_option("--batches", cal_args.batches, "calibration batch budget")
      ->capture_default_str();
  calibrate->add_option("--batch-size", cal_args.batch_size, "calibration batch size")
      ->capture_default_str();
  calibrate->add_option("--out", cal_args.out, "output stats file")->required();
  calibrate->callback([&] { cmd_calibrate(cal_args, global); });

  // quantize
  auto* quantize = app.add_subcommand("quantize", "convert a trained model to fp16/int8");
  QuantizeArgs quant_args;
  quantize->add_option("--model", quant_args.model, "input container")->required();
  quantize->add_option("--mode", quant_args.mode, "fp16|dynamic|full")->required();
  quantize->add_option("--stats", quant_args.stats, "calibration stats (required for full)");
  quantize->add_flag("--per-tensor-weights", quant_args.per_tensor_weights,
                     "per-tensor instead of per-channel weight scales");
  quantize->add_option("--out", quant_args.out, "output container")->required();
  quantize->callback([&] { cmd_quantize(quant_args, global); });

  // eval
  auto* eval = app.add_subcommand("eval", "measure classification metrics");
  EvalArgs eval_args;
  eval->add_option("--model", eval_args.model, "input container")->required();
  eval->add_option("--data", eval_args.data.data_dir, "dataset directory");
  eval->add_option("--synth", eval_args.data.synth, "synthetic dataset spec");
  eval->add_option("--split", eval_args.split, "train,val,test ratios for --use-split");
  eval->add_option("--use-split", eval_args.use_split, "none|train|val|test")
      ->capture_default_str();
  eval->add_option("--mode", eval_args.mode, "auto|f32|fp16|dynamic|full")
      ->capture_default_str();
  eval->add_option("--batch-size", eval_args.batch_size, "evaluation batch size")
      ->capture_default_str();
  eval->add_option("--model-id", eval_args.model_id, "report id (default: model family)");
  eval->add_option("--report", eval_args.report, "write an eqreport JSON file");
  eval->callback([&] { cmd_eval(eval_args, global); });

  // compare
  auto* compare = app.add_subcommand("compare", "tabulate eqreport files side by side");
  CompareArgs compare_args;
  compare->add_option("reports", compare_args.reports, "eqreport JSON files")
      ->required()
      ->expected(-1);
  compare->add_option("--out", compare_args.out, "also write the table as CSV");
  compare->callback([&] { cmd_compare(compare_args, global); });

  // select
  auto* select = app.add_subcommand("select", "pick a model by size or accuracy policy");
  SelectArgs select_args;
  select->add_option("--policy", select_args.policy, "size:<f1_floor> or accuracy")->required();
  select->add_option("reports", select_args.reports, "eqreport JSON files")
      ->required()
      ->expected(-1);
  select->callback([&] { cmd_select(select_args, global); });

  // predict
  auto* predict = app.add_subcommand("predict", "classify one image");
  PredictArgs predict_args;
  predict->add_option("--model", predict_args.model, "input container")->required();
  predict->add_option("--image", predict_args.image, "PPM (P6) or PGM (P5) image")->required();
  predict->callback([&] { cmd_predict(predict_args, global); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const eq::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const eq::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const eq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
