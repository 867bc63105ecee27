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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "edgequant/builders.hpp"
#include "edgequant/container.hpp"
#include "edgequant/quantize.hpp"
#include "edgequant/train.hpp"
#include "micronets.hpp"
#include "oracle.hpp"

using namespace eq;

namespace {

// |a - fd| within 1e-3, measured relative to the gradient magnitude with an
// absolute floor of 1 (loss-scale units).
bool grad_close(double analytic, double fd) {
  return std::abs(analytic - fd) <= 1e-3 * std::max({1.0, std::abs(analytic), std::abs(fd)});
}

LabeledDataset tiny_synth(int classes, int per_class, float noise, uint64_t seed) {
  SynthSpec spec;
  spec.num_classes = classes;
  spec.per_class = per_class;
  spec.h = spec.w = 8;
  spec.noise = noise;
  spec.seed = seed;
  return synth_generate(spec);
}

}  // namespace

TEST_CASE("lr schedule steps by gamma every lr_step_epochs") {
  TrainConfig cfg;  // lr0=0.01, step=7, gamma=0.1
  CHECK(lr_at(0, cfg) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(lr_at(6, cfg) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(lr_at(7, cfg) == doctest::Approx(0.001).epsilon(1e-6));
  CHECK(lr_at(13, cfg) == doctest::Approx(0.001).epsilon(1e-6));
  CHECK(lr_at(14, cfg) == doctest::Approx(0.0001).epsilon(1e-6));
  CHECK(lr_at(20, cfg) == doctest::Approx(0.0001).epsilon(1e-6));
  CHECK_THROWS_AS(lr_at(-1, cfg), InvalidArgument);
  cfg.lr_step_epochs = 0;
  CHECK_THROWS_AS(lr_at(0, cfg), InvalidArgument);
}

TEST_CASE("cross entropy") {
  SUBCASE("uniform logits give log K") {
    const Tensor logits = Tensor::zeros({2, 4}, DType::F32);
    const auto r = cross_entropy(logits, {0, 3});
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  }
  SUBCASE("confident correct prediction drives loss and gradient to zero") {
    Tensor logits = Tensor::zeros({2, 3}, DType::F32);
    logits.f32()[1] = 25.0f;
    logits.f32()[3 + 2] = 25.0f;
    const auto r = cross_entropy(logits, {1, 2});
    CHECK(r.loss < 1e-6);
    for (const float g : r.grad.f32()) CHECK(std::abs(g) <= 1e-8);
  }
  SUBCASE("gradient matches the f64 softmax formula and finite differences") {
    std::mt19937_64 gen(2);
    Tensor logits = micronets::rand_t({3, 5}, gen, -2.0f, 2.0f);
    const std::vector<int> labels = {4, 0, 2};
    const auto r = cross_entropy(logits, labels);
    REQUIRE(r.grad.shape() == logits.shape());
    for (int64_t i = 0; i < 3; ++i) {
      // Closed form in f64.
      double mx = -1e30, sum = 0.0;
      for (int64_t j = 0; j < 5; ++j)
        mx = std::max(mx, static_cast<double>(logits.f32()[static_cast<std::size_t>(i * 5 + j)]));
      for (int64_t j = 0; j < 5; ++j)
        sum += std::exp(static_cast<double>(logits.f32()[static_cast<std::size_t>(i * 5 + j)]) - mx);
      for (int64_t j = 0; j < 5; ++j) {
        const double p =
            std::exp(static_cast<double>(logits.f32()[static_cast<std::size_t>(i * 5 + j)]) - mx) /
            sum;
        const double expect = (p - (labels[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0)) / 3.0;
        CHECK(static_cast<double>(r.grad.f32()[static_cast<std::size_t>(i * 5 + j)]) ==
              doctest::Approx(expect).epsilon(1e-5));
      }
    }
    // Central finite differences of the loss itself.
    for (const int64_t e : {0L, 7L, 13L}) {
      Tensor lp = logits, lm = logits;
      const double h = 1e-3;
      lp.f32()[static_cast<std::size_t>(e)] += static_cast<float>(h);
      lm.f32()[static_cast<std::size_t>(e)] -= static_cast<float>(h);
      const double wp = lp.f32()[static_cast<std::size_t>(e)];
      const double wm = lm.f32()[static_cast<std::size_t>(e)];
      const double fd =
          (cross_entropy(lp, labels).loss - cross_entropy(lm, labels).loss) / (wp - wm);
      CHECK(grad_close(r.grad.f32()[static_cast<std::size_t>(e)], fd));
    }
  }
  SUBCASE("argument validation") {
    CHECK_THROWS_AS(cross_entropy(Tensor::zeros({2, 3}, DType::F32), {0}), InvalidArgument);
    CHECK_THROWS_AS(cross_entropy(Tensor::zeros({2, 3}, DType::F32), {0, 3}), InvalidArgument);
    CHECK_THROWS_AS(cross_entropy(Tensor::zeros({2, 1}, DType::F32), {0, 0}), InvalidArgument);
  }
}

TEST_CASE("backward matches central finite differences on every layer kind") {
  const Graph g = micronets::zoo(11, /*grouped=*/false);
  std::mt19937_64 gen(21);
  Tensor batch = micronets::rand_t({2, 8, 8, 3}, gen, 0.0f, 1.0f);
  const std::vector<int> labels = {1, 3};
  const BackwardResult res = backward(g, batch, labels);
  CHECK(std::isfinite(res.loss));

  const oracle::Array x = oracle::from_tensor(batch);
  for (const Node& n : g.nodes) {
    if (n.weights.empty()) continue;
    const bool is_bn = std::holds_alternative<BatchNormAttrs>(n.kind);
    REQUIRE(res.grads.count(n.id) == 1);
    const auto& gt = res.grads.at(n.id);
    REQUIRE(gt.size() == n.weights.size());
    for (std::size_t wi = 0; wi < n.weights.size(); ++wi) {
      REQUIRE(gt[wi].shape() == n.weights[wi].shape());
      if (is_bn && wi >= 2) {
        // Running statistics are frozen; their gradients are zero.
        for (const float v : gt[wi].f32()) CHECK(v == 0.0f);
        continue;
      }
      const int64_t numel = n.weights[wi].numel();
      const int64_t step = std::max<int64_t>(1, numel / 4);
      for (int64_t e = 0; e < numel; e += step) {
        const double fd = oracle::fd_weight_grad(g, n.id, wi, e, x, labels);
        const double an = gt[wi].f32()[static_cast<std::size_t>(e)];
        CAPTURE(n.id);
        CAPTURE(wi);
        CAPTURE(e);
        CAPTURE(an);
        CAPTURE(fd);
        CHECK(grad_close(an, fd));
      }
    }
  }
}

TEST_CASE("conv input gradient agrees with the transposed-convolution oracle") {
  // A 1x1 identity probe ahead of the convolution turns the downstream
  // input gradient into the probe's weight gradient: dL/dw_probe[ic][oc] =
  // sum_p x[p,ic] * dx[p,oc].
  auto run_case = [](int stride, Padding pad) {
    micronets::Builder b(4, 4, 2, 31);
    b.conv("probe", kInputId, 2, 2, 1, 1, Padding::valid(), false);
    b.conv("t", "probe", 2, 3, 3, stride, pad, false);
    b.unary("gap", "t", GlobalAvgPoolAttrs{});
    b.unary("softmax", "gap", SoftmaxAttrs{});
    Graph g = b.finish("softmax", 3);
    Tensor ident = Tensor::zeros({1, 1, 2, 2}, DType::F32);
    ident.f32()[0] = 1.0f;
    ident.f32()[3] = 1.0f;
    g.find("probe")->weights[0] = ident;

    std::mt19937_64 gen(7);
    Tensor batch = micronets::rand_t({1, 4, 4, 2}, gen, -1.0f, 1.0f);
    const std::vector<int> labels = {1};
    const BackwardResult res = backward(g, batch, labels);

    // Oracle: grad at the gap output is (softmax - onehot); spread evenly
    // over the conv output, then push through the transposed convolution.
    const oracle::Array x = oracle::from_tensor(batch);
    auto vals = oracle::run_graph(g, x);
    const oracle::Array& probs = vals.at("softmax");
    const oracle::Array& tout = vals.at("t");
    const int64_t hw = tout.shape[1] * tout.shape[2];
    oracle::Array gy{tout.shape, std::vector<double>(tout.v.size())};
    for (int64_t p = 0; p < hw; ++p)
      for (int64_t k = 0; k < 3; ++k)
        gy.v[static_cast<std::size_t>(p * 3 + k)] =
            (probs.v[static_cast<std::size_t>(k)] - (k == 1 ? 1.0 : 0.0)) /
            static_cast<double>(hw);
    const auto& attrs = std::get<Conv2dAttrs>(g.find("t")->kind);
    const oracle::Array dx =
        oracle::conv2d_input_grad(gy, oracle::from_tensor(g.find("t")->weights[0]),
                                  {1, 4, 4, 2}, attrs);

    const auto& wg = res.grads.at("probe")[0];
    for (int64_t ic = 0; ic < 2; ++ic)
      for (int64_t oc = 0; oc < 2; ++oc) {
        double expect = 0.0;
        for (int64_t p = 0; p < 16; ++p)
          expect += x.v[static_cast<std::size_t>(p * 2 + ic)] *
                    dx.v[static_cast<std::size_t>(p * 2 + oc)];
        CAPTURE(stride);
        CAPTURE(ic);
        CAPTURE(oc);
        CHECK(static_cast<double>(wg.f32()[static_cast<std::size_t>(ic * 2 + oc)]) ==
              doctest::Approx(expect).epsilon(1e-4));
      }
  };
  run_case(1, Padding::same());
  run_case(2, Padding::explicit_pad(1));
}

TEST_CASE("full-batch descent decreases the loss every epoch") {
  micronets::Builder b(8, 8, 3, 17);
  b.unary("gap", kInputId, GlobalAvgPoolAttrs{});
  b.fc("fc", "gap", 3, 2);
  b.unary("softmax", "fc", SoftmaxAttrs{});
  const Graph g = b.finish("softmax", 2);

  const LabeledDataset ds = tiny_synth(2, 6, 0.02f, 4);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = static_cast<int>(ds.samples.size());
  cfg.lr0 = 0.25f;
  cfg.momentum = 0.0f;
  cfg.seed = 1;
  const auto [trained, report] = train(g, ds, ds, cfg);
  (void)trained;
  REQUIRE(report.epochs.size() == 5);
  for (std::size_t e = 1; e < report.epochs.size(); ++e)
    CHECK(report.epochs[e].train_loss < report.epochs[e - 1].train_loss);
  for (std::size_t e = 0; e < report.epochs.size(); ++e)
    CHECK(report.epochs[e].lr == lr_at(static_cast<int>(e), cfg));
}

TEST_CASE("training is bit-deterministic across runs and thread counts") {
  const Graph g = micronets::zoo(3, /*grouped=*/false);
  const LabeledDataset ds = tiny_synth(5, 4, 0.1f, 8);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.lr0 = 0.02f;
  cfg.seed = 5;

  const auto [m1, r1] = train(g, ds, ds, cfg, 1);
  const auto [m2, r2] = train(g, ds, ds, cfg, 1);
  const auto [m3, r3] = train(g, ds, ds, cfg, 3);
  CHECK(serialize_model(m1) == serialize_model(m2));
  CHECK(serialize_model(m1) == serialize_model(m3));
  CHECK(r1.epochs.back().train_loss == r3.epochs.back().train_loss);

  // Gradients themselves are bitwise reproducible across thread counts.
  std::mt19937_64 gen(6);
  Tensor batch = micronets::rand_t({3, 8, 8, 3}, gen, 0.0f, 1.0f);
  const std::vector<int> labels = {0, 2, 4};
  const BackwardResult a = backward(g, batch, labels, 1);
  const BackwardResult c = backward(g, batch, labels, 4);
  CHECK(a.loss == c.loss);
  for (const auto& [id, tensors] : a.grads)
    for (std::size_t wi = 0; wi < tensors.size(); ++wi) CHECK(tensors[wi] == c.grads.at(id)[wi]);
}

TEST_CASE("best checkpoint keeps the earliest top validation accuracy") {
  micronets::Builder b(8, 8, 3, 23);
  b.unary("gap", kInputId, GlobalAvgPoolAttrs{});
  b.fc("fc", "gap", 3, 2);
  b.unary("softmax", "fc", SoftmaxAttrs{});
  const Graph g = b.finish("softmax", 2);
  const LabeledDataset ds = tiny_synth(2, 10, 0.05f, 2);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 5;
  cfg.lr0 = 0.3f;
  cfg.seed = 3;
  const auto [trained, report] = train(g, ds, ds, cfg);
  (void)trained;
  double best = -1.0;
  int first_best = -1;
  for (std::size_t e = 0; e < report.epochs.size(); ++e)
    if (report.epochs[e].val_acc > best) {
      best = report.epochs[e].val_acc;
      first_best = static_cast<int>(e);
    }
  CHECK(report.best_val_acc == best);
  CHECK(report.best_epoch == first_best);
}

TEST_CASE("replace_head swaps only the classifier") {
  const Graph r18 = build_architecture(Family::ResNet18, 1000, {224, 224}, 1);
  const Graph r18_5 = replace_head(r18, 5, 2);
  CHECK(param_count(r18_5) == 11179077);
  CHECK(r18_5.meta.num_classes == 5);
  CHECK(r18_5.meta.class_names.empty());

  const Graph mb = build_architecture(Family::MobileNetV2, 1000, {224, 224}, 1);
  CHECK(param_count(replace_head(mb, 5, 2)) == 2230277);

  // Every tensor outside the head is bit-identical.
  for (std::size_t i = 0; i < r18.nodes.size(); ++i) {
    const Node& a = r18.nodes[i];
    const Node& b = r18_5.nodes[i];
    REQUIRE(a.id == b.id);
    if (std::holds_alternative<FullyConnectedAttrs>(a.kind)) {
      CHECK(b.weights[0].dim(0) == a.weights[0].dim(0));
      CHECK(b.weights[0].dim(1) == 5);
      continue;
    }
    REQUIRE(a.weights.size() == b.weights.size());
    for (std::size_t wi = 0; wi < a.weights.size(); ++wi) CHECK(a.weights[wi] == b.weights[wi]);
  }

  // Same class count still resamples the head.
  const Graph resampled = replace_head(r18, 1000, 9);
  const Node* old_fc = nullptr;
  for (const Node& n : r18.nodes)
    if (std::holds_alternative<FullyConnectedAttrs>(n.kind)) old_fc = &n;
  const Node* new_fc = nullptr;
  for (const Node& n : resampled.nodes)
    if (std::holds_alternative<FullyConnectedAttrs>(n.kind)) new_fc = &n;
  REQUIRE(old_fc != nullptr);
  REQUIRE(new_fc != nullptr);
  CHECK_FALSE(old_fc->weights[0] == new_fc->weights[0]);

  CHECK_THROWS_AS(replace_head(r18, 1, 0), InvalidArgument);
}

TEST_CASE("quantized models cannot be trained") {
  const Graph g = micronets::zoo(2, /*grouped=*/false);
  const Graph q = quantize_dynamic(g);
  const LabeledDataset ds = tiny_synth(5, 2, 0.1f, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(q, ds, ds, cfg), InvalidState);
  std::mt19937_64 gen(1);
  Tensor batch = micronets::rand_t({1, 8, 8, 3}, gen, 0.0f, 1.0f);
  CHECK_THROWS_AS(backward(q, batch, {0}), InvalidState);
}

TEST_CASE("train config validation") {
  const Graph g = micronets::zoo(2, /*grouped=*/false);
  const LabeledDataset ds = tiny_synth(5, 2, 0.1f, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(g, ds, ds, cfg), InvalidArgument);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(g, ds, ds, cfg), InvalidArgument);
  cfg = {};
  cfg.lr0 = 0.0f;
  CHECK_THROWS_AS(train(g, ds, ds, cfg), InvalidArgument);
  cfg = {};
  cfg.momentum = 1.0f;
  CHECK_THROWS_AS(train(g, ds, ds, cfg), InvalidArgument);
  cfg = {};
  cfg.lr_gamma = 0.0f;
  CHECK_THROWS_AS(train(g, ds, ds, cfg), InvalidArgument);
  cfg = {};
  cfg.weight_decay = -0.1f;
  CHECK_THROWS_AS(train(g, ds, ds, cfg), InvalidArgument);
  cfg = {};
  CHECK_THROWS_AS(train(g, LabeledDataset{}, ds, cfg), InvalidArgument);
}
