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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "edgequant/builders.hpp"
#include "edgequant/container.hpp"
#include "edgequant/dataset.hpp"
#include "edgequant/engine.hpp"
#include "edgequant/errors.hpp"
#include "edgequant/eval.hpp"
#include "edgequant/quantize.hpp"
#include "edgequant/train.hpp"

namespace py = pybind11;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

eq::Tensor tensor_from_array(const FloatArray& arr) {
  std::vector<int64_t> shape(static_cast<std::size_t>(arr.ndim()));
  for (py::ssize_t i = 0; i < arr.ndim(); ++i)
    shape[static_cast<std::size_t>(i)] = arr.shape(i);
  eq::Tensor t = eq::Tensor::zeros(shape, eq::DType::F32);
  std::copy(arr.data(), arr.data() + arr.size(), t.f32().begin());
  return t;
}

py::array_t<float> array_from_tensor(const eq::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> arr(shape);
  const auto src = t.f32();
  std::copy(src.begin(), src.end(), arr.mutable_data());
  return arr;
}

eq::LabeledDataset dataset_from_arrays(const FloatArray& images, const std::vector<int>& labels) {
  if (images.ndim() != 4)
    throw eq::InvalidArgument("images must be a rank-4 NHWC float array");
  const auto n = static_cast<std::size_t>(images.shape(0));
  if (labels.size() != n) throw eq::InvalidArgument("labels length must match images");
  const int64_t h = images.shape(1), w = images.shape(2), c = images.shape(3);
  const int64_t stride = h * w * c;

  eq::LabeledDataset ds;
  int max_label = 0;
  const float* data = images.data();
  for (std::size_t i = 0; i < n; ++i) {
    eq::Tensor img = eq::Tensor::zeros({h, w, c}, eq::DType::F32);
    std::copy(data + static_cast<int64_t>(i) * stride, data + static_cast<int64_t>(i + 1) * stride,
              img.f32().begin());
    if (labels[i] < 0) throw eq::InvalidArgument("labels must be non-negative");
    max_label = std::max(max_label, labels[i]);
    ds.samples.push_back({std::move(img), labels[i]});
  }
  for (int cidx = 0; cidx <= max_label; ++cidx)
    ds.class_names.push_back("class_" + std::to_string(cidx));
  return ds;
}

eq::ExecMode mode_from(const eq::Graph& g, const std::string& mode) {
  return mode == "auto" ? eq::exec_mode_for_tag(g.meta.quant) : eq::exec_mode_from_name(mode);
}

struct PyModel {
  eq::Graph g;
};

py::dict metrics_dict(const eq::EvalReport& r) {
  py::dict d;
  d["model_id"] = r.model_id;
  d["mode"] = r.mode;
  d["size_bytes"] = r.size_bytes;
  d["content_hash"] = r.content_hash;
  d["num_samples"] = r.num_samples;
  d["accuracy"] = r.metrics.accuracy;
  d["macro_precision"] = r.metrics.macro_precision;
  d["macro_recall"] = r.metrics.macro_recall;
  d["macro_f1"] = r.metrics.macro_f1;
  d["per_class_precision"] = r.metrics.precision;
  d["per_class_recall"] = r.metrics.recall;
  d["per_class_f1"] = r.metrics.f1;
  d["latency_ms_per_sample"] = r.latency_ms_per_sample;
  return d;
}

}  // namespace

PYBIND11_MODULE(_edgequant, m) {
  m.doc() = "Compact CNN training, post-training quantization, and int8 inference";

  py::register_exception<eq::InvalidArgument>(m, "InvalidArgumentError", PyExc_ValueError);
  py::register_exception<eq::DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<eq::ParseError>(m, "ModelParseError", PyExc_ValueError);
  py::register_exception<eq::InvalidState>(m, "InvalidStateError", PyExc_RuntimeError);
  py::register_exception<eq::UnsupportedPattern>(m, "UnsupportedPatternError",
                                                 PyExc_RuntimeError);
  py::register_exception<eq::CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);

  py::class_<eq::CalibrationStats>(m, "CalibrationStats")
      .def(py::init<>())
      .def("save", &eq::CalibrationStats::save, py::arg("path"))
      .def_static("load", &eq::CalibrationStats::load, py::arg("path"))
      .def("__len__", [](const eq::CalibrationStats& s) { return s.all().size(); });

  py::class_<PyModel>(m, "Model")
      .def_static(
          "build",
          [](const std::string& family, int classes, int input_size, uint64_t seed,
             int tiny_width, int tiny_depth) {
            const eq::Family f = eq::family_from_string(family);
            std::pair<int, int> size = eq::default_input_size(f);
            if (input_size > 0) size = {input_size, input_size};
            eq::TinyCnnConfig tiny;
            tiny.width = tiny_width;
            tiny.depth = tiny_depth;
            return PyModel{eq::build_architecture(f, classes, size, seed, tiny)};
          },
          py::arg("family"), py::arg("classes"), py::arg("input_size") = 0, py::arg("seed") = 0,
          py::arg("tiny_width") = 8, py::arg("tiny_depth") = 3)
      .def_static("load", [](const std::string& path) { return PyModel{eq::load_model(path)}; },
                  py::arg("path"))
      .def("save", [](const PyModel& self, const std::string& path) { eq::save_model(self.g, path); },
           py::arg("path"))
      .def_property_readonly("family", [](const PyModel& self) { return self.g.meta.family; })
      .def_property_readonly("num_classes",
                             [](const PyModel& self) { return self.g.meta.num_classes; })
      .def_property_readonly(
          "quant", [](const PyModel& self) { return eq::quant_tag_name(self.g.meta.quant); })
      .def_property_readonly("class_names",
                             [](const PyModel& self) { return self.g.meta.class_names; })
      .def_property_readonly("input_shape",
                             [](const PyModel& self) {
                               return py::make_tuple(self.g.input.h, self.g.input.w,
                                                     self.g.input.c);
                             })
      .def("param_count", [](const PyModel& self) { return eq::param_count(self.g); })
      .def("size_bytes",
           [](const PyModel& self) { return eq::serialize_model(self.g).size(); })
      .def(
          "run",
          [](const PyModel& self, const FloatArray& batch, const std::string& mode, int threads) {
            const eq::Tensor x = tensor_from_array(batch);
            eq::Tensor y;
            {
              py::gil_scoped_release release;
              eq::RunOptions opts;
              opts.threads = threads;
              y = eq::run(self.g, x, mode_from(self.g, mode), opts);
            }
            return array_from_tensor(y);
          },
          py::arg("batch"), py::arg("mode") = "auto", py::arg("threads") = 0)
      .def("quantize_fp16",
           [](const PyModel& self) { return PyModel{eq::quantize_fp16(self.g)}; })
      .def(
          "quantize_dynamic",
          [](const PyModel& self, bool per_tensor_weights) {
            return PyModel{eq::quantize_dynamic(self.g, per_tensor_weights)};
          },
          py::arg("per_tensor_weights") = false)
      .def(
          "calibrate",
          [](const PyModel& self, const std::vector<FloatArray>& batches, int max_batches,
             int threads) {
            std::vector<eq::Tensor> tensors;
            for (const FloatArray& b : batches) tensors.push_back(tensor_from_array(b));
            py::gil_scoped_release release;
            return eq::calibrate(self.g, tensors, max_batches, threads);
          },
          py::arg("batches"), py::arg("max_batches") = 100, py::arg("threads") = 0)
      .def(
          "quantize_full",
          [](const PyModel& self, const eq::CalibrationStats& stats, bool per_tensor_weights) {
            return PyModel{eq::quantize_full(self.g, stats, per_tensor_weights)};
          },
          py::arg("stats"), py::arg("per_tensor_weights") = false)
      .def(
          "replace_head",
          [](const PyModel& self, int num_classes, uint64_t seed) {
            return PyModel{eq::replace_head(self.g, num_classes, seed)};
          },
          py::arg("num_classes"), py::arg("seed") = 0)
      .def(
          "train",
          [](const PyModel& self, const FloatArray& images, const std::vector<int>& labels,
             const FloatArray& val_images, const std::vector<int>& val_labels, int epochs,
             int batch_size, float lr0, float momentum, int lr_step_epochs, float lr_gamma,
             float weight_decay, uint64_t seed, int threads) {
            const eq::LabeledDataset tr = dataset_from_arrays(images, labels);
            const eq::LabeledDataset va = dataset_from_arrays(val_images, val_labels);
            eq::TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.lr0 = lr0;
            cfg.momentum = momentum;
            cfg.lr_step_epochs = lr_step_epochs;
            cfg.lr_gamma = lr_gamma;
            cfg.weight_decay = weight_decay;
            cfg.seed = seed;
            std::pair<eq::Graph, eq::TrainReport> result;
            {
              py::gil_scoped_release release;
              result = eq::train(self.g, tr, va, cfg, threads);
            }
            py::list rows;
            for (const eq::EpochRow& row : result.second.epochs) {
              py::dict d;
              d["train_loss"] = row.train_loss;
              d["train_acc"] = row.train_acc;
              d["val_acc"] = row.val_acc;
              d["lr"] = row.lr;
              rows.append(d);
            }
            py::dict report;
            report["epochs"] = rows;
            report["best_epoch"] = result.second.best_epoch;
            report["best_val_acc"] = result.second.best_val_acc;
            return py::make_tuple(PyModel{std::move(result.first)}, report);
          },
          py::arg("images"), py::arg("labels"), py::arg("val_images"), py::arg("val_labels"),
          py::arg("epochs") = 10, py::arg("batch_size") = 32, py::arg("lr0") = 0.01f,
          py::arg("momentum") = 0.9f, py::arg("lr_step_epochs") = 7, py::arg("lr_gamma") = 0.1f,
          py::arg("weight_decay") = 0.0f, py::arg("seed") = 0, py::arg("threads") = 0)
      .def(
          "evaluate",
          [](const PyModel& self, const FloatArray& images, const std::vector<int>& labels,
             const std::string& mode, int batch_size, int threads) {
            const eq::LabeledDataset ds = dataset_from_arrays(images, labels);
            eq::EvalOptions opts;
            opts.batch_size = batch_size;
            opts.threads = threads;
            eq::EvalReport rep;
            {
              py::gil_scoped_release release;
              rep = eq::evaluate(self.g, ds, mode_from(self.g, mode), opts);
            }
            return metrics_dict(rep);
          },
          py::arg("images"), py::arg("labels"), py::arg("mode") = "auto",
          py::arg("batch_size") = 32, py::arg("threads") = 0)
      .def("__repr__", [](const PyModel& self) {
        return "<edgequant.Model family=" + self.g.meta.family +
               " classes=" + std::to_string(self.g.meta.num_classes) + " quant=" +
               eq::quant_tag_name(self.g.meta.quant) + ">";
      });

  m.def(
      "synth",
      [](int classes, int per_class, int size, float noise, uint64_t seed) {
        eq::SynthSpec spec;
        spec.num_classes = classes;
        spec.per_class = per_class;
        spec.h = spec.w = size;
        spec.noise = noise;
        spec.seed = seed;
        const eq::LabeledDataset ds = eq::synth_generate(spec);
        const auto n = static_cast<py::ssize_t>(ds.samples.size());
        py::array_t<float> images({n, static_cast<py::ssize_t>(spec.h),
                                   static_cast<py::ssize_t>(spec.w), py::ssize_t{3}});
        py::array_t<int32_t> labels(n);
        float* ip = images.mutable_data();
        int32_t* lp = labels.mutable_data();
        const int64_t stride = static_cast<int64_t>(spec.h) * spec.w * 3;
        for (py::ssize_t i = 0; i < n; ++i) {
          const auto& s = ds.samples[static_cast<std::size_t>(i)];
          std::copy(s.image.f32().begin(), s.image.f32().end(), ip + i * stride);
          lp[i] = s.label;
        }
        return py::make_tuple(images, labels, ds.class_names);
      },
      py::arg("classes") = 4, py::arg("per_class") = 500, py::arg("size") = 32,
      py::arg("noise") = 0.1f, py::arg("seed") = 0);
}
