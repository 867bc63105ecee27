# Copyright 2026 The EdgeQuant Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""End-to-end smoke tests for the python bindings."""

import numpy as np
import pytest

import edgequant as eqt


@pytest.fixture(scope="module")
def data():
    images, labels, names = eqt.synth(classes=4, per_class=40, size=32, noise=0.1, seed=7)
    assert images.shape == (160, 32, 32, 3)
    assert images.dtype == np.float32
    assert labels.shape == (160,)
    assert len(names) == 4
    order = np.random.default_rng(0).permutation(len(labels))
    images, labels = images[order], labels[order]
    return (images[:120], labels[:120].tolist(), images[120:], labels[120:].tolist())


@pytest.fixture(scope="module")
def trained(data):
    x_tr, y_tr, x_va, y_va = data
    model = eqt.Model.build("tiny_cnn", classes=4, input_size=32, seed=1)
    trained, report = model.train(
        x_tr, y_tr, x_va, y_va, epochs=3, batch_size=16, lr0=0.05, seed=3
    )
    assert len(report["epochs"]) == 3
    assert 0 <= report["best_epoch"] < 3
    return trained


def test_build_and_param_count():
    assert eqt.Model.build("vgg16", classes=1000).param_count() == 138357544
    tiny = eqt.Model.build("tiny_cnn", classes=4, input_size=32)
    assert tiny.param_count() == 6164
    assert tiny.num_classes == 4
    assert tiny.input_shape == (32, 32, 3)
    assert tiny.quant == "none"
    assert "tiny_cnn" in repr(tiny)


def test_synth_determinism():
    a = eqt.synth(classes=3, per_class=5, size=32, noise=0.1, seed=11)
    b = eqt.synth(classes=3, per_class=5, size=32, noise=0.1, seed=11)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])


def test_run_produces_probabilities(trained, data):
    x_tr = data[0]
    probs = trained.run(x_tr[:8])
    assert probs.shape == (8, 4)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-5)
    assert (probs >= 0).all()


def test_quantize_modes(trained, data):
    x_tr = data[0]
    fp16 = trained.quantize_fp16()
    dyn = trained.quantize_dynamic()
    assert fp16.quant == "fp16"
    assert dyn.quant == "dynamic"
    assert dyn.size_bytes() < fp16.size_bytes() < trained.size_bytes()

    stats = trained.calibrate([x_tr[:16], x_tr[16:32]])
    assert len(stats) > 0
    full = trained.quantize_full(stats)
    assert full.quant == "full-int"

    for model in (fp16, dyn, full):
        probs = model.run(x_tr[:4])  # mode follows the container tag
        assert probs.shape == (4, 4)
        assert np.isfinite(probs).all()
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-4)


def test_evaluate(trained, data):
    _, _, x_va, y_va = data
    m = trained.evaluate(x_va, y_va)
    assert m["mode"] == "f32"
    assert m["num_samples"] == len(y_va)
    assert 0.0 <= m["accuracy"] <= 1.0
    assert 0.0 <= m["macro_f1"] <= 1.0
    assert len(m["per_class_f1"]) == 4


def test_save_load_round_trip(trained, data, tmp_path):
    path = str(tmp_path / "model.eqm")
    trained.save(path)
    back = eqt.Model.load(path)
    assert back.param_count() == trained.param_count()
    assert back.quant == trained.quant
    x = data[0][:4]
    assert np.array_equal(back.run(x), trained.run(x))


def test_stats_save_load(trained, data, tmp_path):
    stats = trained.calibrate([data[0][:16]])
    path = str(tmp_path / "stats.eqstats")
    stats.save(path)
    loaded = eqt.CalibrationStats.load(path)
    assert len(loaded) == len(stats)


def test_replace_head(trained):
    wider = trained.replace_head(6, seed=2)
    assert wider.num_classes == 6
    assert wider.param_count() != trained.param_count()


def test_error_types(trained, tmp_path):
    with pytest.raises(eqt.InvalidArgumentError):
        eqt.Model.build("alexnet", classes=5)
    with pytest.raises(eqt.DataError):
        eqt.Model.load(str(tmp_path / "missing.eqm"))
    with pytest.raises(eqt.CalibrationError):
        trained.quantize_full(eqt.CalibrationStats())
    with pytest.raises(eqt.InvalidStateError):
        trained.quantize_fp16().quantize_dynamic()
    with pytest.raises(eqt.InvalidArgumentError):
        trained.run(np.zeros((1, 8, 8, 3), dtype=np.float32))
    with pytest.raises(eqt.InvalidArgumentError):
        eqt.synth(classes=1)
