# Copyright 2026 The StitchFusion C++ Authors. All Rights Reserved.
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

import random

import pytest

import stitchfusion as sf


def test_param_counts():
    assert sf.param_count() == 144000
    assert sf.param_count(modalities=3) == 432000
    assert sf.param_count(modalities=4, stages="3,4") == 713664
    assert sf.param_count(include_bias=False) == 135168
    assert sf.empirical_param_count(modalities=4, stages="3,4") == 713664


def test_bad_density_raises():
    with pytest.raises(ValueError):
        sf.param_count(density="dense")


def test_equivalence_and_transparency():
    assert sf.equivalence_check(seed=7, inputs=2)["passed"]
    report = sf.transparency_check(seed=1)
    assert report["passed"] and report["configurations"] == 24


def test_grad_cases():
    names = sf.grad_case_names(include_end_to_end=False)
    assert "adapter" in names and "layer_norm" in names
    for name in ("adapter", "softmax", "cross_entropy"):
        assert sf.grad_check(name, seed=3) < sf.GRAD_TOLERANCE


def brute_miou(pred, gt, k):
    ious = []
    for c in range(k):
        inter = sum(1 for p, g in zip(pred, gt) if g != 255 and p == c and g == c)
        union = sum(1 for p, g in zip(pred, gt) if g != 255 and (p == c or g == c))
        if union:
            ious.append(inter / union)
    return 100.0 * sum(ious) / len(ious)


def test_evaluate_labels_matches_brute_force():
    rng = random.Random(5)
    for _ in range(20):
        k = rng.randint(2, 6)
        gt = [255 if rng.random() < 0.05 else rng.randrange(k) for _ in range(256)]
        pred = [rng.randrange(k) for _ in range(256)]
        assert sf.evaluate_labels([pred], [gt], k)["miou"] == pytest.approx(brute_miou(pred, gt, k), abs=1e-12)


def test_train_and_evaluate_round_trip(tmp_path):
    vis = sf.synth_data(tmp_path / "train", samples=6, seed=2)
    sf.synth_data(tmp_path / "eval", samples=3, seed=2, split="eval")
    assert len(vis) == 5 and not any(vis[1][m] and vis[1][1 - m] for m in range(2))
    config = {"data": str(tmp_path / "train"), "eval_data": str(tmp_path / "eval"), "epochs": 1,
              "warmup_epochs": 0, "batch_size": 3, "base_lr": 1e-3, "out": str(tmp_path / "run")}
    result = sf.train(config, seed=4)
    assert result["steps"] == 2
    reloaded = sf.evaluate(tmp_path / "run" / "checkpoint", tmp_path / "eval")
    assert reloaded["miou"] == result["metrics"]["miou"]


def test_config_errors():
    with pytest.raises(ValueError):
        sf.train({"learning_rate": 1.0})
    with pytest.raises(OSError):
        sf.evaluate("/nonexistent/ckpt", "/nonexistent/data")
