"""
Treinos completos em escala de mesa (pytest -m slow)

Usa configs/desk.toml: 200 treino / 50 teste, 64×64, três formas.
"""
from pathlib import Path

import pytest

from boxsup.schemas.config import load_run_config
from boxsup.services.dataset_service import DatasetService
from boxsup.services.eval_service import EvalService
from boxsup.services.proposal_service import ProposalService
from boxsup.services.trainer_service import TrainerService

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="module")
def desk():
    return load_run_config(str(CONFIGS / "desk.toml"))


@pytest.fixture(scope="module")
def train_samples(desk):
    return [DatasetService.synth_sample(desk.synth, "train", i, "box") for i in range(desk.synth.num_images)]


@pytest.fixture(scope="module")
def test_samples(desk):
    return [DatasetService.synth_sample(desk.synth, "test", i) for i in range(desk.synth.num_test_images)]


@pytest.fixture(scope="module")
def pools(desk, train_samples):
    return ProposalService.generate_all(train_samples, desk.proposer, workers=4)


def _train(desk, samples, pools, **overrides):
    config = desk.train.model_copy(update=overrides)
    return TrainerService.train(samples, pools, desk.net, config, workers=4)


def _test_miou(params, test_samples, scales=(1.0,)):
    preds = TrainerService.infer_all(params, test_samples, scales, workers=4)
    return EvalService.evaluate(
        [preds[s.image_id] for s in test_samples], [s.gt_mask for s in test_samples], 4
    ).mean_iou


@pytest.fixture(scope="module")
def mask_run(desk, train_samples, pools):
    return _train(desk, train_samples, pools, supervision_mode="mask")


@pytest.fixture(scope="module")
def box_run(desk, train_samples, pools):
    return _train(desk, train_samples, pools)


def test_proposal_recall(pools, train_samples):
    assert ProposalService.proposal_recall(pools, train_samples, 0.5).recall >= 0.9


def test_mask_supervision_reaches_target(mask_run, test_samples):
    assert _test_miou(mask_run[0], test_samples) >= 0.80


def test_box_supervision_degrades_gracefully(mask_run, box_run, test_samples):
    assert _test_miou(box_run[0], test_samples) >= _test_miou(mask_run[0], test_samples) - 0.08


def test_box_beats_rectangles(desk, train_samples, pools, box_run, test_samples):
    rectangles, _ = _train(desk, train_samples, pools, baseline="rectangles")
    assert _test_miou(box_run[0], test_samples) >= _test_miou(rectangles, test_samples) + 0.05


def test_supervision_improves_over_epochs(box_run):
    history = box_run[1].history
    assert history[-1].supervision_miou >= history[0].supervision_miou + 0.03


def test_semi_supervision(desk, train_samples, pools, box_run, test_samples):
    plan = DatasetService.annotation_plan(desk.synth.model_copy(update={"mask_fraction": 0.1}))
    for sample, kind in zip(train_samples, plan):
        sample.annotation = kind
    try:
        semi, _ = _train(desk, train_samples, pools, supervision_mode="semi")
    finally:
        for sample in train_samples:
            sample.annotation = "box"
    assert _test_miou(semi, test_samples) >= _test_miou(box_run[0], test_samples) - 0.01


def test_trimap_interior_beats_boundary(mask_run, test_samples):
    preds = TrainerService.infer_all(mask_run[0], test_samples, workers=4)
    report = EvalService.trimap_eval(
        [preds[s.image_id] for s in test_samples], [s.gt_mask for s in test_samples], [5], 4
    )
    assert report.rows[0].interior_miou > report.rows[0].boundary_miou


def test_multi_scale_inference(box_run, test_samples):
    single = _test_miou(box_run[0], test_samples)
    assert _test_miou(box_run[0], test_samples, (0.8, 1.0, 1.2)) >= single - 0.005


def test_history_independent_of_workers(desk, train_samples, pools):
    config = desk.train.model_copy(update={"epochs": 3})
    subset = train_samples[:40]
    _, one = TrainerService.train(subset, pools, desk.net, config, workers=1)
    _, four = TrainerService.train(subset, pools, desk.net, config, workers=4)
    assert one.history == four.history
