import json
import math

import numpy as np
import pytest

from boxsup.models.evaluation import ConfusionMatrix
from boxsup.models.geometry import IGNORE
from boxsup.schemas.report import IouReport, TrimapReport, TrimapRow
from boxsup.services.eval_service import EvalService
from boxsup.utils.exceptions import (
    DimensionMismatchException,
    EmptyMatrixException,
    LabelOutOfRangeException,
)


def _halves(split, size=16):
    labels = np.zeros((size, size), dtype=np.uint8)
    labels[:, split:] = 1
    return labels


class TestConfusion:
    def test_perfect_prediction(self, rng):
        gt = rng.integers(0, 4, size=(10, 10)).astype(np.uint8)
        conf = EvalService.accumulate(ConfusionMatrix(4), gt, gt)
        assert np.count_nonzero(conf.counts - np.diag(np.diag(conf.counts))) == 0
        report = EvalService.mean_iou(conf)
        assert report.mean_iou == 1.0
        assert report.pixel_count == 100

    def test_hand_counted(self):
        gt = np.array([[0, 1], [1, 1]], dtype=np.uint8)
        pred = np.array([[0, 0], [1, 1]], dtype=np.uint8)
        conf = EvalService.accumulate(ConfusionMatrix(2), pred, gt)
        np.testing.assert_array_equal(conf.counts, [[1, 0], [1, 2]])
        report = EvalService.mean_iou(conf)
        assert report.per_class == pytest.approx([0.5, 2 / 3])
        assert report.mean_iou == pytest.approx(7 / 12)

    def test_absent_class_excluded(self):
        gt = np.array([[0, 0, 1, 1]], dtype=np.uint8)
        pred = np.array([[0, 1, 1, 1]], dtype=np.uint8)
        report = EvalService.mean_iou(EvalService.accumulate(ConfusionMatrix(3), pred, gt))
        assert report.per_class[2] is None
        assert report.mean_iou == pytest.approx((0.5 + 2 / 3) / 2)

    def test_ignore_not_counted(self):
        gt = np.array([[0, IGNORE], [1, IGNORE]], dtype=np.uint8)
        pred = np.array([[0, 1], [1, 0]], dtype=np.uint8)
        conf = EvalService.accumulate(ConfusionMatrix(2), pred, gt)
        assert conf.total == 2
        assert EvalService.mean_iou(conf).mean_iou == 1.0

    def test_region_restricts_pixels(self):
        gt = _halves(8)
        region = np.zeros(gt.shape, dtype=bool)
        conf = EvalService.accumulate(ConfusionMatrix(2), gt, gt, region)
        assert conf.total == 0

    def test_empty_matrix(self):
        gt = np.full((3, 3), IGNORE, dtype=np.uint8)
        conf = EvalService.accumulate(ConfusionMatrix(2), np.zeros((3, 3), dtype=np.uint8), gt)
        with pytest.raises(EmptyMatrixException):
            EvalService.mean_iou(conf)

    def test_label_out_of_range(self):
        gt = np.array([[0, 3]], dtype=np.uint8)
        with pytest.raises(LabelOutOfRangeException):
            EvalService.accumulate(ConfusionMatrix(3), np.zeros((1, 2), dtype=np.uint8), gt)

    def test_ignore_in_prediction_raises(self):
        gt = np.array([[0, 1]], dtype=np.uint8)
        pred = np.array([[0, IGNORE]], dtype=np.uint8)
        with pytest.raises(LabelOutOfRangeException):
            EvalService.accumulate(ConfusionMatrix(2), pred, gt)

    def test_ignore_in_prediction_under_ignored_gt(self):
        gt = np.array([[0, IGNORE]], dtype=np.uint8)
        pred = np.array([[0, IGNORE]], dtype=np.uint8)
        conf = EvalService.accumulate(ConfusionMatrix(2), pred, gt)
        assert conf.total == 1

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchException):
            EvalService.accumulate(ConfusionMatrix(2), np.zeros((2, 2)), np.zeros((2, 3)))

    def test_additive_over_images(self, rng):
        preds = [rng.integers(0, 3, size=(6, 7)).astype(np.uint8) for _ in range(5)]
        gts = [rng.integers(0, 3, size=(6, 7)).astype(np.uint8) for _ in range(5)]
        whole = EvalService.confusion(preds, gts, 3)
        parts = EvalService.confusion(preds[:2], gts[:2], 3) + EvalService.confusion(preds[2:], gts[2:], 3)
        assert whole == parts
        assert EvalService.confusion(preds, gts, 3, workers=2) == whole

    def test_count_mismatch(self):
        with pytest.raises(DimensionMismatchException):
            EvalService.confusion([np.zeros((2, 2))], [], 2)


class TestTrimap:
    def test_perfect_prediction(self):
        gt = _halves(8)
        report = EvalService.trimap_eval([gt], [gt], [1, 2, 3], 2)
        assert [row.band_width for row in report.rows] == [1, 2, 3]
        for row in report.rows:
            assert row.boundary_miou == 1.0
            assert row.interior_miou == 1.0

    def test_errors_concentrate_in_band(self):
        gt = _halves(8)
        pred = _halves(9)
        row = EvalService.trimap_eval([pred], [gt], [2], 2).rows[0]
        assert row.boundary_miou < row.interior_miou
        assert row.interior_miou == 1.0

    def test_band_covering_image(self):
        gt = _halves(4, size=8)
        row = EvalService.trimap_eval([gt], [gt], [20], 2).rows[0]
        assert row.boundary_miou == 1.0
        assert row.interior_miou is None

    def test_uniform_ground_truth_has_no_band(self):
        gt = np.zeros((6, 6), dtype=np.uint8)
        row = EvalService.trimap_eval([gt], [gt], [1], 2).rows[0]
        assert row.boundary_miou is None
        assert row.interior_miou == 1.0

    def test_invalid_width(self):
        gt = _halves(8)
        with pytest.raises(ValueError):
            EvalService.trimap_eval([gt], [gt], [0], 2)


class TestSupervisionQuality:
    def test_exact_supervision(self):
        gt = _halves(8)
        assert EvalService.supervision_quality({"a": gt}, {"a": gt}, 2) == 1.0

    def test_unknown_ids_skipped(self):
        gt = _halves(8)
        quality = EvalService.supervision_quality({"a": gt, "b": 1 - gt}, {"a": gt}, 2)
        assert quality == 1.0

    def test_box_around_disk(self):
        size, radius = 64, 20
        yy, xx = np.mgrid[:size, :size] + 0.5
        disk = ((yy - 32) ** 2 + (xx - 32) ** 2 <= radius ** 2).astype(np.uint8)
        rectangle = np.zeros_like(disk)
        rectangle[12:52, 12:52] = 1
        report = EvalService.evaluate([rectangle], [disk], 2)
        assert report.per_class[1] == pytest.approx(math.pi / 4, abs=0.02)


class TestReports:
    def test_iou_report_files(self, tmp_path):
        report = IouReport(per_class=[1.0, None, 0.5], mean_iou=0.75, pixel_count=10)
        path = EvalService.write_iou_report(report, tmp_path, name="eval")
        assert path == tmp_path / "eval.json"
        assert IouReport.model_validate(json.loads(path.read_text())) == report
        lines = (tmp_path / "eval.csv").read_text().splitlines()
        assert lines == ["class,iou", "0,1.000000", "1,", "2,0.500000", "mean,0.750000"]

    def test_trimap_report_files(self, tmp_path):
        report = TrimapReport(
            rows=[
                TrimapRow(band_width=1, boundary_miou=0.5, interior_miou=0.9),
                TrimapRow(band_width=4, boundary_miou=0.7, interior_miou=None),
            ]
        )
        EvalService.write_trimap_report(report, tmp_path)
        assert TrimapReport.model_validate_json((tmp_path / "trimap.json").read_text()) == report
        lines = (tmp_path / "trimap.csv").read_text().splitlines()
        assert lines[0] == "band_width,boundary_miou,interior_miou"
        assert lines[2] == "4,0.700000,"
        svg = (tmp_path / "trimap.svg").read_text()
        assert "<svg" in svg

    def test_chart_reproducible(self, tmp_path):
        report = TrimapReport(rows=[TrimapRow(band_width=1, boundary_miou=0.5, interior_miou=0.9)])
        EvalService.write_trimap_report(report, tmp_path / "a")
        EvalService.write_trimap_report(report, tmp_path / "b")
        assert (tmp_path / "a" / "trimap.svg").read_bytes() == (tmp_path / "b" / "trimap.svg").read_bytes()

    def test_chart_optional(self, tmp_path):
        report = TrimapReport(rows=[TrimapRow(band_width=1, boundary_miou=0.5, interior_miou=0.9)])
        EvalService.write_trimap_report(report, tmp_path, chart=False)
        assert not (tmp_path / "trimap.svg").exists()
