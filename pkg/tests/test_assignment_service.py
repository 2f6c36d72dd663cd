import json
import math

import numpy as np
import pytest
from scipy.special import log_softmax

from boxsup.models.geometry import BACKGROUND, IGNORE, BinaryMask
from boxsup.models.proposal import ProposalPool
from boxsup.models.sample import Sample
from boxsup.services.assignment_service import AssignmentService
from boxsup.services.geometry_service import GeometryService
from boxsup.utils.exceptions import UnsupervisedSampleException

from tests.conftest import box, random_pool, rect_pixels


def _segment(pixels):
    return ProposalPool.from_masks("img", [pixels])[0]


class TestOverlapCost:
    def test_partial_overlap(self):
        seg = _segment(rect_pixels(0, 0, 10, 7, 12, 12))
        assert AssignmentService.overlap_cost(box(0, 0, 10, 10, 2), seg, 2) == pytest.approx(0.3)

    def test_label_mismatch(self):
        seg = _segment(rect_pixels(0, 0, 10, 7, 12, 12))
        assert AssignmentService.overlap_cost(box(0, 0, 10, 10, 2), seg, 1) == 0.0

    def test_exact_box(self):
        seg = _segment(rect_pixels(3, 2, 9, 8, 12, 12))
        assert AssignmentService.overlap_cost(box(3, 2, 9, 8, 1), seg, 1) == 0.0

    def test_pool_cost_range(self, rng):
        for _ in range(20):
            pool = random_pool(rng, 6)
            labels = rng.integers(0, 3, size=6).tolist()
            cost = AssignmentService.pool_overlap_cost(box(2, 2, 9, 9, 1), pool, labels)
            assert 0.0 <= cost <= 1.0


class TestRegressionCost:
    def test_uniform_scores(self):
        seg = _segment(rect_pixels(2, 2, 6, 6, 10, 10))
        scores = np.zeros((4, 10, 10))
        cost = AssignmentService.regression_cost(scores, box(1, 1, 8, 8, 2), seg)
        assert cost == pytest.approx(math.log(4))

    def test_confident_matching_scores(self):
        seg = _segment(rect_pixels(2, 2, 6, 6, 10, 10))
        target = np.zeros((10, 10), dtype=int)
        target[seg.mask.pixels] = 2
        scores = np.zeros((3, 10, 10))
        np.put_along_axis(scores, target[None], 50.0, axis=0)
        assert AssignmentService.regression_cost(scores, box(1, 1, 8, 8, 2), seg) < 1e-6

    def test_matches_pixel_loop(self, rng):
        scores = rng.normal(size=(3, 16, 16))
        pixels = rng.random((16, 16)) < 0.3
        seg = _segment(pixels)
        b = box(3, 4, 12, 10, 1)
        log_probs = log_softmax(scores, axis=0)
        total, count = 0.0, 0
        for y in range(16):
            for x in range(16):
                in_box = 3 <= x < 12 and 4 <= y < 10
                if pixels[y, x]:
                    total -= log_probs[1, y, x]
                    count += 1
                elif in_box:
                    total -= log_probs[BACKGROUND, y, x]
                    count += 1
        assert AssignmentService.regression_cost(scores, b, seg) == pytest.approx(total / count)

    @pytest.mark.parametrize("region", ["box_union_segment", "segment"])
    def test_vectorized_costs_match(self, rng, region):
        pool = random_pool(rng, 8)
        scores = rng.normal(size=(3, 16, 16))
        b = box(2, 3, 11, 13, 2)
        costs = AssignmentService.candidate_costs(b, pool, scores, 3.0, region=region)
        for cost, seg in zip(costs, pool.segments):
            assert cost.segment_id == seg.id
            assert cost.e_r == pytest.approx(AssignmentService.regression_cost(scores, b, seg, region))
            assert cost.e_o == pytest.approx(AssignmentService.overlap_cost(b, seg, b.label))
            assert cost.combined == pytest.approx(cost.e_o + 3.0 * cost.e_r)


class TestSelectCandidates:
    def test_overlap_only_is_iou_argmax(self, rng):
        for trial in range(100):
            pool = random_pool(rng, int(rng.integers(1, 12)), image_id=f"p{trial}")
            boxes = [box(*sorted_rect(rng), label=1) for _ in range(3)]
            labeling = AssignmentService.select_candidates(boxes, pool, None, 0.0, 1, rng)
            for index, b in enumerate(boxes):
                ious = [GeometryService.box_iou(b.rect, seg.tight_box) for seg in pool.segments]
                best = max(ious)
                expected = min(i for i, v in enumerate(ious) if v == best)
                assert labeling.selections[index] == expected

    def test_single_segment_pool(self, rng):
        pool = random_pool(rng, 1)
        for k in (1, 3, 5):
            labeling = AssignmentService.select_candidates([box(0, 0, 4, 4)], pool, None, 0.0, k, rng)
            assert labeling.selections == {0: 0}

    def test_topk_sampling_stays_in_lowest_k(self, rng):
        pool = random_pool(rng, 12)
        b = box(2, 2, 10, 10)
        costs = AssignmentService.candidate_costs(b, pool, None, 0.0)
        ranked = sorted(range(12), key=lambda i: (costs[i].combined, i))
        chosen = set()
        for seed in range(60):
            labeling = AssignmentService.select_candidates([b], pool, None, 0.0, 5, np.random.default_rng(seed))
            chosen.add(labeling.selections[0])
        assert chosen <= set(ranked[:5])
        assert len(chosen) > 1

    def _margin_pool(self):
        return ProposalPool.from_masks(
            "img",
            [
                rect_pixels(2, 2, 10, 10, 16, 16),
                rect_pixels(2, 2, 11, 10, 16, 16),
                rect_pixels(1, 1, 11, 11, 16, 16),
                rect_pixels(12, 12, 16, 16, 16, 16),
                rect_pixels(0, 12, 4, 16, 16, 16),
            ],
        )

    def test_margin_keeps_draw_near_best(self):
        pool = self._margin_pool()
        chosen = {
            AssignmentService.select_candidates(
                [box(2, 2, 10, 10)], pool, None, 0.0, 5, np.random.default_rng(seed), margin=0.3
            ).selections[0]
            for seed in range(60)
        }
        assert chosen == {0, 1}

    def test_without_margin_draws_whole_top_k(self):
        pool = self._margin_pool()
        chosen = {
            AssignmentService.select_candidates(
                [box(2, 2, 10, 10)], pool, None, 0.0, 5, np.random.default_rng(seed)
            ).selections[0]
            for seed in range(60)
        }
        assert chosen & {3, 4}

    def test_zero_margin_is_winner_takes_all(self, rng):
        pool = random_pool(rng, 12)
        b = box(2, 2, 10, 10)
        winner = AssignmentService.select_candidates([b], pool, None, 0.0, 1, None).selections[0]
        for seed in range(20):
            labeling = AssignmentService.select_candidates(
                [b], pool, None, 0.0, 5, np.random.default_rng(seed), margin=0.0
            )
            chosen = labeling.selections[0]
            costs = AssignmentService.candidate_costs(b, pool, None, 0.0)
            assert costs[chosen].combined == costs[winner].combined

    def test_same_rng_same_selection(self, rng):
        pool = random_pool(rng, 10)
        scores = rng.normal(size=(3, 16, 16))
        boxes = [box(1, 1, 9, 9, 1), box(5, 5, 15, 15, 2)]
        a = AssignmentService.select_candidates(boxes, pool, scores, 3.0, 5, np.random.default_rng(7))
        b = AssignmentService.select_candidates(boxes, pool, scores, 3.0, 5, np.random.default_rng(7))
        assert a.selections == b.selections

    def test_invalid_k(self, rng):
        with pytest.raises(ValueError):
            AssignmentService.select_candidates([], random_pool(rng, 2), None, 0.0, 0, rng)


def sorted_rect(rng, size=16):
    x0, x1 = sorted(rng.choice(size + 1, 2, replace=False))
    y0, y1 = sorted(rng.choice(size + 1, 2, replace=False))
    return int(x0), int(y0), int(x1), int(y1)


class TestComposeSupervision:
    def test_zero_boxes(self, rng):
        pool = random_pool(rng, 3)
        labeling = AssignmentService.select_candidates([], pool, None, 0.0, 1, rng)
        target = AssignmentService.compose_supervision(labeling, [], pool, (16, 16))
        assert (target == BACKGROUND).all()

    def test_single_selection(self):
        pixels = rect_pixels(2, 2, 6, 6, 10, 10)
        pool = ProposalPool.from_masks("img", [pixels])
        labeling = AssignmentService.select_candidates([box(2, 2, 6, 6, 3)], pool, None, 0.0, 1, None)
        target = AssignmentService.compose_supervision(labeling, [box(2, 2, 6, 6, 3)], pool, (10, 10))
        assert (target[pixels] == 3).all()
        assert (target[~pixels] == BACKGROUND).all()

    def test_smaller_box_painted_last(self):
        big = rect_pixels(0, 0, 10, 10, 12, 12)
        small = rect_pixels(6, 6, 11, 11, 12, 12)
        pool = ProposalPool.from_masks("img", [big, small])
        boxes = [box(6, 6, 11, 11, 2), box(0, 0, 10, 10, 1)]
        assert boxes[0].rect.area < boxes[1].rect.area
        labeling = AssignmentService.select_candidates(boxes, pool, None, 0.0, 1, None)
        assert labeling.selections == {0: 1, 1: 0}
        target = AssignmentService.compose_supervision(labeling, boxes, pool, (12, 12))
        assert (target[big & small] == 2).all()
        assert (target[big & ~small] == 1).all()

    def test_labels_come_from_boxes(self, rng):
        for _ in range(20):
            pool = random_pool(rng, 8)
            boxes = [box(*sorted_rect(rng), label=int(rng.integers(1, 5))) for _ in range(3)]
            labeling = AssignmentService.select_candidates(boxes, pool, None, 0.0, 3, rng)
            target = AssignmentService.compose_supervision(labeling, boxes, pool, (16, 16))
            allowed = {BACKGROUND} | {b.label for b in boxes}
            assert set(np.unique(target).tolist()) <= allowed
            assert IGNORE not in target

    def test_recovers_mask_present_in_pool(self, rng):
        instance = np.zeros((16, 16), dtype=bool)
        instance[3:12, 4:10] = True
        instance[3:6, 4:6] = False
        pool = ProposalPool.from_masks("img", [instance, *random_pool(rng, 6).masks])
        b = box(*GeometryService.tight_bbox(BinaryMask(instance)).as_tuple(), label=2)
        labeling = AssignmentService.select_candidates([b], pool, None, 0.0, 1, rng)
        target = AssignmentService.compose_supervision(labeling, [b], pool, (16, 16))
        np.testing.assert_array_equal(target == 2, instance)


class TestTrainingTarget:
    def _sample(self, with_mask, with_boxes, annotation="box"):
        gt = np.zeros((16, 16), dtype=np.uint8)
        gt[2:8, 2:8] = 1
        gt[0, 0] = IGNORE
        return Sample(
            image_id="s",
            image=np.zeros((16, 16, 3)),
            gt_mask=gt if with_mask else None,
            boxes=[box(2, 2, 8, 8, 1)] if with_boxes else None,
            annotation=annotation,
        )

    def test_mask_sample_returns_ground_truth(self):
        sample = self._sample(True, True, annotation="mask")
        target = AssignmentService.training_target(sample)
        assert target is sample.gt_mask

    def test_box_sample_composes(self, rng):
        sample = self._sample(True, True, annotation="box")
        pool = random_pool(rng, 5)
        labeling = AssignmentService.select_candidates(sample.boxes, pool, None, 0.0, 1, rng)
        target = AssignmentService.training_target(sample, labeling, pool)
        expected = AssignmentService.compose_supervision(labeling, sample.boxes, pool, (16, 16))
        np.testing.assert_array_equal(target, expected)

    def test_unsupervised(self):
        with pytest.raises(UnsupervisedSampleException):
            AssignmentService.training_target(self._sample(False, False))

    def test_dump_labeling(self, tmp_path, rng):
        pool = random_pool(rng, 4, image_id="s")
        labeling = AssignmentService.select_candidates([box(0, 0, 8, 8)], pool, None, 0.0, 1, rng)
        path = AssignmentService.dump_labeling(labeling, 3, tmp_path)
        data = json.loads(path.read_text())
        assert path.name == "s.labeling.json"
        assert data["epoch"] == 3
        assert data["selections"] == {"0": labeling.selections[0]}
