import numpy as np
import pytest

from boxsup.models.geometry import IGNORE, BinaryMask, decode_rle, encode_rle
from boxsup.services.geometry_service import GeometryService
from boxsup.utils.exceptions import BadRLEException, DimensionMismatchException, EmptyMaskException

from tests.conftest import rect, rect_pixels


def _random_rect(rng, size=20):
    x0, x1 = sorted(rng.choice(size + 1, 2, replace=False))
    y0, y1 = sorted(rng.choice(size + 1, 2, replace=False))
    return rect(int(x0), int(y0), int(x1), int(y1))


class TestBoxArea:
    def test_half_open_extent(self):
        assert GeometryService.box_area(rect(2, 3, 9, 7)) == 28

    def test_matches_rasterized_rect(self, rng):
        for _ in range(50):
            r = _random_rect(rng)
            assert GeometryService.box_area(r) == GeometryService.rect_to_mask(r, 20, 20).sum()


class TestBoxIou:
    def test_identity(self):
        a = rect(2, 3, 9, 7)
        assert GeometryService.box_iou(a, a) == 1.0

    def test_disjoint(self):
        assert GeometryService.box_iou(rect(0, 0, 4, 4), rect(4, 0, 8, 4)) == 0.0

    def test_half_overlap(self):
        assert GeometryService.box_iou(rect(0, 0, 10, 10), rect(5, 0, 15, 10)) == pytest.approx(50 / 150)

    def test_matches_pixel_counting(self, rng):
        for _ in range(1000):
            a, b = _random_rect(rng), _random_rect(rng)
            pa = rect_pixels(*a.as_tuple(), 20, 20)
            pb = rect_pixels(*b.as_tuple(), 20, 20)
            expected = (pa & pb).sum() / (pa | pb).sum()
            assert GeometryService.box_iou(a, b) == expected
            assert GeometryService.box_iou(b, a) == expected

    def test_many_matches_single(self, rng):
        a = _random_rect(rng)
        others = [_random_rect(rng) for _ in range(50)]
        boxes = np.array([o.as_tuple() for o in others])
        expected = [GeometryService.box_iou(a, o) for o in others]
        np.testing.assert_array_equal(GeometryService.box_iou_many(a, boxes), expected)


class TestTightBbox:
    def test_full_mask(self):
        assert GeometryService.tight_bbox(BinaryMask(np.ones((5, 7), dtype=bool))) == rect(0, 0, 7, 5)

    def test_single_pixel(self):
        pixels = np.zeros((10, 10), dtype=bool)
        pixels[4, 3] = True
        assert GeometryService.tight_bbox(BinaryMask(pixels)) == rect(3, 4, 4, 5)

    def test_l_shape(self):
        pixels = np.zeros((12, 12), dtype=bool)
        pixels[2:9, 3] = True
        pixels[8, 3:10] = True
        tight = GeometryService.tight_bbox(BinaryMask(pixels))
        ys, xs = np.nonzero(pixels)
        assert tight == rect(xs.min(), ys.min(), xs.max() + 1, ys.max() + 1)
        assert GeometryService.rect_to_mask(tight, 12, 12)[pixels].all()
        assert GeometryService.box_iou(tight, tight) == 1.0

    def test_empty_mask(self):
        with pytest.raises(EmptyMaskException):
            GeometryService.tight_bbox(BinaryMask.empty(4, 4))


class TestMaskIou:
    def test_identical(self):
        mask = BinaryMask(rect_pixels(1, 1, 5, 5, 8, 8))
        assert GeometryService.mask_iou(mask, mask) == 1.0

    def test_disjoint(self):
        a = BinaryMask(rect_pixels(0, 0, 4, 8, 8, 8))
        b = BinaryMask(rect_pixels(4, 0, 8, 8, 8, 8))
        assert GeometryService.mask_iou(a, b) == 0.0

    def test_both_empty(self):
        assert GeometryService.mask_iou(BinaryMask.empty(4, 4), BinaryMask.empty(4, 4)) == 1.0

    def test_matches_pixel_counting(self, rng):
        for _ in range(200):
            pa = rng.random((32, 32)) < 0.4
            pb = rng.random((32, 32)) < 0.4
            expected = (pa & pb).sum() / (pa | pb).sum()
            assert GeometryService.mask_iou(BinaryMask(pa), BinaryMask(pb)) == expected

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchException):
            GeometryService.mask_iou(BinaryMask.empty(4, 4), BinaryMask.empty(5, 4))


class TestTrimapPartition:
    def test_uniform_map(self):
        part = GeometryService.trimap_partition(np.ones((8, 8), dtype=np.uint8), 3)
        assert part.boundary.area == 0
        assert part.interior.area == 64

    def test_zero_width(self):
        gt = np.zeros((8, 8), dtype=np.uint8)
        gt[:, 4:] = 1
        part = GeometryService.trimap_partition(gt, 0)
        assert part.boundary.area == 0
        assert part.interior.area == 64

    def test_split_width_one(self):
        gt = np.zeros((8, 8), dtype=np.uint8)
        gt[:, 4:] = 1
        part = GeometryService.trimap_partition(gt, 1)
        expected = np.zeros((8, 8), dtype=bool)
        expected[:, 3:5] = True
        np.testing.assert_array_equal(part.boundary.pixels, expected)

    @pytest.mark.parametrize("width", [1, 2, 3, 5])
    def test_matches_chebyshev_oracle(self, rng, width):
        gt = rng.integers(0, 3, size=(12, 12)).astype(np.uint8)
        gt[rng.random((12, 12)) < 0.1] = IGNORE
        valid = gt != IGNORE
        seeds = []
        for y in range(12):
            for x in range(12):
                for dy, dx in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < 12 and 0 <= nx < 12 and valid[y, x] and valid[ny, nx] and gt[y, x] != gt[ny, nx]:
                        seeds.append((y, x))
        expected = np.zeros((12, 12), dtype=bool)
        for y in range(12):
            for x in range(12):
                if valid[y, x]:
                    expected[y, x] = any(max(abs(y - sy), abs(x - sx)) <= width - 1 for sy, sx in seeds)
        part = GeometryService.trimap_partition(gt, width)
        np.testing.assert_array_equal(part.boundary.pixels, expected)

    def test_partition_is_exhaustive(self, rng):
        for width in range(0, 6):
            gt = rng.integers(0, 4, size=(10, 14)).astype(np.uint8)
            gt[rng.random((10, 14)) < 0.2] = IGNORE
            part = GeometryService.trimap_partition(gt, width)
            assert not (part.boundary.pixels & part.interior.pixels).any()
            np.testing.assert_array_equal(part.boundary.pixels | part.interior.pixels, gt != IGNORE)


class TestRle:
    def test_round_trip(self, rng):
        for _ in range(50):
            h, w = rng.integers(1, 20, size=2)
            pixels = rng.random((h, w)) < 0.5
            runs = encode_rle(pixels)
            np.testing.assert_array_equal(decode_rle(int(w), int(h), runs), pixels)
            assert sum(runs[1::2]) == pixels.sum()

    def test_known_runs(self):
        pixels = np.array([[0, 1, 1], [1, 0, 0]], dtype=bool)
        assert encode_rle(pixels) == [1, 3]
        assert BinaryMask.from_rle(3, 2, [1, 3]) == BinaryMask(pixels)

    @pytest.mark.parametrize(
        "runs",
        [[0], [0, 0], [-1, 2], [0, 3, 2, 1], [5, 4], [2, 1, 1, 1]],
    )
    def test_invalid_runs(self, runs):
        with pytest.raises(BadRLEException):
            decode_rle(3, 2, runs)
