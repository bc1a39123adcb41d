import os
import unittest

import numpy as np

from neuroaps.api.cloud import denormalize_coordinates, region_counts, validate_cloud
from neuroaps.api.dataclasses import (ALLOWED_SIZES, DEFAULT_RATIOS, ClassLabel, PhantomConfig, RegionLabel,
                                      SamplerKind, SamplingBudget)
from neuroaps.api.exceptions import (BudgetException, InvalidInputException, SamplingException,
                                     UsageException)
from neuroaps.controller.phantom_controller import generate_phantom
from neuroaps.controller.sampler_controller import (ablation_sample, allocate_budget, aps_sample, derived_seed,
                                                    extract_boundary, sample_cloud, sample_region, uniform_grid)
from neuroaps.utils.cloud_codec import encode_cloud
from neuroaps.utils.manifest import load_manifest, manifest_digest
from tests.neuroaps_config_fixture import NeuroApsTestCase


def cloud_pixels(cloud, shape):
    cols, rows = denormalize_coordinates(cloud.x.astype(np.float64), cloud.y.astype(np.float64), shape[1], shape[0])
    return np.rint(rows).astype(int), np.rint(cols).astype(int)


def contour_oracle(mask):
    padded = np.pad(mask, 1, constant_values=False)
    inner = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return mask & ~inner


class AllocateBudgetTest(unittest.TestCase):

    def test_default_ratios(self):
        assert allocate_budget(SamplingBudget(DEFAULT_RATIOS, 8192), (500, 500, 500, 500)) == (2048, 2048, 2458,
                                                                                                1638)

    def test_two_regions(self):
        assert allocate_budget(SamplingBudget((0.5, 0.5, 0.0, 0.0), 100), (10, 10, 10, 10)) == (50, 50, 0, 0)

    def test_empty_region_is_redistributed(self):
        assert allocate_budget(SamplingBudget(DEFAULT_RATIOS, 100), (0, 10, 10, 10)) == (0, 33, 40, 27)

    def test_all_regions_empty(self):
        with self.assertRaises(BudgetException):
            allocate_budget(SamplingBudget(DEFAULT_RATIOS, 100), (0, 0, 0, 0))

    def test_only_unbudgeted_regions_available(self):
        assert allocate_budget(SamplingBudget((0.5, 0.5, 0.0, 0.0), 100), (0, 0, 30, 10)) == (0, 0, 75, 25)

    def test_sum_matches_total(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            ratios = rng.dirichlet(np.ones(4))
            ratios = ratios / ratios.sum()
            availability = rng.integers(0, 3, size=4) * rng.integers(1, 1000, size=4)
            if availability.sum() == 0:
                continue
            total = int(rng.integers(1, 10000))
            counts = allocate_budget(SamplingBudget(tuple(ratios), total), availability)
            assert sum(counts) == total
            assert all(c == 0 for c, a in zip(counts, availability) if a == 0)


class BoundaryTest(unittest.TestCase):

    def test_square(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[1:4, 1:4] = True
        boundary = extract_boundary(mask)
        assert len(boundary) == 8
        assert [2, 2] not in boundary.tolist()

    def test_single_pixel(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[2, 3] = True
        assert extract_boundary(mask).tolist() == [[2, 3]]

    def test_image_edge_counts_as_outside(self):
        assert len(extract_boundary(np.ones((4, 4), dtype=bool))) == 12

    def test_row_major_order(self):
        mask = generate_phantom(PhantomConfig(image_size=64), ClassLabel.CN, 0).masks.brain
        boundary = extract_boundary(mask)
        assert boundary.tolist() == sorted(boundary.tolist())

    def test_matches_contour(self):
        mask = generate_phantom(PhantomConfig(), ClassLabel.AD, 0).masks.brain
        assert len(extract_boundary(mask)) == int(contour_oracle(mask).sum())

    def test_empty_mask(self):
        with self.assertRaises(InvalidInputException):
            extract_boundary(np.zeros((5, 5), dtype=bool))


class SampleRegionTest(unittest.TestCase):

    def setUp(self):
        self.candidates = np.array([[r, c] for r in range(2) for c in range(5)])

    def test_all_candidates(self):
        chosen = sample_region(self.candidates, 10, np.random.default_rng(0))
        assert sorted(chosen.tolist()) == sorted(self.candidates.tolist())

    def test_with_replacement(self):
        few = self.candidates[:4]
        chosen = sample_region(few, 10, np.random.default_rng(0))
        assert len(chosen) == 10
        assert {tuple(p) for p in chosen.tolist()} == {tuple(p) for p in few.tolist()}

    def test_deterministic(self):
        a = sample_region(self.candidates, 7, np.random.default_rng(9))
        b = sample_region(self.candidates, 7, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_empty_candidates(self):
        empty = self.candidates[:0]
        assert len(sample_region(empty, 0, np.random.default_rng(0))) == 0
        with self.assertRaises(SamplingException):
            sample_region(empty, 3, np.random.default_rng(0))


class ApsSampleTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.phantom = generate_phantom(PhantomConfig(), ClassLabel.AD, 0)

    def test_allocation_and_size(self):
        masks = self.phantom.masks
        for n in ALLOWED_SIZES:
            budget = SamplingBudget(DEFAULT_RATIOS, n)
            cloud = aps_sample(self.phantom.slice, masks, budget, seed=1)
            assert len(cloud) == n
            assert region_counts(cloud) == allocate_budget(budget, masks.availability())
            assert validate_cloud(cloud, n).ok

    def test_points_lie_in_their_region(self):
        masks = self.phantom.masks
        cloud = aps_sample(self.phantom.slice, masks, SamplingBudget(DEFAULT_RATIOS, 8192), seed=2)
        rows, cols = cloud_pixels(cloud, masks.shape)
        assert masks.brain[rows, cols].all()
        for region in RegionLabel:
            selected = cloud.region == int(region)
            assert masks.mask(region)[rows[selected], cols[selected]].all()

    def test_intensity_is_pixel_value(self):
        cloud = aps_sample(self.phantom.slice, self.phantom.masks, SamplingBudget(DEFAULT_RATIOS, 2048), seed=3)
        rows, cols = cloud_pixels(cloud, self.phantom.masks.shape)
        assert np.array_equal(cloud.intensity, self.phantom.slice.pixels[rows, cols].astype(np.float32))

    def test_density_scaling(self):
        small = region_counts(aps_sample(self.phantom.slice, self.phantom.masks,
                                         SamplingBudget(DEFAULT_RATIOS, 2048), seed=0))
        large = region_counts(aps_sample(self.phantom.slice, self.phantom.masks,
                                         SamplingBudget(DEFAULT_RATIOS, 8192), seed=0))
        for s, l in zip(small, large):
            assert abs(s / 2048 - l / 8192) <= 1.0 / 2048

    def test_deterministic(self):
        budget = SamplingBudget(DEFAULT_RATIOS, 4096)
        a = aps_sample(self.phantom.slice, self.phantom.masks, budget, seed=7)
        b = aps_sample(self.phantom.slice, self.phantom.masks, budget, seed=7)
        c = aps_sample(self.phantom.slice, self.phantom.masks, budget, seed=8)
        assert encode_cloud(a) == encode_cloud(b)
        assert encode_cloud(a) != encode_cloud(c)

    def test_derived_seed(self):
        assert derived_seed(0, "AD-0001-abc") == derived_seed(0, "AD-0001-abc")
        assert derived_seed(0, "AD-0001-abc") != derived_seed(1, "AD-0001-abc")


class AblationSampleTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.phantom = generate_phantom(PhantomConfig(), ClassLabel.CN, 1)

    def test_exact_sizes_inside_brain(self):
        masks = self.phantom.masks
        for kind in SamplerKind:
            for n in ALLOWED_SIZES:
                cloud = ablation_sample(kind, self.phantom.slice, masks, n, seed=0)
                assert len(cloud) == n, (kind, n)
                rows, cols = cloud_pixels(cloud, masks.shape)
                assert masks.brain[rows, cols].all(), (kind, n)

    def test_roi_labels_follow_masks(self):
        masks = self.phantom.masks
        for kind in (SamplerKind.UNIFORM_ROI, SamplerKind.RANDOM_ROI):
            cloud = ablation_sample(kind, self.phantom.slice, masks, 4096, seed=0)
            rows, cols = cloud_pixels(cloud, masks.shape)
            assert np.array_equal(cloud.region, masks.label_map()[rows, cols].astype(np.uint8))

    def test_no_roi_labels_everything_interior(self):
        for kind in (SamplerKind.UNIFORM_NO_ROI, SamplerKind.RANDOM_NO_ROI):
            cloud = ablation_sample(kind, self.phantom.slice, self.phantom.masks, 2048, seed=0)
            assert region_counts(cloud) == (0, 0, 0, 2048)

    def test_aps_oversamples_hippocampus(self):
        aps = ablation_sample(SamplerKind.APS, self.phantom.slice, self.phantom.masks, 8192, seed=0)
        random_roi = ablation_sample(SamplerKind.RANDOM_ROI, self.phantom.slice, self.phantom.masks, 8192, seed=0)
        assert region_counts(aps)[RegionLabel.HIPPOCAMPUS] > region_counts(random_roi)[RegionLabel.HIPPOCAMPUS]

    def test_uniform_grid_row_major(self):
        grid = uniform_grid(self.phantom.masks.brain, 2048)
        assert len(grid) == 2048
        assert grid.tolist() == sorted(grid.tolist())
        assert len({tuple(p) for p in grid.tolist()}) == 2048

    def test_uniform_grid_repeats_on_small_brain(self):
        brain = np.zeros((32, 32), dtype=bool)
        brain[10:20, 10:20] = True
        grid = uniform_grid(brain, 2048)
        assert len(grid) == 2048
        assert brain[grid[:, 0], grid[:, 1]].all()

    def test_ratios_only_for_aps(self):
        with self.assertRaises(UsageException):
            sample_cloud(SamplerKind.UNIFORM_ROI, self.phantom.slice, self.phantom.masks, 2048, 0,
                         ratios=DEFAULT_RATIOS)


class SamplerControllerTest(NeuroApsTestCase):

    def test_sample_writes_clouds(self):
        manifest, cloud_manifest = self.make_clouds("aps", 2048)
        assert cloud_manifest == os.path.join(self.neuroaps.sampler.cloud_dir("aps", 2048), "manifest.yaml")
        records, meta = load_manifest(cloud_manifest)
        assert len(records) == 10
        assert meta["sampler"] == "aps"
        assert meta["n_points"] == 2048
        assert meta["ratios"] == list(DEFAULT_RATIOS)
        pairs, _ = self.neuroaps.sampler.load_clouds(cloud_manifest)
        for record, cloud in pairs:
            assert cloud.class_label == record.label
            assert validate_cloud(cloud, 2048).ok
        assert len(self.neuroaps.sampler.load_clouds(cloud_manifest, split="test")[0]) == 2

    def test_ensure_clouds_reuses_cache(self):
        manifest = self.make_dataset()
        first = self.neuroaps.sampler.ensure_clouds(manifest, SamplerKind.RANDOM_ROI, 2048)
        stamp = os.stat(first).st_mtime_ns
        second = self.neuroaps.sampler.ensure_clouds(manifest, SamplerKind.RANDOM_ROI, 2048)
        assert first == second
        assert os.stat(second).st_mtime_ns == stamp

    def test_ensure_clouds_follows_regenerated_phantoms(self):
        manifest = self.neuroaps.phantom.generate(count_per_class=5, seed=0)
        first = self.neuroaps.sampler.ensure_clouds(manifest, SamplerKind.APS, 2048)
        old_ids = sorted(r.sample_id for r in load_manifest(first)[0])

        assert self.neuroaps.phantom.generate(count_per_class=5, seed=1) == manifest
        new_ids = sorted(r.sample_id for r in load_manifest(manifest)[0])
        assert new_ids != old_ids

        second = self.neuroaps.sampler.ensure_clouds(manifest, SamplerKind.APS, 2048)
        records, meta = load_manifest(second)
        assert sorted(r.sample_id for r in records) == new_ids
        assert meta["source_sha256"] == manifest_digest(manifest)

    def test_svg_scatter(self):
        manifest = self.make_dataset()
        cloud_manifest = self.neuroaps.sampler.sample(manifest, "uniform-roi", 2048, svg=True)
        records, _ = load_manifest(cloud_manifest)
        svg_path = os.path.join(os.path.dirname(cloud_manifest), records[0].sample_id + ".svg")
        with open(svg_path) as f:
            text = f.read()
        assert text.startswith("<svg") or text.startswith("<?xml")
        assert "hippocampus" in text

    def test_ratios_rejected_for_ablation(self):
        manifest = self.make_dataset()
        with self.assertRaises(UsageException):
            self.neuroaps.sampler.sample(manifest, "random", 2048, ratios=DEFAULT_RATIOS)


if __name__ == '__main__':
    unittest.main()
