import unittest

import numpy as np

from neuroaps.api.cloud import denormalize_coordinates, normalize_coordinates, region_counts, validate_cloud
from neuroaps.api.dataclasses import (ClassLabel, LabeledPoint, ModelConfig, PointCloud, RegionLabel, RegionMasks,
                                      RunReport, RunRow, SamplerKind, SamplingBudget, SliceImage)
from neuroaps.api.exceptions import (BudgetException, DataException, DegenerateInputException, FormatException,
                                     InvalidInputException, LengthException, NumericalException, UsageException)


def flat_cloud(n, x=0.0, region=RegionLabel.INTERIOR):
    return PointCloud(np.full(n, x), np.zeros(n), np.full(n, 0.5), np.full(n, int(region)), ClassLabel.CN, "flat")


class CoordinateTest(unittest.TestCase):

    def test_pixel_centers(self):
        x, y = normalize_coordinates(np.array([0, 31.5, 63]), np.array([0, 31.5, 63]), 64, 64)
        assert np.allclose(x, [-0.984375, 0.0, 0.984375], rtol=0, atol=1e-15)
        assert np.array_equal(x, y)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        px = rng.uniform(0, 127, size=500)
        py = rng.uniform(0, 95, size=500)
        x, y = normalize_coordinates(px, py, 128, 96)
        back_x, back_y = denormalize_coordinates(x, y, 128, 96)
        assert np.max(np.abs(back_x - px)) < 1e-12
        assert np.max(np.abs(back_y - py)) < 1e-12

    def test_degenerate_grid(self):
        with self.assertRaises(DegenerateInputException):
            normalize_coordinates(0, 0, 0, 64)


class PointCloudTest(unittest.TestCase):

    def test_valid_cloud(self):
        assert validate_cloud(flat_cloud(2048), 2048).ok

    def test_coordinate_out_of_range(self):
        x = np.zeros(2048)
        x[7] = 1.5
        cloud = flat_cloud(2048).with_columns(x=x)
        result = validate_cloud(cloud, 2048)
        assert not result.ok
        assert [(v.index, v.rule) for v in result.violations] == [(7, "x-range")]

    def test_wrong_size(self):
        result = validate_cloud(flat_cloud(2047), 2048)
        assert [v.rule for v in result.violations] == ["size"]

    def test_columns_are_read_only(self):
        cloud = flat_cloud(16)
        with self.assertRaises(ValueError):
            cloud.x[0] = 0.25

    def test_points_and_counts(self):
        points = [LabeledPoint(0.0, 0.0, 0.5, RegionLabel.HIPPOCAMPUS), LabeledPoint(0.5, -0.5, 1.0,
                                                                                     RegionLabel.SURFACE)]
        cloud = PointCloud.from_points(points, "AD", "pair")
        assert cloud.class_label == ClassLabel.AD
        assert cloud[1].region == RegionLabel.SURFACE
        assert cloud.points == points
        assert region_counts(cloud) == (1, 0, 1, 0)

    def test_mismatched_columns(self):
        with self.assertRaises(InvalidInputException):
            PointCloud(np.zeros(3), np.zeros(2), np.zeros(3), np.zeros(3))

    def test_permutation_keeps_points(self):
        cloud = flat_cloud(4).with_columns(x=[-0.5, 0.0, 0.25, 0.5])
        permuted = cloud.permuted([3, 1, 0, 2])
        assert sorted(permuted.x.tolist()) == sorted(cloud.x.tolist())
        assert permuted != cloud


class SliceAndMasksTest(unittest.TestCase):

    def test_slice_too_small(self):
        with self.assertRaises(DegenerateInputException):
            SliceImage(np.zeros((16, 16)))

    def test_slice_non_finite(self):
        pixels = np.zeros((32, 32))
        pixels[3, 4] = np.nan
        with self.assertRaises(InvalidInputException):
            SliceImage(pixels)

    def test_overlapping_masks_are_reported(self):
        brain = np.ones((4, 4), dtype=bool)
        spot = np.zeros((4, 4), dtype=bool)
        spot[0, 0] = True
        masks = RegionMasks(brain=brain, hippocampus=spot, ventricles=spot, surface=np.zeros_like(brain),
                            interior=brain & ~spot)
        assert "hippocampus and ventricles masks overlap" in masks.check()

    def test_label_map(self):
        brain = np.zeros((4, 4), dtype=bool)
        brain[1:3, 1:3] = True
        hippocampus = np.zeros_like(brain)
        hippocampus[1, 1] = True
        empty = np.zeros_like(brain)
        masks = RegionMasks(brain=brain, hippocampus=hippocampus, ventricles=empty, surface=empty,
                            interior=brain & ~hippocampus)
        labels = masks.label_map()
        assert labels[0, 0] == -1
        assert labels[1, 1] == int(RegionLabel.HIPPOCAMPUS)
        assert labels[2, 2] == int(RegionLabel.INTERIOR)
        assert masks.availability() == (1, 0, 0, 3)
        assert masks.check() == []


class ConfigTypesTest(unittest.TestCase):

    def test_budget_ratios_must_sum_to_one(self):
        with self.assertRaises(BudgetException):
            SamplingBudget((0.5, 0.5, 0.5, 0.0), 100)

    def test_budget_needs_four_ratios(self):
        with self.assertRaises(BudgetException):
            SamplingBudget((0.5, 0.5), 100)

    def test_model_config_head_must_match_fusion(self):
        with self.assertRaises(InvalidInputException):
            ModelConfig(head_dims=(256, 2))

    def test_class_label_parse(self):
        assert ClassLabel.parse("ad") == ClassLabel.AD
        assert ClassLabel.parse(0) == ClassLabel.CN
        with self.assertRaises(InvalidInputException):
            ClassLabel.parse("mci")
        with self.assertRaises(InvalidInputException):
            ClassLabel.parse(7)

    def test_sampler_kinds(self):
        assert [str(k) for k in SamplerKind] == ["aps", "uniform-roi", "uniform", "random-roi", "random"]
        assert [k for k in SamplerKind if k.uses_roi] == [SamplerKind.APS, SamplerKind.UNIFORM_ROI,
                                                          SamplerKind.RANDOM_ROI]


class RunReportTest(unittest.TestCase):

    def row(self, variant, n, seed, accuracy=0.5):
        return RunRow(variant, n, seed, accuracy, 1.5, 1024)

    def test_duplicate_rows_rejected(self):
        report = RunReport()
        report.add(self.row(SamplerKind.APS, 2048, 0))
        with self.assertRaises(InvalidInputException):
            report.add(self.row(SamplerKind.APS, 2048, 0, 0.9))

    def test_sorted_order(self):
        report = RunReport()
        report.add(self.row(SamplerKind.RANDOM_NO_ROI, 2048, 0))
        report.add(self.row(SamplerKind.APS, 4096, 1))
        report.add(self.row(SamplerKind.APS, 2048, 1))
        report.add(self.row(SamplerKind.APS, 2048, 0))
        keys = [(r.variant, r.n_points, r.seed) for r in report.sorted().rows]
        assert keys == [(SamplerKind.APS, 2048, 0), (SamplerKind.APS, 2048, 1), (SamplerKind.APS, 4096, 1),
                        (SamplerKind.RANDOM_NO_ROI, 2048, 0)]

    def test_summary(self):
        report = RunReport()
        report.add(self.row(SamplerKind.APS, 2048, 0, 0.5))
        report.add(self.row(SamplerKind.APS, 2048, 1, 0.7))
        summary = report.summary()
        assert len(summary) == 1
        assert summary.loc[0, "runs"] == 2
        assert abs(summary.loc[0, "accuracy_mean"] - 0.6) < 1e-12
        assert abs(summary.loc[0, "accuracy_std"] - np.sqrt(0.02)) < 1e-12

    def test_row_validation(self):
        with self.assertRaises(InvalidInputException):
            RunRow(SamplerKind.APS, 2048, 0, 1.5, 1.0, 0)
        with self.assertRaises(InvalidInputException):
            RunRow(SamplerKind.APS, 2048, 0, 0.5, 0.0, 0)


class ExceptionTest(unittest.TestCase):

    def test_exit_codes(self):
        assert UsageException("x").exit_code == 2
        assert DataException("x").exit_code == 3
        assert LengthException("x").exit_code == 3
        assert NumericalException("x").exit_code == 4
        assert issubclass(LengthException, FormatException)
        assert LengthException.code == "length"


if __name__ == '__main__':
    unittest.main()
