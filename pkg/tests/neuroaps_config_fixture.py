import os
import shutil
import tempfile
import unittest

from neuroaps.configFolder import ConfigFolder
from neuroaps.neuroaps import NeuroAps


class NeuroApsTestCase(unittest.TestCase):
    """Each test gets its own copy of neuroaps-test-config in a temporary folder."""

    def setUp(self):
        self.workspace = tempfile.mkdtemp(prefix="neuroaps-test-")
        self.config_folder = self.configuration()
        self.config_folder.create_folders()
        self.neuroaps = NeuroAps(self.config_folder)

    def tearDown(self):
        shutil.rmtree(self.workspace, ignore_errors=True)

    def configuration(self):
        test_directory = os.path.dirname(__file__)
        test_config_directory = os.path.join(test_directory, 'neuroaps-test-config')
        path = os.path.join(self.workspace, "config")
        shutil.copytree(test_config_directory, path)
        return ConfigFolder(path)

    def make_dataset(self, count_per_class=5, size=None):
        return self.neuroaps.phantom.generate(count_per_class=count_per_class, size=size)

    def make_clouds(self, kind="aps", n_points=2048, count_per_class=5):
        manifest = self.make_dataset(count_per_class)
        return manifest, self.neuroaps.sampler.sample(manifest, kind, n_points)
