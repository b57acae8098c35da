from __future__ import annotations

from pathlib import Path

import pytest

from splat_contrib.illumsplat.scene import Camera, GaussianCloud
from splat_contrib.illumsplat.synthbench import SynthDataset, write_dataset
from splat_contrib.illumsplat.testing import make_camera, make_cloud, make_tiny_dataset


@pytest.fixture
def camera() -> Camera:
    return make_camera()


@pytest.fixture
def cloud() -> GaussianCloud:
    return make_cloud(12, seed=1)


@pytest.fixture(scope="session")
def tiny_dataset() -> SynthDataset:
    return make_tiny_dataset()


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory: pytest.TempPathFactory, tiny_dataset: SynthDataset) -> Path:
    root = tmp_path_factory.mktemp("dataset")
    write_dataset(root, tiny_dataset)
    return root
