import numpy as np
import pytest
import torch

from cpmask.schema import TrainConfig
from cpmask.shapesdata import generate_dataset, load_dataset


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("shapes")
    generate_dataset(seed=3, n_train=16, n_val=8, height=64, width=64, out_dir=str(out))
    return str(out)


@pytest.fixture(scope="session")
def dataset(dataset_dir):
    return load_dataset(dataset_dir)


@pytest.fixture
def tiny_config():
    return TrainConfig(
        channels=8,
        roi_size=7,
        mask_size=14,
        batch_images=2,
        warmup_iters=2,
        total_iters=6,
        box_jitter=0.05,
        finetune_iters=3,
        log_every=1,
        seed=0
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)
