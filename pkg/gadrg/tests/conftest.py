import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).resolve().parent))

from gadrg.model import GaDrgModel

# the companion toolkit's bundled fixtures, consumed as plain files
PRIMARY_FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"


@pytest.fixture(autouse=True)
def _single_thread():
    # keeps float trajectories identical across reruns in one process
    torch.set_num_threads(1)


@pytest.fixture
def model() -> GaDrgModel:
    return GaDrgModel.build(seed=0)


def small_batch(model: GaDrgModel, labels=None, edges=None):
    labels = labels or ["Blinky Bill", "Dorothy Wall", "koala"]
    edges = edges if edges is not None else [(0, 1), (0, 2)]
    return model.graph_batch(labels, edges, ["author", "species"][: len(edges)])
