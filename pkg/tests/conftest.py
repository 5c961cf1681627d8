import numpy as np
import pytest

from graphcoarsen import WeightedGraph
from graphcoarsen.experiments import build_problem

# canonical high-contrast channel analogue with perforations, desk scale
CHANNEL_HOLES = "0.2,0.2,0.06;0.8,0.2,0.06;0.3,0.75,0.06;0.7,0.8,0.06;0.15,0.55,0.05"


@pytest.fixture
def path3():
    return WeightedGraph.build(3, [(0, 1, 1.0), (1, 2, 1.0)],
                               coords=np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))


@pytest.fixture(scope="session")
def channel_problem():
    """16x16 channel problem with holes: small but structurally complete."""
    return build_problem({
        "family": "fem", "nx": "16", "ny": "16", "contrast": "1e4",
        "holes": "0.25,0.25,0.08;0.7,0.75,0.08",
    })
