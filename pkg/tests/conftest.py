import math

import numpy as np
import pytest

from poolcert.model import Layer, Network, VerificationQuery

# ---------------------------------------------------------------------------
# Golden four-layer fixture: affine -> relu -> maxpool -> affine, two inputs,
# two logits, all biases zero, queried at x0 = (0, 1) with radius 1 in l-inf.
#
# Reconstruction notes. The documented backsubstitution chain for the upper
# bound of output 2 pins most of the weights: row (1, ~1) for hidden neuron 1
# (its relaxed interval must be [-1, u] with lower slope 1), row (2, -2) for
# hidden neuron 3 (interval [-6, 2], chord 0.25 x + 1.5), pool windows {1, 2}
# and {3, 4} with window-2 runner-up upper bound exactly 1, and output row
# (-1, 1). Under those constraints the analysis forces the second output's
# lower bound to -u where u is hidden neuron 1's upper bound, and the chain
# with an exactly-round first row gives -3.00 rather than the target -2.99;
# the published figures were evidently produced by weights that display
# rounded at two decimals. W1[0, 1] = 0.9965 (displays as 1.0) lands every
# target inside its tolerance simultaneously, and W4[0, 1] = 0.998 then makes
# the first output's upper bound exactly 4.49. Expected analysis results:
#
#   upper row of output 2: (-0.75, -1.2465) + 1.75   (targets -0.75, -1.25, 1.75)
#   outputs: l = (-1, -2.993), u = (4.49, 2.5)       (targets -1, -2.99, 4.49, 2.5)
#   margin for label 0: -1 - 2.5 = -3.5
# ---------------------------------------------------------------------------

GOLDEN_W1 = np.array([
    [1.0, 0.9965],
    [0.5, 0.5],
    [2.0, -2.0],
    [0.5, 0.25],
])
GOLDEN_W4 = np.array([
    [1.0, 0.998],
    [-1.0, 1.0],
])
GOLDEN_X0 = np.array([0.0, 1.0])
GOLDEN_LABEL = 0


def build_golden_network() -> Network:
    return Network(
        layers=(
            Layer.affine(GOLDEN_W1, np.zeros(4)),
            Layer.activation("relu", (4,)),
            Layer.maxpool((2, 1), (2, 1), (4, 1, 1)),
            Layer.affine(GOLDEN_W4, np.zeros(2)),
        ),
        input_shape=(2,),
        num_classes=2,
        name="golden4",
    )


@pytest.fixture(scope="session")
def golden_net() -> Network:
    return build_golden_network()


@pytest.fixture(scope="session")
def golden_query() -> VerificationQuery:
    return VerificationQuery(GOLDEN_X0, GOLDEN_LABEL, math.inf, eps=1.0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def tiny_affine_net(W, b, num_classes=None, name="tiny") -> Network:
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return Network((Layer.affine(W, b),), (W.shape[1],), num_classes or W.shape[0], name)
