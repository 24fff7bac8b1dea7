"""Seeded random networks and queries for soundness and comparison runs.

Each generated network stacks 2 to 4 weight/activation/pool stages, stays
under 32 neurons per layer, contains at least one maxpool, and ends in an
affine logit layer. Activations cycle through relu, sigmoid and tanh so every
kind is represented across a suite. Weights are scaled to keep logits in a
range where certification is neither trivial nor hopeless.
"""
from __future__ import annotations

import math

import numpy as np

from .model import Layer, Network, VerificationQuery

SUITE_SIZE = 50
_ACTIVATIONS = ("relu", "sigmoid", "tanh")


def random_network(seed: int, activation: str | None = None) -> Network:
    rng = np.random.default_rng(seed)
    act = activation or _ACTIVATIONS[seed % len(_ACTIVATIONS)]
    num_classes = int(rng.integers(2, 5))

    variant = seed % 3
    layers: list[Layer] = []
    if variant == 0:
        # conv -> act -> pool -> flatten -> logits
        h = w = int(rng.integers(3, 5))
        c = 1
        oc = int(rng.integers(1, 3))
        filters = rng.normal(scale=0.8, size=(oc, c, 2, 2))
        conv = Layer.conv2d(filters, rng.normal(scale=0.3, size=oc), 1, 0, (h, w, c))
        layers.append(conv)
        layers.append(Layer.activation(act, conv.output_shape))
        pool = Layer.maxpool((2, 2), (1, 1), conv.output_shape)
        layers.append(pool)
        layers.append(Layer.flatten(pool.output_shape))
        width = layers[-1].size_out
        input_shape = (h, w, c)
    else:
        # affine -> act -> pool over the flat vector [-> act]
        n_in = int(rng.integers(3, 9))
        width = int(rng.integers(4, 17)) * 2  # even so a (2, 1) pool tiles it
        layers.append(Layer.affine(rng.normal(scale=0.7, size=(width, n_in)),
                                   rng.normal(scale=0.3, size=width), (n_in,)))
        layers.append(Layer.activation(act, (width,)))
        pool = Layer.maxpool((2, 1), (2, 1), (width, 1, 1))
        layers.append(pool)
        width = pool.size_out
        input_shape = (n_in,)
        if variant == 2:
            layers.append(Layer.flatten(pool.output_shape))
            mid = int(rng.integers(4, 13))
            layers.append(Layer.affine(rng.normal(scale=0.7, size=(mid, width)),
                                       rng.normal(scale=0.3, size=mid), (width,)))
            layers.append(Layer.activation(act, (mid,)))
            width = mid

    layers.append(Layer.affine(rng.normal(scale=0.7, size=(num_classes, width)),
                               rng.normal(scale=0.3, size=num_classes),
                               layers[-1].output_shape))
    return Network(tuple(layers), input_shape, num_classes, name=f"suite-{seed}-{act}")


def random_query(net: Network, seed: int, norm: float = math.inf) -> VerificationQuery:
    """A center in the pixel domain labeled by the network's own prediction,
    so the center is correctly classified by construction."""
    from .oracle import forward_eval

    rng = np.random.default_rng(seed ^ 0x5EED)
    x0 = rng.uniform(0.1, 0.9, size=net.input_size)
    label = int(forward_eval(net, x0)[0].argmax())
    return VerificationQuery(x0, label, norm)


def random_suite(count: int = SUITE_SIZE, base_seed: int = 0):
    """(network, query) pairs covering all activation kinds."""
    pairs = []
    for k in range(count):
        net = random_network(base_seed * 1000 + k)
        pairs.append((net, random_query(net, base_seed * 1000 + k)))
    return pairs
