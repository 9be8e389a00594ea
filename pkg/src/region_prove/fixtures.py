"""Small hand-built and random networks for tests, demos and benchmarks."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .geometry import Hyperrectangle, unit_box
from .network import LinearConstraint, Network, SafetyProperty, forward_batch, output_positive


def toy_network() -> Network:
    """2-2-1 toy net: ``y = -relu(4x1 - x2) + 7 relu(-2x1 + 3x2)``."""
    return Network([[[4.0, -1.0], [-2.0, 3.0]], [[-1.0, 7.0]]], [[0.0, 0.0], [0.0]])


def toy_two_output_network() -> Network:
    """Two-output toy net whose traces are ``(1,0) -> (-4, 4)`` and ``(0,1) -> (1, 6)``.

    The hidden layer is the one of :func:`toy_network`. The second hidden unit
    feeds ``y1`` with weight 1/3 so that both traces above hold; see
    :func:`toy_two_output_network_as_drawn` for the variant with that weight set to 0.
    """
    return Network([[[4.0, -1.0], [-2.0, 3.0]], [[-1.0, 1.0 / 3.0], [1.0, 2.0]]], [[0.0, 0.0], [0.0, 0.0]])


def toy_two_output_network_as_drawn() -> Network:
    return Network([[[4.0, -1.0], [-2.0, 3.0]], [[-1.0, 0.0], [1.0, 2.0]]], [[0.0, 0.0], [0.0, 0.0]])


def toy_order_property() -> SafetyProperty:
    """``y2 - y1 >= 0`` on the unit square."""
    return SafetyProperty(unit_box(2), [LinearConstraint([-1.0, 1.0], 0.0)])


def constant_network(value: float, d: int = 2) -> Network:
    return Network([np.zeros((1, d))], [[float(value)]])


def halfplane_network(d: int = 2, dim: int = 0, threshold: float = 0.5) -> Network:
    """``y = x[dim] - threshold`` as a single affine layer."""
    w = np.zeros((1, d))
    w[0, dim] = 1.0
    return Network([w], [[-threshold]])


def sliver_network(center: float, width: float, d: int = 2, dim: int = 0) -> Network:
    """``y = |x[dim] - center| - width/2``: negative only on a slab of the given width."""
    w = np.zeros((2, d))
    w[0, dim], w[1, dim] = 1.0, -1.0
    return Network([w, [[1.0, 1.0]]], [[-center, center], [-width / 2.0]])


def box_union_network(boxes: Sequence[Hyperrectangle]) -> Network:
    """ReLU net with ``y >= 0`` exactly on the union of ``boxes``.

    The first layer computes per-box distance penalties
    ``p_b = sum_i relu(l_i - x_i) + relu(x_i - u_i)`` (zero only inside box b);
    subsequent layers take a pairwise minimum tree using
    ``min(a, b) = a - relu(a - b)`` for non-negative ``a``. The output is
    ``-min_b p_b``.
    """
    if not boxes:
        raise ValueError("need at least one box")
    d = boxes[0].dim
    w1, b1 = [], []
    for box in boxes:
        for i in range(d):
            row = np.zeros(d)
            row[i] = -1.0
            w1.append(row.copy())
            b1.append(box.lower[i])
            row[i] = 1.0
            w1.append(row)
            b1.append(-box.upper[i])
    weights, biases = [np.array(w1)], [np.array(b1)]
    width = 2 * d
    # rows of `combo` express each current penalty as a combination of the last hidden layer
    combo = np.zeros((len(boxes), len(b1)))
    for k in range(len(boxes)):
        combo[k, k * width:(k + 1) * width] = 1.0
    while combo.shape[0] > 1:
        rows, nxt = [], []
        for j in range(0, combo.shape[0] - 1, 2):
            a, b = combo[j], combo[j + 1]
            rows.extend([a, a - b])
            nxt.append((len(rows) - 2, len(rows) - 1))
        if combo.shape[0] % 2:
            rows.append(combo[-1])
            nxt.append((len(rows) - 1, None))
        weights.append(np.array(rows))
        biases.append(np.zeros(len(rows)))
        combo = np.zeros((len(nxt), len(rows)))
        for k, (keep, sub) in enumerate(nxt):
            combo[k, keep] = 1.0
            if sub is not None:
                combo[k, sub] = -1.0
    weights.append(-combo)
    biases.append(np.zeros(1))
    return Network(weights, biases)


def random_mlp(
    seed: int,
    d: int = 2,
    hidden: Sequence[int] = (32, 32),
    center: bool = True,
) -> Network:
    """He-initialised ReLU MLP with one output.

    With ``center`` the output bias is shifted by the median output over 4096
    uniform points of ``[0, 1]^d`` so roughly half the unit cube is safe.
    """
    rng = np.random.default_rng(seed)
    sizes = [d, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(rng.normal(0.0, 0.1, size=fan_out))
    net = Network(weights, biases)
    if center:
        shift = float(np.median(forward_batch(net, rng.random((4096, d)))))
        biases[-1] = biases[-1] - shift
        net = Network(weights, biases)
    return net


def unit_square_property() -> SafetyProperty:
    """Output must be non-negative on the unit square."""
    return output_positive(unit_box(2))
