"""Feed-forward ReLU networks, safety properties and the scalar-output augmentation.

Every property is reduced to the sign of one scalar ``y*``: the network output
``y`` is mapped through each linear constraint ``c . y + b`` and the minimum is
taken, so ``y* >= 0`` exactly when every constraint holds.

Dot products go through ``np.einsum`` without BLAS so that each output element
is accumulated in the same order whatever the batch size; ``forward`` and
``forward_batch`` therefore agree bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import Hyperrectangle

RELU = "relu"
LINEAR = "linear"


class ParseError(ValueError):
    """Malformed network or property file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Normalization:
    """NNet-style input/output scaling.

    Inputs are clipped to ``[input_min, input_max]`` then mapped to
    ``(x - input_mean) / input_range``; raw outputs are mapped back with
    ``y * output_range + output_mean``.
    """

    input_min: np.ndarray
    input_max: np.ndarray
    input_mean: np.ndarray
    input_range: np.ndarray
    output_mean: float
    output_range: float

    def __post_init__(self):
        for name in ("input_min", "input_max", "input_mean", "input_range"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "output_mean", float(self.output_mean))
        object.__setattr__(self, "output_range", float(self.output_range))
        if np.any(self.input_range == 0):
            raise ValueError("input range of zero cannot be normalized")

    def __eq__(self, other):
        if not isinstance(other, Normalization):
            return NotImplemented
        return (
            all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("input_min", "input_max", "input_mean", "input_range")
            )
            and self.output_mean == other.output_mean
            and self.output_range == other.output_range
        )


class Network:
    """Layered MLP: ReLU on hidden layers, identity on the last one.

    ``weights[k]`` has shape ``(out_k, in_k)`` so layer ``k`` computes
    ``W @ h + b``. Instances are immutable (arrays are read-only).
    """

    def __init__(
        self,
        weights: Sequence,
        biases: Sequence,
        activations: Sequence[str] | None = None,
        normalization: Normalization | None = None,
    ):
        if len(weights) == 0:
            raise ValueError("network needs at least one layer")
        if len(weights) != len(biases):
            raise ValueError("weights and biases must have the same number of layers")
        ws = tuple(_frozen(w) for w in weights)
        bs = tuple(_frozen(b) for b in biases)
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2:
                raise ValueError(f"layer {k}: weight matrix must be 2-D, got shape {w.shape}")
            if b.shape != (w.shape[0],):
                raise ValueError(f"layer {k}: bias shape {b.shape} does not match {w.shape[0]} outputs")
            if k > 0 and w.shape[1] != ws[k - 1].shape[0]:
                raise ValueError(
                    f"layer {k}: expects {w.shape[1]} inputs but layer {k - 1} has {ws[k - 1].shape[0]} outputs"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: non-finite weight or bias")
        if activations is None:
            activations = [RELU] * (len(ws) - 1) + [LINEAR]
        activations = tuple(activations)
        if len(activations) != len(ws) or any(a not in (RELU, LINEAR) for a in activations):
            raise ValueError(f"bad activation list {activations!r}")
        if normalization is not None and normalization.input_mean.shape != (ws[0].shape[1],):
            raise ValueError("normalization vectors do not match the input size")
        self.weights = ws
        self.biases = bs
        self.activations = activations
        self.normalization = normalization

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [w.shape[0] for w in self.weights]

    def without_normalization(self) -> "Network":
        return Network(self.weights, self.biases, self.activations, None)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            len(self.weights) == len(other.weights)
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
            and self.activations == other.activations
            and self.normalization == other.normalization
        )

    def __repr__(self) -> str:
        norm = ", normalized" if self.normalization is not None else ""
        return f"Network(sizes={self.layer_sizes}{norm})"


def forward_batch(net: Network, xs) -> np.ndarray:
    """Evaluate ``net`` on every row of ``xs`` (shape ``(n, d)``)."""
    h = np.asarray(xs, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != net.input_dim:
        raise ValueError(f"expected inputs of shape (n, {net.input_dim}), got {h.shape}")
    norm = net.normalization
    if norm is not None:
        h = (np.clip(h, norm.input_min, norm.input_max) - norm.input_mean) / norm.input_range
    for w, b, act in zip(net.weights, net.biases, net.activations):
        h = np.einsum("ij,kj->ik", h, w) + b
        if act == RELU:
            h = np.maximum(h, 0.0)
    if norm is not None:
        h = h * norm.output_range + norm.output_mean
    return h


def forward(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise ValueError(f"expected input of length {net.input_dim}, got shape {x.shape}")
    return forward_batch(net, x[None, :])[0]


@dataclass(frozen=True)
class LinearConstraint:
    """Desired behaviour ``coeffs . y + offset >= 0``."""

    coeffs: tuple[float, ...]
    offset: float = 0.0

    def __init__(self, coeffs: Iterable[float], offset: float = 0.0):
        c = tuple(float(v) for v in coeffs)
        if not c or not all(math.isfinite(v) for v in c) or not math.isfinite(offset):
            raise ValueError("constraint needs finite, non-empty coefficients")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "offset", float(offset))


@dataclass(frozen=True)
class SafetyProperty:
    """Input box plus a conjunction of linear output constraints that must all hold."""

    domain: Hyperrectangle
    constraints: tuple[LinearConstraint, ...]

    def __init__(self, domain: Hyperrectangle, constraints: Iterable[LinearConstraint]):
        cs = tuple(constraints)
        if not cs:
            raise ValueError("a property needs at least one constraint")
        if len({len(c.coeffs) for c in cs}) != 1:
            raise ValueError("all constraints must have the same number of coefficients")
        if any(s <= 0 for s in domain.sides):
            raise ValueError("property domain must have positive volume")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "constraints", cs)

    @property
    def output_dim(self) -> int:
        return len(self.constraints[0].coeffs)


def output_positive(domain: Hyperrectangle, output_dim: int = 1, index: int = 0) -> SafetyProperty:
    """Property ``y[index] >= 0`` on ``domain``."""
    coeffs = [0.0] * output_dim
    coeffs[index] = 1.0
    return SafetyProperty(domain, [LinearConstraint(coeffs, 0.0)])


class AugmentedNetwork:
    """Network followed by ``y* = min_i (c_i . y + b_i)``."""

    def __init__(self, base: Network, constraints: Sequence[LinearConstraint]):
        if not constraints:
            raise ValueError("need at least one constraint")
        for c in constraints:
            if len(c.coeffs) != base.output_dim:
                raise ValueError(
                    f"constraint has {len(c.coeffs)} coefficients but network has {base.output_dim} outputs"
                )
        self.base = base
        self.constraints = tuple(constraints)
        self.coeff_matrix = _frozen([c.coeffs for c in constraints])
        self.offsets = _frozen([c.offset for c in constraints])

    @property
    def input_dim(self) -> int:
        return self.base.input_dim

    def evaluate_batch(self, xs) -> np.ndarray:
        y = forward_batch(self.base, xs)
        scores = np.einsum("ij,kj->ik", y, self.coeff_matrix) + self.offsets
        return scores.min(axis=1)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected input of length {self.input_dim}, got shape {x.shape}")
        return float(self.evaluate_batch(x[None, :])[0])

    def to_network(self) -> Network:
        """The single-constraint case as a plain network with one appended linear layer."""
        if len(self.constraints) != 1:
            raise ValueError("only a single constraint is an affine output layer")
        if self.base.normalization is not None:
            raise ValueError("fold normalization out of the base network first")
        acts = self.base.activations[:-1] + (LINEAR, LINEAR)
        return Network(
            self.base.weights + (self.coeff_matrix,),
            self.base.biases + (self.offsets,),
            acts,
        )


def augment(net: Network, prop: SafetyProperty) -> AugmentedNetwork:
    if prop.domain.dim != net.input_dim:
        raise ValueError(f"property domain has {prop.domain.dim} dimensions, network expects {net.input_dim}")
    return AugmentedNetwork(net, prop.constraints)


# ---------------------------------------------------------------------------
# .nnet format


def _numbers(line: str, lineno: int) -> list[float]:
    out = []
    for tok in line.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(float(tok))
        except ValueError:
            raise ParseError(f"non-numeric token {tok!r}", lineno) from None
    return out


def _ints(line: str, lineno: int) -> list[int]:
    vals = _numbers(line, lineno)
    if any(v != int(v) for v in vals):
        raise ParseError("expected integers", lineno)
    return [int(v) for v in vals]


def parse_nnet(text: str) -> Network:
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines())]
    body = [(i, ln) for i, ln in lines if ln.strip() and not ln.lstrip().startswith("//")]
    if len(body) < 7:
        raise ParseError("file too short for the .nnet header", body[-1][0] if body else None)
    it = iter(body)

    lineno, ln = next(it)
    header = _ints(ln, lineno)
    if len(header) < 4:
        raise ParseError("header must list numLayers, inputSize, outputSize, maxLayerSize", lineno)
    num_layers, input_size, output_size = header[:3]
    if num_layers < 1 or input_size < 1 or output_size < 1:
        raise ParseError("layer count and sizes must be positive", lineno)

    lineno, ln = next(it)
    sizes = _ints(ln, lineno)
    if len(sizes) != num_layers + 1:
        raise ParseError(f"expected {num_layers + 1} layer sizes, found {len(sizes)}", lineno)
    if sizes[0] != input_size or sizes[-1] != output_size:
        raise ParseError("layer sizes disagree with declared input/output size", lineno)

    next(it)  # legacy symmetric flag

    def vector(expected: int, what: str) -> list[float]:
        lineno, ln = next(it)
        vals = _numbers(ln, lineno)
        if len(vals) != expected:
            raise ParseError(f"expected {expected} {what}, found {len(vals)}", lineno)
        return vals

    mins = vector(input_size, "input minimums")
    maxes = vector(input_size, "input maximums")
    means = vector(input_size + 1, "means")
    ranges = vector(input_size + 1, "ranges")

    weights, biases = [], []
    try:
        for k in range(num_layers):
            rows = [vector(sizes[k], f"weights in layer {k} row") for _ in range(sizes[k + 1])]
            bias = [vector(1, f"bias value in layer {k}")[0] for _ in range(sizes[k + 1])]
            weights.append(rows)
            biases.append(bias)
    except StopIteration:
        raise ParseError("unexpected end of file while reading layer parameters", lines[-1][0]) from None
    extra = next(it, None)
    if extra is not None:
        raise ParseError("trailing data after the last layer", extra[0])

    norm = Normalization(
        input_min=mins,
        input_max=maxes,
        input_mean=means[:-1],
        input_range=ranges[:-1],
        output_mean=means[-1],
        output_range=ranges[-1],
    )
    return Network(weights, biases, normalization=norm)


def write_nnet(net: Network) -> str:
    """Serialize to .nnet. Networks without normalization get an identity one."""
    if net.activations != tuple([RELU] * (len(net.weights) - 1) + [LINEAR]):
        raise ValueError(".nnet only encodes ReLU-hidden / linear-output networks")
    d = net.input_dim
    norm = net.normalization or Normalization(
        [-np.inf] * d, [np.inf] * d, [0.0] * d, [1.0] * d, 0.0, 1.0
    )
    fmt = lambda vals: ",".join(repr(float(v)) for v in vals) + ","  # noqa: E731
    sizes = net.layer_sizes
    out = [
        "// written by region_prove",
        f"{len(net.weights)},{d},{net.output_dim},{max(sizes)},",
        ",".join(str(s) for s in sizes) + ",",
        "0,",
        fmt(norm.input_min),
        fmt(norm.input_max),
        fmt(list(norm.input_mean) + [norm.output_mean]),
        fmt(list(norm.input_range) + [norm.output_range]),
    ]
    for w, b in zip(net.weights, net.biases):
        out.extend(fmt(row) for row in w)
        out.extend(fmt([v]) for v in b)
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# JSON formats


def _matrix(obj, where: str) -> list[list[float]]:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ParseError(f"{where}: expected a non-empty list of rows")
    width = len(obj[0])
    if width == 0 or any(len(r) != width for r in obj):
        raise ParseError(f"{where}: ragged or empty matrix")
    try:
        return [[float(v) for v in r] for r in obj]
    except (TypeError, ValueError):
        raise ParseError(f"{where}: non-numeric entry") from None


def _vector(obj, where: str) -> list[float]:
    if not isinstance(obj, list):
        raise ParseError(f"{where}: expected a list")
    try:
        return [float(v) for v in obj]
    except (TypeError, ValueError):
        raise ParseError(f"{where}: non-numeric entry") from None


def _load_json(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    return doc


def parse_network_json(text: str) -> Network:
    doc = _load_json(text)
    if "layers" not in doc:
        raise ParseError("missing field 'layers'")
    layers = doc["layers"]
    if not isinstance(layers, list) or not layers:
        raise ParseError("'layers' must be a non-empty list")
    activation = doc.get("activation", "relu-hidden")
    if activation != "relu-hidden":
        raise ParseError(f"unsupported activation scheme {activation!r}")
    weights, biases = [], []
    for k, layer in enumerate(layers):
        if not isinstance(layer, dict) or "weights" not in layer or "bias" not in layer:
            raise ParseError(f"layer {k}: needs 'weights' and 'bias'")
        weights.append(_matrix(layer["weights"], f"layer {k} weights"))
        biases.append(_vector(layer["bias"], f"layer {k} bias"))
    norm = None
    if doc.get("normalization") is not None:
        n = doc["normalization"]
        try:
            norm = Normalization(
                n["input_min"], n["input_max"], n["input_mean"], n["input_range"],
                n["output_mean"], n["output_range"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad normalization block: {exc}") from None
    try:
        return Network(weights, biases, normalization=norm)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def network_to_json(net: Network) -> str:
    doc: dict = {
        "layers": [{"weights": w.tolist(), "bias": b.tolist()} for w, b in zip(net.weights, net.biases)],
        "activation": "relu-hidden",
    }
    if net.normalization is not None:
        n = net.normalization
        doc["normalization"] = {
            "input_min": n.input_min.tolist(),
            "input_max": n.input_max.tolist(),
            "input_mean": n.input_mean.tolist(),
            "input_range": n.input_range.tolist(),
            "output_mean": n.output_mean,
            "output_range": n.output_range,
        }
    return json.dumps(doc)


def load_network(path, normalize: bool = True) -> Network:
    """Read a ``.nnet`` or JSON network file, chosen by extension."""
    path = str(path)
    with open(path) as fh:
        text = fh.read()
    net = parse_nnet(text) if path.endswith(".nnet") else parse_network_json(text)
    return net if normalize else net.without_normalization()


def parse_property_json(text: str) -> SafetyProperty:
    doc = _load_json(text)
    for key in ("domain", "constraints"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    dom = doc["domain"]
    if not isinstance(dom, dict) or "lower" not in dom or "upper" not in dom:
        raise ParseError("domain needs 'lower' and 'upper'")
    cons = doc["constraints"]
    if not isinstance(cons, list) or not cons:
        raise ParseError("'constraints' must be a non-empty list")
    try:
        domain = Hyperrectangle(_vector(dom["lower"], "domain.lower"), _vector(dom["upper"], "domain.upper"))
        constraints = []
        for i, c in enumerate(cons):
            if not isinstance(c, dict) or "coeffs" not in c:
                raise ParseError(f"constraint {i}: missing 'coeffs'")
            constraints.append(LinearConstraint(_vector(c["coeffs"], f"constraint {i}"), float(c.get("offset", 0.0))))
        return SafetyProperty(domain, constraints)
    except ParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from None


def property_to_json(prop: SafetyProperty) -> str:
    return json.dumps(property_to_dict(prop))


def property_to_dict(prop: SafetyProperty) -> dict:
    return {
        "domain": {"lower": list(prop.domain.lower), "upper": list(prop.domain.upper)},
        "constraints": [{"coeffs": list(c.coeffs), "offset": c.offset} for c in prop.constraints],
    }


def load_property(path) -> SafetyProperty:
    with open(path) as fh:
        return parse_property_json(fh.read())
