"""Information-constrained channels: construction, validation, evaluation.

A channel is a Markov kernel from an input space to a finite, ordered
output alphabet. Finite-input channels carry an explicit row-stochastic
table; real-vector-input channels carry a response map applied to a single
declared coordinate (the only continuous case needed here), and their
expectations are taken by Gauss-Hermite quadrature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidParameterError, UnsupportedOperationError
from .quadrature import DEFAULT_NODES, gh_rule

ROW_SUM_TOL = 1e-12
_LDP_RTOL = 1e-12


@dataclass(frozen=True)
class ConstraintSpec:
    """Constraint metadata: a bit budget, an LDP level, or nothing."""

    kind: str  # "comm" | "ldp" | "unconstrained"
    bits: int | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.kind == "comm":
            if self.bits is None or self.bits < 1 or int(self.bits) != self.bits:
                raise InvalidParameterError(f"comm constraint needs integer bits >= 1, got {self.bits}")
        elif self.kind == "ldp":
            if self.eps is None or not self.eps > 0:
                raise InvalidParameterError(f"ldp constraint needs eps > 0, got {self.eps}")
        elif self.kind != "unconstrained":
            raise InvalidParameterError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def comm(cls, bits: int) -> "ConstraintSpec":
        return cls("comm", bits=int(bits))

    @classmethod
    def ldp(cls, eps: float) -> "ConstraintSpec":
        return cls("ldp", eps=float(eps))

    @classmethod
    def unconstrained(cls) -> "ConstraintSpec":
        return cls("unconstrained")

    def to_dict(self) -> dict:
        if self.kind == "comm":
            return {"kind": "comm", "bits": self.bits}
        if self.kind == "ldp":
            return {"kind": "ldp", "eps": self.eps}
        return {"kind": "unconstrained"}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintSpec":
        return cls(d["kind"], bits=d.get("bits"), eps=d.get("eps"))


@dataclass(frozen=True, eq=False)
class Channel:
    """A Markov kernel with a finite output alphabet.

    Exactly one of (inputs, input_dim) is set. For finite inputs, `kernel`
    is a (|X|, |Y|) row-stochastic array; for real-vector inputs it is a
    map from the declared coordinate's value to a probability vector.
    """

    outputs: tuple
    inputs: tuple | None = None
    input_dim: int | None = None
    kernel: np.ndarray | Callable = None
    coordinate: int | None = None  # which coordinate a real-input channel reads
    # exact E[row | coordinate ~ N(mean, 1)], for responses quadrature handles
    # poorly (indicators); smooth responses fall back to Gauss-Hermite
    expect_response: Callable | None = None
    constraints: tuple[ConstraintSpec, ...] = ()
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.outputs) == 0:
            raise InvalidParameterError("output alphabet must be nonempty")
        if len(set(self.outputs)) != len(self.outputs):
            raise InvalidParameterError("output alphabet has duplicate symbols")
        if (self.inputs is None) == (self.input_dim is None):
            raise InvalidParameterError("exactly one of inputs/input_dim must be given")
        if self.inputs is not None:
            kernel = np.asarray(self.kernel, dtype=float)
            if kernel.shape != (len(self.inputs), len(self.outputs)):
                raise InvalidParameterError(
                    f"kernel shape {kernel.shape} does not match ({len(self.inputs)}, {len(self.outputs)})"
                )
            if np.any(kernel < 0):
                raise InvalidParameterError("kernel has negative entries")
            row_sums = kernel.sum(axis=1)
            if np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
                raise InvalidParameterError("kernel rows must sum to 1 within 1e-12")
            kernel.setflags(write=False)
            object.__setattr__(self, "kernel", kernel)
            object.__setattr__(self, "_index", {x: i for i, x in enumerate(self.inputs)})
        else:
            if not callable(self.kernel):
                raise InvalidParameterError("real-input channels need a callable response map")
            if self.coordinate is None or not 0 <= self.coordinate < self.input_dim:
                raise InvalidParameterError("real-input channels must declare the coordinate they read")

    @property
    def is_finite(self) -> bool:
        return self.inputs is not None

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def input_index(self, x) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise DomainError(f"input {x!r} not in channel input space") from None

    def row(self, x) -> np.ndarray:
        """Output distribution for a single input."""
        if self.is_finite:
            return self.kernel[self.input_index(x)]
        t = np.asarray(x, dtype=float).reshape(-1)[self.coordinate]
        p = np.asarray(self.kernel(t), dtype=float)
        if p.shape != (self.n_outputs,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise InvalidParameterError("response map returned an invalid probability vector")
        return p


def make_rr_channel(eps: float) -> Channel:
    """Binary randomized response on {-1,+1}: forward w.p. e^eps/(1+e^eps)."""
    if not eps > 0:
        raise InvalidParameterError(f"randomized response needs eps > 0, got {eps}")
    bias = math.exp(eps) / (1.0 + math.exp(eps))
    kernel = np.array([[bias, 1.0 - bias], [1.0 - bias, bias]])
    return Channel(
        outputs=(-1, 1),
        inputs=(-1, 1),
        kernel=kernel,
        constraints=(ConstraintSpec.ldp(eps), ConstraintSpec.comm(1)),
    )


def make_rr_limit_channel() -> Channel:
    """The eps -> 0 limit of randomized response: output independent of input.

    Testing helper only; zero privacy budget is not a valid LDP tag.
    """
    kernel = np.full((2, 2), 0.5)
    return Channel(outputs=(-1, 1), inputs=(-1, 1), kernel=kernel, constraints=(ConstraintSpec.comm(1),))


def rr_bias(eps: float) -> float:
    """Forwarding probability of randomized response, e^eps/(1+e^eps)."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be > 0, got {eps}")
    return math.exp(eps) / (1.0 + math.exp(eps))


def make_subset_forward_channel(indices: Sequence[int], dim: int) -> Channel:
    """Deterministic channel sending the tuple (x_j)_{j in indices}, 0-based.

    Input space is {-1,+1}^dim; the output alphabet has 2^|indices| symbols,
    so the message costs exactly |indices| bits.
    """
    import itertools

    indices = tuple(indices)
    if len(indices) == 0:
        raise InvalidParameterError("subset-forward channel needs a nonempty index set")
    if len(set(indices)) != len(indices):
        raise InvalidParameterError("index set has duplicates")
    if any(j < 0 or j >= dim for j in indices):
        raise InvalidParameterError(f"indices must lie in [0, {dim})")
    inputs = tuple(itertools.product((-1, 1), repeat=dim))
    outputs = tuple(itertools.product((-1, 1), repeat=len(indices)))
    out_pos = {y: iy for iy, y in enumerate(outputs)}
    kernel = np.zeros((len(inputs), len(outputs)))
    for ix, x in enumerate(inputs):
        kernel[ix, out_pos[tuple(x[j] for j in indices)]] = 1.0
    return Channel(
        outputs=outputs,
        inputs=inputs,
        kernel=kernel,
        constraints=(ConstraintSpec.comm(len(indices)),),
    )


def identity_channel(symbols: Sequence) -> Channel:
    """Lossless channel: y = x."""
    symbols = tuple(symbols)
    return Channel(outputs=symbols, inputs=symbols, kernel=np.eye(len(symbols)))


def constant_channel(symbols: Sequence, out_dist: Sequence[float] | None = None,
                     n_outputs: int | None = None) -> Channel:
    """Channel whose output distribution ignores the input."""
    symbols = tuple(symbols)
    if out_dist is None:
        n_outputs = n_outputs or 1
        out_dist = np.full(n_outputs, 1.0 / n_outputs)
    out_dist = np.asarray(out_dist, dtype=float)
    kernel = np.tile(out_dist, (len(symbols), 1))
    return Channel(outputs=tuple(range(len(out_dist))), inputs=symbols, kernel=kernel)


def make_coordinate_channel(dim: int, coordinate: int, response: Callable,
                            outputs: Sequence, constraints: Sequence[ConstraintSpec] = (),
                            expect_response: Callable | None = None) -> Channel:
    """Real-vector-input channel applying `response` to one coordinate.

    `response` maps a scalar to a probability vector over `outputs`.
    """
    return Channel(
        outputs=tuple(outputs),
        input_dim=dim,
        kernel=response,
        coordinate=coordinate,
        expect_response=expect_response,
        constraints=tuple(constraints),
    )


def make_sign_channel(dim: int, coordinate: int) -> Channel:
    """Sends sign(x_c) as one bit (ties broken toward +1)."""

    def response(t: float) -> np.ndarray:
        return np.array([1.0, 0.0]) if t < 0 else np.array([0.0, 1.0])

    def expect_response(mean: float) -> np.ndarray:
        p_plus = 0.5 * (1.0 + math.erf(mean / math.sqrt(2.0)))
        return np.array([1.0 - p_plus, p_plus])

    return make_coordinate_channel(dim, coordinate, response, outputs=(-1, 1),
                                   constraints=(ConstraintSpec.comm(1),),
                                   expect_response=expect_response)


def ldp_ratio(ch: Channel) -> float:
    """sup over outputs y and input pairs of K[x1][y] / K[x2][y].

    Returns +inf when some output is reachable from one input but has
    probability zero under another. The channel satisfies eps-LDP iff the
    result is <= e^eps.
    """
    if not ch.is_finite:
        raise UnsupportedOperationError("ldp_ratio needs a finite input space")
    worst = 1.0
    for y in range(ch.n_outputs):
        col = ch.kernel[:, y]
        hi = float(col.max())
        lo = float(col.min())
        if hi == 0.0:
            continue
        if lo == 0.0:
            return math.inf
        worst = max(worst, hi / lo)
    return worst


def comm_bits(ch: Channel) -> int:
    """Bits needed to index the output alphabet: ceil(log2 |Y|)."""
    return max(1, math.ceil(math.log2(ch.n_outputs)))


def satisfies_constraint(ch: Channel, spec: ConstraintSpec) -> bool:
    if spec.kind == "unconstrained":
        return True
    if spec.kind == "comm":
        return ch.n_outputs <= 2 ** spec.bits
    ratio = ldp_ratio(ch)
    bound = math.exp(spec.eps)
    return ratio <= bound * (1.0 + _LDP_RTOL) + _LDP_RTOL


def validate_tags(ch: Channel) -> None:
    """Raise unless the channel satisfies every constraint it is tagged with."""
    for spec in ch.constraints:
        if not satisfies_constraint(ch, spec):
            raise InvalidParameterError(f"channel violates its {spec.kind} tag {spec}")


def output_dist(ch: Channel, p) -> np.ndarray:
    """Distribution over Y induced by input distribution p: y -> E_P[W(y|X)].

    For finite channels, `p` is a probability vector aligned with
    ch.inputs (or a dict over input symbols). For coordinate channels,
    `p` must be a SphericalGaussian instance; the expectation is taken by
    Gauss-Hermite quadrature over the declared coordinate.
    """
    if ch.is_finite:
        if isinstance(p, dict):
            vec = np.zeros(len(ch.inputs))
            for x, w in p.items():
                vec[ch.input_index(x)] = w
        else:
            vec = np.asarray(p, dtype=float)
            if vec.shape != (len(ch.inputs),):
                raise UnsupportedOperationError(
                    f"distribution of length {vec.shape} does not match {len(ch.inputs)} inputs"
                )
        if np.any(vec < -1e-15) or abs(vec.sum() - 1.0) > 1e-10:
            raise InvalidParameterError("input distribution must be a probability vector")
        out = vec @ ch.kernel
    else:
        from .families import SphericalGaussian

        if not isinstance(p, SphericalGaussian):
            raise UnsupportedOperationError(
                "real-input channels take a SphericalGaussian input distribution"
            )
        mean = p.mean[ch.coordinate]
        if ch.expect_response is not None:
            out = np.asarray(ch.expect_response(mean), dtype=float)
        else:
            x, w = gh_rule(DEFAULT_NODES)
            out = np.zeros(ch.n_outputs)
            for xi, wi in zip(x + mean, w):
                out += wi * np.asarray(ch.kernel(xi), dtype=float)
    if abs(out.sum() - 1.0) > 1e-10:
        raise AssertionError("output distribution does not sum to 1")
    return out


def sample_output(ch: Channel, x, rng: np.random.Generator):
    """Draw one output for input x. Deterministic given the stream state."""
    probs = ch.row(x)
    iy = int(rng.choice(ch.n_outputs, p=probs))
    return ch.outputs[iy]


def _symbol_to_json(sym):
    if isinstance(sym, tuple):
        return list(sym)
    return sym


def _symbol_from_json(sym):
    if isinstance(sym, list):
        return tuple(sym)
    return sym


def channel_to_json(ch: Channel) -> str:
    """Serialize a finite channel to the golden-test JSON document."""
    if not ch.is_finite:
        raise UnsupportedOperationError("only finite channels serialize to JSON")
    doc = {
        "input": [_symbol_to_json(x) for x in ch.inputs],
        "outputs": [_symbol_to_json(y) for y in ch.outputs],
        "kernel": ch.kernel.tolist(),
        "constraint": [c.to_dict() for c in ch.constraints],
    }
    return json.dumps(doc, sort_keys=True)


def channel_from_json(doc: str) -> Channel:
    d = json.loads(doc)
    return Channel(
        outputs=tuple(_symbol_from_json(y) for y in d["outputs"]),
        inputs=tuple(_symbol_from_json(x) for x in d["input"]),
        kernel=np.array(d["kernel"], dtype=float),
        constraints=tuple(ConstraintSpec.from_dict(c) for c in d["constraint"]),
    )
