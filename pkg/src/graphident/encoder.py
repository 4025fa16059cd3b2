"""Self-attention trajectory encoder.

Maps an (n, s, d) trajectory tensor to an (n, d) feature matrix whose row
distances feed the graph solver, plus the two regularization weights the
solver needs.  The pipeline:

1. a small fully connected stack turns every individual state vector
   (length s) into one scalar feature, giving an n x d feature matrix;
2. single-head self-attention mixes the per-node feature rows;
3. an optional per-feature stack refines each scalar (identity when empty);
4. pairwise squared distances of the refined rows give the distance matrix;
5. two sigmoid-capped heads read the mean distance and emit log(alpha)
   in (0, b) and -log(beta) in (0, b).

Everything runs on the autodiff tape so the same forward pass serves both
plain evaluation and training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, SchemaError

FORMATION_FC1 = (2, 5, 10, 5, 1)
FORMATION_FC2 = (1, 2, 1)
HEAD_WIDTHS = (1, 2, 1)
FORMATION_SCALE = 5.0

FLOCKING_FC1 = (2, 4, 4, 1)
FLOCKING_FC2 = ()
FLOCKING_SCALE = 3.0

_CHECKPOINT_FORMAT = "graphident-encoder"
_CHECKPOINT_VERSION = 1

Layer = tuple[np.ndarray, np.ndarray]


@dataclass
class EncoderParams:
    """Weights of the four stacks plus the fixed head output scale."""
    fc1: list[Layer]
    fc2: list[Layer]
    head_alpha: list[Layer]
    head_beta: list[Layer]
    scale: float
    seed: int

    @property
    def state_dim(self) -> int:
        return self.fc1[0][0].shape[0]

    @property
    def fc1_widths(self) -> tuple[int, ...]:
        return _stack_widths(self.fc1)

    @property
    def fc2_widths(self) -> tuple[int, ...]:
        return _stack_widths(self.fc2)

    @property
    def head_widths(self) -> tuple[int, ...]:
        return _stack_widths(self.head_alpha)

    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in
                   self.fc1 + self.fc2 + self.head_alpha + self.head_beta)


@dataclass(frozen=True)
class EncoderOutput:
    features: np.ndarray
    distances: np.ndarray
    alpha: float
    beta: float


def _stack_widths(stack: list[Layer]) -> tuple[int, ...]:
    if not stack:
        return ()
    return tuple([stack[0][0].shape[0]] + [w.shape[1] for w, _ in stack])


def _validate_widths(fc1, fc2, head, scale):
    for name, widths in (("fc1", fc1), ("fc2", fc2), ("head", head)):
        if any(int(w) != w or w < 1 for w in widths):
            raise DimensionError(f"{name} widths must be positive integers")
    if len(fc1) < 2 or fc1[-1] != 1:
        raise DimensionError("per-state stack must end in a single feature")
    if fc2 and (len(fc2) < 2 or fc2[0] != 1 or fc2[-1] != 1):
        raise DimensionError("per-feature stack must map one scalar to one scalar")
    if len(head) < 2 or head[0] != 1 or head[-1] != 1:
        raise DimensionError("head stacks must map one scalar to one scalar")
    if scale <= 0:
        raise DimensionError("head output scale must be positive")


def _init_stack(widths, rng) -> list[Layer]:
    stack = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        stack.append((W, np.zeros(fan_out)))
    return stack


def init_params(fc1_widths=FORMATION_FC1, fc2_widths=FORMATION_FC2,
                head_widths=HEAD_WIDTHS, scale=FORMATION_SCALE,
                seed: int = 0) -> EncoderParams:
    """Seeded uniform initialization: weights on [-1/sqrt(fan_in),
    +1/sqrt(fan_in)], biases zero."""
    _validate_widths(fc1_widths, fc2_widths, head_widths, scale)
    rng = np.random.default_rng(seed)
    return EncoderParams(
        fc1=_init_stack(fc1_widths, rng),
        fc2=_init_stack(fc2_widths, rng) if fc2_widths else [],
        head_alpha=_init_stack(head_widths, rng),
        head_beta=_init_stack(head_widths, rng),
        scale=float(scale),
        seed=int(seed),
    )


def formation_params(seed: int = 0) -> EncoderParams:
    return init_params(FORMATION_FC1, FORMATION_FC2, HEAD_WIDTHS,
                       FORMATION_SCALE, seed)


def flocking_params(seed: int = 0) -> EncoderParams:
    return init_params(FLOCKING_FC1, FLOCKING_FC2, HEAD_WIDTHS,
                       FLOCKING_SCALE, seed)


def params_to_arrays(params: EncoderParams) -> list[np.ndarray]:
    """Flatten to the canonical order: fc1, fc2, head_alpha, head_beta, each
    layer contributing weight then bias."""
    out = []
    for stack in (params.fc1, params.fc2, params.head_alpha, params.head_beta):
        for W, b in stack:
            out.append(W)
            out.append(b)
    return out


def arrays_to_params(arrays: list[np.ndarray],
                     template: EncoderParams) -> EncoderParams:
    """Rebuild an EncoderParams from the canonical flat array list."""
    it = iter(arrays)

    def take(stack):
        return [(next(it).reshape(W.shape), next(it).reshape(b.shape))
                for W, b in stack]

    rebuilt = EncoderParams(
        fc1=take(template.fc1), fc2=take(template.fc2),
        head_alpha=take(template.head_alpha), head_beta=take(template.head_beta),
        scale=template.scale, seed=template.seed)
    try:
        next(it)
    except StopIteration:
        return rebuilt
    raise DimensionError("too many arrays for this encoder layout")


def _run_stack(h: ad.Var, stack_vars, last: str) -> ad.Var:
    """Apply a fully connected stack; ``last`` names the final activation."""
    for i, (W, b) in enumerate(stack_vars):
        h = ad.add(ad.matmul(h, W), b)
        if i < len(stack_vars) - 1:
            h = ad.tanh(h)
        elif last == "tanh":
            h = ad.tanh(h)
        elif last == "sigmoid":
            h = ad.sigmoid(h)
        elif last != "linear":
            raise ValueError(f"unknown activation {last!r}")
    return h


def lift_params(tape: ad.Tape, params: EncoderParams):
    """Register every parameter array as a leaf on the tape; returns the same
    stack structure holding Vars, plus the flat leaf list in canonical order."""
    flat = [tape.leaf(a) for a in params_to_arrays(params)]
    it = iter(flat)

    def take(stack):
        return [(next(it), next(it)) for _ in stack]

    stacks = {
        "fc1": take(params.fc1),
        "fc2": take(params.fc2),
        "head_alpha": take(params.head_alpha),
        "head_beta": take(params.head_beta),
    }
    return stacks, flat


def encode_on_tape(tape: ad.Tape, X: np.ndarray, stacks: dict,
                   scale: float):
    """Record the full encoder forward pass.

    Returns (features, distances, y, alpha, beta) as Vars, where ``y`` is the
    half-vectorized distance vector aligned with the solver's edge ordering.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise DimensionError(f"expected an (n, s, d) tensor, got {X.shape}")
    n, s, d = X.shape
    if s != stacks["fc1"][0][0].shape[0]:
        raise DimensionError(
            f"state dimension {s} does not match encoder input width "
            f"{stacks['fc1'][0][0].shape[0]}")

    # One row per (node, time) state vector, node-major.
    batch = tape.leaf(X.transpose(0, 2, 1).reshape(n * d, s))
    h = _run_stack(batch, stacks["fc1"], last="tanh")
    feats = ad.reshape(h, (n, d))

    attention = ad.softmax_rows(
        ad.scale(ad.matmul(feats, ad.transpose(feats)), 1.0 / np.sqrt(d)))
    mixed = ad.matmul(attention, feats)

    if stacks["fc2"]:
        h2 = ad.reshape(mixed, (n * d, 1))
        h2 = _run_stack(h2, stacks["fc2"], last="linear")
        features = ad.reshape(h2, (n, d))
    else:
        features = mixed

    distances = ad.pairwise_sqdist(features)
    y = ad.vech_upper(distances)
    mean_distance = ad.reshape(ad.amean(distances), (1, 1))

    gate_a = _run_stack(mean_distance, stacks["head_alpha"], last="sigmoid")
    gate_b = _run_stack(mean_distance, stacks["head_beta"], last="sigmoid")
    alpha = ad.exp(ad.reshape(ad.scale(gate_a, scale), ()))
    beta = ad.exp(ad.reshape(ad.scale(gate_b, -scale), ()))
    return features, distances, y, alpha, beta


def encode(X: np.ndarray, params: EncoderParams) -> EncoderOutput:
    """Plain forward pass; records on a throwaway tape."""
    tape = ad.Tape()
    stacks, _ = lift_params(tape, params)
    features, distances, _, alpha, beta = encode_on_tape(
        tape, X, stacks, params.scale)
    return EncoderOutput(features=features.value.copy(),
                         distances=distances.value.copy(),
                         alpha=float(alpha.value),
                         beta=float(beta.value))


def save_params(params: EncoderParams, path) -> None:
    """Checkpoint as a structured text document; floats round-trip bit-exactly
    through repr-based JSON serialization."""
    doc = {
        "format": _CHECKPOINT_FORMAT,
        "version": _CHECKPOINT_VERSION,
        "fc1_widths": list(params.fc1_widths),
        "fc2_widths": list(params.fc2_widths),
        "head_widths": list(params.head_widths),
        "scale": params.scale,
        "seed": params.seed,
        "arrays": [a.reshape(-1).tolist() for a in params_to_arrays(params)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_params(path) -> EncoderParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != _CHECKPOINT_FORMAT:
        raise SchemaError(f"not an encoder checkpoint: {path}")
    if doc.get("version") != _CHECKPOINT_VERSION:
        raise SchemaError(
            f"unsupported checkpoint version {doc.get('version')}")
    template = init_params(tuple(doc["fc1_widths"]),
                           tuple(doc["fc2_widths"]),
                           tuple(doc["head_widths"]),
                           doc["scale"], seed=doc["seed"])
    flats = [np.asarray(a, dtype=np.float64) for a in doc["arrays"]]
    shapes = [a.shape for a in params_to_arrays(template)]
    if len(flats) != len(shapes):
        raise SchemaError("checkpoint array count does not match layout")
    arrays = [f.reshape(s) for f, s in zip(flats, shapes)]
    return arrays_to_params(arrays, template)
