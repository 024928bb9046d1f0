"""Infrequent-tuple bookkeeping, absorbing games and empirical transition estimates.

An absorbing model lives on ``S + 1`` states; index ``S`` is the absorbing
state.  Transitions into tuples of the infrequent set are removed and their
mass is routed to the absorbing state, which loops on itself forever.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError, DataError
from .game_model import PROB_ATOL, MarkovGame, Rollout, _frozen


class InfrequentSet:
    """Immutable set of ``(h, s, a, b, s')`` tuples stored as a boolean mask."""

    def __init__(self, dims, members=()):
        H, S, A, B = (int(d) for d in dims)
        if min(H, S, A, B) < 1:
            raise ConfigurationError("dimensions must be positive")
        mask = np.zeros((H, S, A, B, S), dtype=bool)
        for tup in members:
            idx = tuple(int(i) for i in tup)
            if len(idx) != 5:
                raise ConfigurationError(f"infrequent tuple {tup!r} must have 5 entries")
            for val, bound in zip(idx, mask.shape):
                if not 0 <= val < bound:
                    raise ConfigurationError(f"infrequent tuple {tup!r} out of range")
            mask[idx] = True
        mask.setflags(write=False)
        self._mask = mask
        self.dims = (H, S, A, B)

    @classmethod
    def from_mask(cls, mask) -> "InfrequentSet":
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 5 or mask.shape[1] != mask.shape[4]:
            raise ConfigurationError("mask must have shape (H, S, A, B, S)")
        out = cls(mask.shape[:4])
        out._mask = _frozen(mask, dtype=bool)
        return out

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def members(self) -> list[tuple[int, int, int, int, int]]:
        return [tuple(int(i) for i in t) for t in np.argwhere(self._mask)]

    def union(self, other) -> "InfrequentSet":
        other_mask = other.mask if isinstance(other, InfrequentSet) else np.asarray(other, bool)
        if other_mask.shape != self._mask.shape:
            raise ConfigurationError("infrequent sets have different dimensions")
        return InfrequentSet.from_mask(self._mask | other_mask)

    def issubset(self, other: "InfrequentSet") -> bool:
        return bool(np.all(other.mask[self._mask]))

    def __contains__(self, tup) -> bool:
        try:
            return bool(self._mask[tuple(int(i) for i in tup)])
        except IndexError:
            return False

    def __len__(self) -> int:
        return int(self._mask.sum())

    def __eq__(self, other):
        return isinstance(other, InfrequentSet) and np.array_equal(self._mask, other._mask)

    def __hash__(self):
        return hash(self._mask.tobytes())

    def __repr__(self):
        return f"InfrequentSet(dims={self.dims}, size={len(self)})"


@dataclass(frozen=True, eq=False)
class CountTable:
    """Visitation counts ``n4[h, s, a, b, s']``; ``n3`` is their sum over ``s'``."""

    n4: np.ndarray
    n3: np.ndarray = field(init=False)

    def __post_init__(self):
        n4 = np.asarray(self.n4)
        if n4.ndim != 5 or n4.shape[1] != n4.shape[4]:
            raise DataError("count table must have shape (H, S, A, B, S)")
        if not np.all(np.isfinite(n4)) or np.any(n4 < 0) or np.any(n4 != np.round(n4)):
            raise DataError("counts must be nonnegative integers")
        n4 = _frozen(n4, dtype=np.int64)
        object.__setattr__(self, "n4", n4)
        object.__setattr__(self, "n3", _frozen(n4.sum(axis=-1), dtype=np.int64))

    @classmethod
    def zeros(cls, dims) -> "CountTable":
        H, S, A, B = dims
        return cls(np.zeros((H, S, A, B, S), dtype=np.int64))

    @classmethod
    def from_rollout(cls, ro: Rollout, dims, layers=None) -> "CountTable":
        """Count transitions of ``ro``; ``layers`` restricts which steps are counted."""
        H, S, A, B = dims
        n4 = np.zeros((H, S, A, B, S), dtype=np.int64)
        steps = range(H) if layers is None else layers
        for h in steps:
            np.add.at(
                n4,
                (h, ro.states[:, h], ro.actions_a[:, h], ro.actions_b[:, h], ro.states[:, h + 1]),
                1,
            )
        return cls(n4)

    def __add__(self, other: "CountTable") -> "CountTable":
        if self.n4.shape != other.n4.shape:
            raise DataError("count tables have different shapes")
        return CountTable(self.n4 + other.n4)


@dataclass(frozen=True, eq=False)
class EstimatedModel:
    """Transition kernel over ``S + 1`` states with absorbing state index ``S``."""

    transition: np.ndarray
    infrequent: InfrequentSet
    initial_state: int = 0

    def __post_init__(self):
        P = _frozen(self.transition)
        if P.ndim != 5 or P.shape[1] != P.shape[4] or P.shape[1] < 2:
            raise ConfigurationError("transition must have shape (H, S+1, A, B, S+1)")
        H, n, A, B, _ = P.shape
        S = n - 1
        if self.infrequent.dims != (H, S, A, B):
            raise ConfigurationError("infrequent set dimensions do not match the model")
        if not np.all(np.isfinite(P)) or np.any(P < -PROB_ATOL):
            raise ConfigurationError("transition entries must be finite and nonnegative")
        if np.any(np.abs(P.sum(axis=-1) - 1.0) > PROB_ATOL):
            raise ConfigurationError("extended transition rows must sum to 1")
        if np.any(np.abs(P[:, S, :, :, S] - 1.0) > PROB_ATOL):
            raise ConfigurationError("the absorbing state must loop on itself")
        if np.any(P[:, :S, :, :, :S][self.infrequent.mask] != 0.0):
            raise ConfigurationError("infrequent tuples must carry zero probability")
        if not 0 <= int(self.initial_state) < S:
            raise ConfigurationError("initial_state out of range")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def n_states(self) -> int:
        """Number of original (non-absorbing) states."""
        return self.transition.shape[1] - 1

    @property
    def absorbing(self) -> int:
        return self.transition.shape[1] - 1

    @property
    def horizon(self) -> int:
        return self.transition.shape[0]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        H, n, A, B, _ = self.transition.shape
        return H, n - 1, A, B

    @classmethod
    def uniform(cls, dims, infrequent: InfrequentSet | None = None, initial_state: int = 0):
        """Every original row uniform over the extended states (infrequent mass to s†)."""
        H, S, A, B = dims
        f = infrequent if infrequent is not None else InfrequentSet(dims)
        P = np.full((H, S + 1, A, B, S + 1), 1.0 / (S + 1))
        P[:, S] = 0.0
        P[:, S, :, :, S] = 1.0
        P = _redirect(P, f.mask)
        return cls(P, f, initial_state)

    def layer(self, h: int) -> np.ndarray:
        return self.transition[h]

    def to_json(self) -> str:
        H, S, A, B = self.dims
        return json.dumps(
            {
                "dims": {"H": H, "S": S, "A": A, "B": B},
                "initial_state": self.initial_state,
                "transition": self.transition.tolist(),
                "infrequent": self.infrequent.members,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "EstimatedModel":
        d = json.loads(text)
        dims = tuple(d["dims"][k] for k in "HSAB")
        return cls(np.array(d["transition"]), InfrequentSet(dims, d["infrequent"]), d["initial_state"])


def _redirect(P: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero masked original-state entries of the extended kernel, moving mass to s†."""
    P = np.array(P, dtype=float)
    S = mask.shape[1]
    orig = P[:, :S, :, :, :S]
    removed = np.where(mask, orig, 0.0).sum(axis=-1)
    orig[mask] = 0.0
    P[:, :S, :, :, S] += removed
    return P


def build_absorbing(game: MarkovGame, f: InfrequentSet) -> EstimatedModel:
    """The true absorbing game: ``P`` with infrequent tuples redirected to s†."""
    H, S, A, B = game.dims
    if f.dims != (H, S, A, B):
        raise ConfigurationError("infrequent set dimensions do not match the game")
    P = np.zeros((H, S + 1, A, B, S + 1))
    P[:, :S, :, :, :S] = game.transition
    P[:, S, :, :, S] = 1.0
    return EstimatedModel(_redirect(P, f.mask), f, game.initial_state)


def estimate_layer(n4: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Extended kernel ``(S, A, B, S+1)`` for one layer from counts and the F mask."""
    S, A, B, _ = n4.shape
    n3 = n4.sum(axis=-1)
    out = np.zeros((S, A, B, S + 1))
    seen = n3 > 0
    freq = np.divide(n4, n3[..., None], out=np.zeros(n4.shape), where=seen[..., None])
    freq[mask] = 0.0
    out[..., :S] = freq
    out[..., S] = np.where(seen, 1.0 - freq.sum(axis=-1), 1.0)
    # absorb round-off
    out[..., S] = np.clip(out[..., S], 0.0, 1.0)
    return out


def estimate_transition(data: CountTable, f: InfrequentSet, h: int, model: EstimatedModel) -> EstimatedModel:
    """Replace layer ``h`` of ``model`` by the count-based estimate.

    Tuples in ``f`` get probability 0, the rest get ``n4 / n3``, and the
    absorbing state takes the residual.  Rows never visited become a point
    mass on the absorbing state.
    """
    if not isinstance(data, CountTable):
        data = CountTable(data)
    H, S, A, B = model.dims
    if data.n4.shape != (H, S, A, B, S) or f.dims != (H, S, A, B):
        raise ConfigurationError("counts, infrequent set and model dimensions disagree")
    if not 0 <= h < H:
        raise ConfigurationError(f"layer {h} out of range")
    P = np.array(model.transition)
    P[h, :S] = estimate_layer(data.n4[h], f.mask[h])
    # keep earlier layers consistent with a grown F
    P = _redirect(P, f.mask)
    return EstimatedModel(P, f, model.initial_state)


def estimate_all(data: CountTable, f: InfrequentSet, model: EstimatedModel) -> EstimatedModel:
    """Re-estimate every layer from ``data`` (starting from ``model``)."""
    for h in range(model.horizon):
        model = estimate_transition(data, f, h, model)
    return model


@dataclass(frozen=True)
class AccuracyReport:
    ok: bool
    worst_ratio: float
    violations: list
    n_checked: int

    @property
    def pass_fraction(self) -> float:
        if self.n_checked == 0:
            return 1.0
        return 1.0 - len(self.violations) / self.n_checked

    def __iter__(self):
        return iter((self.ok, self.worst_ratio, self.violations))


def check_multiplicative_accuracy(p1: EstimatedModel, p2: EstimatedModel, theta: float) -> AccuracyReport:
    """Entrywise ``(1 - theta) p1 <= p2 <= (1 + theta) p1`` over original targets.

    ``worst_ratio`` is the largest ``|p2 / p1 - 1|`` (infinite when ``p1 = 0 < p2``).
    Only tuples outside the infrequent set are counted in ``n_checked``.
    """
    if p1.infrequent != p2.infrequent:
        raise ContractError("models were built with different infrequent sets")
    if p1.transition.shape != p2.transition.shape:
        raise ContractError("models have different dimensions")
    if theta < 0:
        raise ConfigurationError("theta must be nonnegative")
    S = p1.n_states
    a = p1.transition[:, :S, :, :, :S]
    b = p2.transition[:, :S, :, :, :S]
    tol = 1e-12
    bad = (b < (1.0 - theta) * a - tol) | (b > (1.0 + theta) * a + tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a > 0, np.abs(b / a - 1.0), np.where(b > tol, np.inf, 0.0))
    worst = float(ratio.max()) if ratio.size else 0.0
    violations = [tuple(int(i) for i in t) for t in np.argwhere(bad)]
    n_checked = int((~p1.infrequent.mask).sum())
    return AccuracyReport(not violations, worst, violations, n_checked)
