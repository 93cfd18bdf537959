"""Population vectors, Gibbs weights and column-stochastic channels.

Everything in the package works on energy-incoherent states, i.e. on
probability vectors over the product energy levels.  Product levels are
indexed row-major: for two subsystems the level ``(i, j)`` sits at
``i * d + j`` so that ``p[0], p[1], p[2], p[3]`` are ``p00, p01, p10, p11``
for a pair of qubits.

Channels act on column vectors, ``q = M @ p``; columns are inputs, rows are
outputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# beta = inf is replaced by a finite cutoff; e^-50 is far below every tolerance
BETA_INF = 50.0
TOL_NORM = 1e-10
TOL_NEG = 1e-12
TOL_STOCH = 1e-12
TOL_GIBBS = 1e-10

COLD = "c"
HOT = "h"


class InvalidParameter(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class LevelSpec:
    local_energies: tuple[float, ...] = (0.0, 1.0)
    num_subsystems: int = 2

    def __post_init__(self):
        energies = tuple(float(e) for e in self.local_energies)
        object.__setattr__(self, "local_energies", energies)
        if len(energies) < 2:
            raise InvalidParameter("need at least two local levels")
        if any(b <= a for a, b in zip(energies, energies[1:])):
            raise InvalidParameter(f"local energies must be strictly increasing: {energies}")
        if self.num_subsystems < 1:
            raise InvalidParameter("num_subsystems must be positive")

    @property
    def local_dim(self) -> int:
        return len(self.local_energies)

    @property
    def dim(self) -> int:
        return self.local_dim ** self.num_subsystems

    @property
    def product_energies(self) -> np.ndarray:
        e = np.asarray(self.local_energies)
        out = np.zeros(1)
        for _ in range(self.num_subsystems):
            out = np.add.outer(out, e).ravel()
        return out

    def labels(self) -> list[str]:
        """Level names in index order, e.g. ``['00', '01', '10', '11']``."""
        digits = range(self.local_dim)
        return ["".join(map(str, t)) for t in itertools.product(digits, repeat=self.num_subsystems)]

    def index(self, label: str | Sequence[int]) -> int:
        idx = 0
        for c in label:
            idx = idx * self.local_dim + int(c)
        return idx


QUBITS = LevelSpec()


@dataclass(frozen=True)
class InverseTemperaturePair:
    """Cold/hot inverse temperatures.

    ``beta_h > beta_c`` is accepted; the labels are then nominal.
    """

    beta_c: float
    beta_h: float

    def __post_init__(self):
        for name in ("beta_c", "beta_h"):
            b = float(getattr(self, name))
            if not math.isfinite(b) or b < 0:
                raise InvalidParameter(f"{name} must be finite and >= 0, got {b}")
            object.__setattr__(self, name, min(b, BETA_INF))

    @classmethod
    def from_exp(cls, exp_beta_c: float, exp_beta_h: float) -> "InverseTemperaturePair":
        """Build from exponentiated inverse temperatures ``e^-beta`` in (0, 1]."""
        return cls(beta_from_exp(exp_beta_c), beta_from_exp(exp_beta_h))

    def __getitem__(self, bath: str) -> float:
        if bath == COLD:
            return self.beta_c
        if bath == HOT:
            return self.beta_h
        raise KeyError(bath)

    @property
    def exp_c(self) -> float:
        return math.exp(-self.beta_c)

    @property
    def exp_h(self) -> float:
        return math.exp(-self.beta_h)

    def swapped(self) -> "InverseTemperaturePair":
        return InverseTemperaturePair(self.beta_h, self.beta_c)


def beta_from_exp(x: float) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise InvalidParameter(f"exp(-beta) must lie in [0, 1], got {x}")
    if x <= math.exp(-BETA_INF):
        return BETA_INF
    return -math.log(x)


def population(p, *, tol_norm: float = TOL_NORM, tol_neg: float = TOL_NEG) -> np.ndarray:
    """Validate a population vector; tiny negative entries are clamped to 0."""
    p = np.array(p, dtype=float).ravel()
    if p.size == 0:
        raise InvalidParameter("empty population vector")
    if np.any(p < -tol_neg) or not np.all(np.isfinite(p)):
        raise InvalidParameter(f"population has negative or non-finite entries: {p}")
    p[p < 0] = 0.0
    if abs(p.sum() - 1.0) > tol_norm:
        raise InvalidParameter(f"population not normalized (sum={p.sum()!r})")
    return p


def gibbs_population(levels: LevelSpec | Sequence[float], beta: float) -> np.ndarray:
    """Normalized Gibbs weights ``exp(-beta E_i)`` of a single subsystem."""
    beta = float(beta)
    if not math.isfinite(beta) or beta < 0:
        raise InvalidParameter(f"beta must be finite and >= 0, got {beta}")
    energies = levels.local_energies if isinstance(levels, LevelSpec) else levels
    e = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (e - e.min()))
    return w / w.sum()


def kron_all(vectors) -> np.ndarray:
    out = np.ones(1)
    for v in vectors:
        out = np.kron(out, v)
    return out


@dataclass(frozen=True, eq=False)
class GibbsContext:
    """Local Gibbs states of the two baths and the induced product weights.

    ``assignment`` lists the bath touching each subsystem; ``product_weights``
    is the tensor product of the matching local Gibbs vectors.  Use
    :meth:`weights` for any other assignment (a *stroke*).
    """

    levels: LevelSpec
    betas: InverseTemperaturePair
    assignment: tuple[str, ...]
    cold: np.ndarray = field(init=False)
    hot: np.ndarray = field(init=False)
    product_weights: np.ndarray = field(init=False)

    def __post_init__(self):
        assignment = tuple(self.assignment)
        if len(assignment) != self.levels.num_subsystems or set(assignment) - {COLD, HOT}:
            raise InvalidParameter(f"bad bath assignment {assignment!r}")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "cold", gibbs_population(self.levels, self.betas.beta_c))
        object.__setattr__(self, "hot", gibbs_population(self.levels, self.betas.beta_h))
        object.__setattr__(self, "product_weights", self.weights(assignment))

    def local(self, bath: str) -> np.ndarray:
        return self.cold if bath == COLD else self.hot

    def weights(self, stroke: Sequence[str]) -> np.ndarray:
        return kron_all(self.local(b) for b in stroke)

    def joint(self, bath: str) -> tuple[str, ...]:
        return (bath,) * self.levels.num_subsystems

    @property
    def gamma(self) -> float:
        """Ground population of a cold qubit (the scalar convention)."""
        return float(self.cold[0])

    @property
    def Gamma(self) -> float:
        return float(self.hot[0])


def product_gibbs(levels: LevelSpec = QUBITS, betas: InverseTemperaturePair | None = None,
                  assignment: Sequence[str] = (COLD, HOT)) -> GibbsContext:
    if betas is None:
        raise InvalidParameter("betas required")
    return GibbsContext(levels, betas, tuple(assignment))


def qubit_context(exp_beta_c: float, exp_beta_h: float, assignment=(COLD, HOT)) -> GibbsContext:
    """Two-qubit context from exponentiated inverse temperatures."""
    return GibbsContext(QUBITS, InverseTemperaturePair.from_exp(exp_beta_c, exp_beta_h), tuple(assignment))


@dataclass(frozen=True, eq=False)
class StochasticChannel:
    """Column-stochastic matrix, optionally tagged with the Gibbs vector it fixes.

    ``preserved_gibbs`` is ``None`` for channels that fix no full-rank Gibbs
    vector, e.g. compositions across strokes or LTOCC maps with memory.
    """

    matrix: np.ndarray
    preserved_gibbs: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"channel matrix must be square, got {m.shape}")
        if np.any(m < -TOL_STOCH) or np.any(m > 1 + TOL_STOCH):
            raise InvalidParameter(f"channel {self.label!r} has entries outside [0, 1]")
        if np.max(np.abs(m.sum(axis=0) - 1)) > TOL_STOCH:
            raise InvalidParameter(f"channel {self.label!r} is not column-stochastic")
        np.clip(m, 0.0, 1.0, out=m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.preserved_gibbs is not None:
            g = np.asarray(self.preserved_gibbs, dtype=float)
            if g.shape != (m.shape[0],):
                raise DimensionMismatch("preserved Gibbs vector has wrong length")
            if np.max(np.abs(m @ g - g)) > TOL_GIBBS:
                raise InvalidParameter(f"channel {self.label!r} does not preserve its Gibbs vector")
            object.__setattr__(self, "preserved_gibbs", g)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, p) -> np.ndarray:
        return apply_channel(self, p)

    def then(self, other: "StochasticChannel") -> "StochasticChannel":
        """Channel for ``self`` followed by ``other``."""
        if other.dim != self.dim:
            raise DimensionMismatch("cannot compose channels of different dimension")
        g = None
        if (self.preserved_gibbs is not None and other.preserved_gibbs is not None
                and np.allclose(self.preserved_gibbs, other.preserved_gibbs, atol=TOL_GIBBS)):
            g = self.preserved_gibbs
        label = f"{other.label}*{self.label}" if self.label or other.label else ""
        return StochasticChannel(other.matrix @ self.matrix, g, label)


def identity_channel(dim: int, gibbs=None) -> StochasticChannel:
    return StochasticChannel(np.eye(dim), gibbs, "id")


def apply_channel(ch: StochasticChannel, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (ch.dim,):
        raise DimensionMismatch(f"state of length {p.size} vs channel of dim {ch.dim}")
    return population(ch.matrix @ p)
