"""Ordered smoother families and the grids they are evaluated on.

A family maps a regularization parameter alpha to damping factors
h_alpha(k) in [0, 1], one per retained eigenvalue.  Grid convention: larger
alpha means more smoothing, so h is pointwise no larger.  The no-crossing
(ordering) property that the penalty calibration relies on is verified on
the finite grid by :func:`check_ordered`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Spectrum

__all__ = [
    "SmootherFamily",
    "AlphaGrid",
    "OrderingViolation",
    "OrderingReport",
    "h_values",
    "check_ordered",
    "default_floor_rule",
    "default_grid",
]

_KINDS = ("cutoff", "tikhonov", "landweber", "table")


@dataclass(frozen=True)
class SmootherFamily:
    """A named smoother family plus its kind-specific parameters.

    ``tau`` is the landweber relaxation step (default 1/lambda(1)).  User
    supplied tables carry explicit ``alphas`` and matching ``h_table`` rows;
    they are accepted but should always be run through :func:`check_ordered`.
    """

    kind: str
    tau: float | None = None
    alphas: np.ndarray | None = None
    h_table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"invalid input: unknown smoother kind {self.kind!r}")
        if self.kind == "table":
            alphas = np.asarray(self.alphas, dtype=float)
            table = np.asarray(self.h_table, dtype=float)
            if alphas.ndim != 1 or table.ndim != 2 or table.shape[0] != alphas.size:
                raise ValueError("invalid input: table family needs matching alphas and rows")
            object.__setattr__(self, "alphas", alphas)
            object.__setattr__(self, "h_table", table)

    @classmethod
    def cutoff(cls) -> "SmootherFamily":
        return cls("cutoff")

    @classmethod
    def tikhonov(cls) -> "SmootherFamily":
        return cls("tikhonov")

    @classmethod
    def landweber(cls, tau: float | None = None) -> "SmootherFamily":
        return cls("landweber", tau=tau)

    @classmethod
    def from_table(cls, alphas, h_table) -> "SmootherFamily":
        return cls("table", alphas=alphas, h_table=h_table)


@dataclass(frozen=True)
class AlphaGrid:
    """Strictly increasing positive grid a_1 < ... < a_M."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("invalid input: grid must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(values)) or values[0] <= 0.0:
            raise ValueError("invalid input: grid values must be positive and finite")
        if np.any(np.diff(values) <= 0.0):
            raise ValueError("invalid input: grid values must be strictly increasing")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def alpha_floor(self) -> float:
        return float(self.values[0])

    @property
    def alpha_max(self) -> float:
        return float(self.values[-1])


def _iterations_from_alpha(alpha: float) -> float:
    # ceil(1/alpha), snapped to the nearest integer when 1/alpha lands within
    # rounding noise of one (grids are built as exact reciprocals 1/m).
    q = 1.0 / alpha
    nearest = float(np.round(q))
    if nearest >= 1.0 and abs(q - nearest) <= 1e-9 * max(1.0, q):
        return nearest
    return float(np.ceil(q)) if q > 1.0 else 1.0


def _table_row(family: SmootherFamily, alpha: float, size: int) -> np.ndarray:
    match = np.nonzero(np.abs(family.alphas - alpha) <= 1e-12 * max(1.0, alpha))[0]
    if match.size == 0:
        raise ValueError(f"invalid input: alpha {alpha!r} is not tabulated")
    row = family.h_table[match[0]]
    if row.size != size:
        raise ValueError("dimension error: tabulated h row does not match the spectrum")
    return row


def h_values(family: SmootherFamily, alpha: float, spectrum: Spectrum) -> np.ndarray:
    """Damping factors h_alpha(k) for every retained eigenvalue.

    cutoff:    h(k) = 1 for k <= ceil(1/alpha), else 0
    tikhonov:  h(k) = lambda(k) / (lambda(k) + alpha)
    landweber: h(k) = 1 - (1 - tau*lambda(k)) ** ceil(1/alpha)
    table:     the tabulated row for alpha

    All values are clamped to [0, 1].
    """
    if not (np.isfinite(alpha) and alpha > 0.0):
        raise ValueError("invalid input: alpha must be positive")
    lam = spectrum.retained
    if family.kind == "cutoff":
        m = _iterations_from_alpha(alpha)
        h = (np.arange(1, lam.size + 1, dtype=float) <= m).astype(float)
    elif family.kind == "tikhonov":
        h = lam / (lam + alpha)
    elif family.kind == "landweber":
        tau = family.tau if family.tau is not None else 1.0 / lam[0]
        if tau <= 0.0:
            raise ValueError("invalid input: tau must be positive")
        # small slack covers the rounding of the default step 1/lambda(1)
        if tau * lam[0] > 1.0 + 1e-9:
            raise ValueError("unstable step: tau * lambda(1) > 1")
        base = np.clip(1.0 - tau * lam, 0.0, 1.0)
        h = 1.0 - base ** _iterations_from_alpha(alpha)
    else:
        h = _table_row(family, alpha, lam.size)
    return np.clip(h, 0.0, 1.0)


@dataclass(frozen=True)
class OrderingViolation:
    alpha_low: float
    alpha_high: float
    k: int
    kind: str


@dataclass(frozen=True)
class OrderingReport:
    ok: bool
    violation: OrderingViolation | None = None


def check_ordered(
    family: SmootherFamily,
    grid: AlphaGrid,
    spectrum: Spectrum,
    atol: float = 1e-12,
) -> OrderingReport:
    """Verify the ordering of the family on the grid.

    Checks that each h profile is nondecreasing in lambda (equivalently
    nonincreasing in k) and that along the grid a larger alpha never exceeds
    a smaller one anywhere, which rules out crossings.  Returns the first
    violating (alpha pair, component) triple on failure.
    """
    rows = np.array([h_values(family, a, spectrum) for a in grid.values])
    for i, a in enumerate(grid.values):
        bad = np.nonzero(np.diff(rows[i]) > atol)[0]
        if bad.size:
            return OrderingReport(
                False, OrderingViolation(float(a), float(a), int(bad[0]) + 1, "not monotone in lambda")
            )
    # consecutive rows suffice: pointwise dominance is transitive along the grid
    for i in range(len(grid.values) - 1):
        diff = rows[i + 1] - rows[i]
        above = np.nonzero(diff > atol)[0]
        if above.size:
            kind = "crossing" if np.any(diff < -atol) else "grid direction"
            return OrderingReport(
                False,
                OrderingViolation(
                    float(grid.values[i]), float(grid.values[i + 1]), int(above[0]) + 1, kind
                ),
            )
    return OrderingReport(True, None)


def default_floor_rule(h: np.ndarray) -> bool:
    """Require sum (1-h)^2 >= max(10, p/10): enough residual degrees of
    freedom at the grid floor to estimate the noise level."""
    resid = 1.0 - h
    return float(resid @ resid) >= max(10.0, h.size / 10.0)


def default_grid(
    family: SmootherFamily,
    spectrum: Spectrum,
    points: int | None = None,
    floor_rule=default_floor_rule,
) -> AlphaGrid:
    """Standard grid for a family.

    cutoff: the reciprocals {1/m : m = p..1} (``points`` is ignored).
    tikhonov/landweber: geometric with ``points`` values between
    lambda(p)/10 and 10*lambda(1).  The lower end is then raised to the
    first grid point satisfying ``floor_rule``; pass ``floor_rule=None`` to
    keep the full range.
    """
    lam = spectrum.retained
    if family.kind == "cutoff":
        values = 1.0 / np.arange(lam.size, 0, -1, dtype=float)
    elif family.kind == "table":
        values = np.sort(np.asarray(family.alphas, dtype=float))
    else:
        if points is None or points < 2:
            raise ValueError("invalid input: need points >= 2 for a geometric grid")
        values = np.geomspace(lam[-1] / 10.0, 10.0 * lam[0], int(points))
    if floor_rule is not None:
        keep = None
        for i, a in enumerate(values):
            if floor_rule(h_values(family, float(a), spectrum)):
                keep = i
                break
        if keep is None:
            raise ValueError("alpha floor infeasible: no grid point satisfies the floor rule")
        values = values[keep:]
    return AlphaGrid(values)
