"""Spectral-coordinate representation of high dimensional linear models.

A design matrix X (n x p, n >= p) enters only through the eigenvalues and
eigenvectors of X'X.  Every downstream formula depends on the data through
the eigenvalues lambda(k) and the spectral observations y(k) alone, so
synthetic experiments can skip the matrix entirely and work with a
:class:`SpectralModel` in spectral coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Spectrum",
    "DecomposedDesign",
    "SpectralModel",
    "SpectralData",
    "decompose_design",
    "to_spectral",
    "orthogonal_residual2",
    "simulate_observation",
    "reconstruct_estimate",
    "replication_stream",
    "polynomial_spectrum",
    "exponential_spectrum",
    "model_from_json",
]


def _frozen_array(values) -> np.ndarray:
    out = np.array(values, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of X'X, sorted nonincreasing, plus the retained count.

    Entries past ``effective_rank`` are kept for reporting only and take no
    part in any computation.
    """

    eigenvalues: np.ndarray
    effective_rank: int = -1

    def __post_init__(self):
        eig = _frozen_array(self.eigenvalues)
        if eig.ndim != 1 or eig.size == 0:
            raise ValueError("invalid input: eigenvalues must be a nonempty 1-d sequence")
        object.__setattr__(self, "eigenvalues", eig)
        rank = self.effective_rank if self.effective_rank >= 0 else eig.size
        if not 1 <= rank <= eig.size:
            raise ValueError("invalid input: effective_rank out of range")
        object.__setattr__(self, "effective_rank", int(rank))
        head = eig[:rank]
        if not np.all(np.isfinite(head)):
            raise ValueError("invalid input: non-finite eigenvalues")
        if head[-1] <= 0.0:
            raise ValueError("invalid input: retained eigenvalues must be positive")
        if np.any(np.diff(head) > 0.0):
            raise ValueError("invalid input: eigenvalues must be nonincreasing")

    @property
    def retained(self) -> np.ndarray:
        """Eigenvalues that survive rank truncation."""
        return self.eigenvalues[: self.effective_rank]


def polynomial_spectrum(p: int, exponent: float) -> Spectrum:
    """Spectrum with lambda(k) = k**-exponent, k = 1..p."""
    k = np.arange(1, p + 1, dtype=float)
    return Spectrum(k ** -float(exponent))


def exponential_spectrum(p: int, kappa: float) -> Spectrum:
    """Spectrum with lambda(k) = exp(-kappa * k), k = 1..p."""
    k = np.arange(1, p + 1, dtype=float)
    return Spectrum(np.exp(-float(kappa) * k))


@dataclass(frozen=True)
class DecomposedDesign:
    """Eigendecomposition of X'X plus the left factor of X.

    ``basis`` holds the orthonormal eigenvectors of X'X as columns, and
    ``left_basis`` the matching left singular vectors of X, so the spectral
    transform of raw data never squares the condition number by forming X'X.
    """

    spectrum: Spectrum
    basis: np.ndarray
    n: int
    left_basis: np.ndarray

    def __post_init__(self):
        basis = _frozen_array(self.basis)
        left = _frozen_array(self.left_basis)
        p = self.spectrum.eigenvalues.size
        if basis.shape != (p, p):
            raise ValueError("dimension error: basis must be p x p")
        if left.shape != (self.n, p):
            raise ValueError("dimension error: left_basis must be n x p")
        gram = basis.T @ basis
        if float(np.max(np.abs(gram - np.eye(p)))) > 1e-10:
            raise ValueError("invalid input: basis columns are not orthonormal")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "left_basis", left)


@dataclass(frozen=True)
class SpectralModel:
    """Simulation ground truth: spectrum, true coefficients, noise level."""

    spectrum: Spectrum
    coefficients: np.ndarray
    sigma: float

    def __post_init__(self):
        coef = _frozen_array(self.coefficients)
        if coef.shape != (self.spectrum.effective_rank,):
            raise ValueError("dimension error: coefficients must match effective_rank")
        if not np.all(np.isfinite(coef)):
            raise ValueError("invalid input: non-finite coefficients")
        sigma = float(self.sigma)
        if not (np.isfinite(sigma) and sigma >= 0.0):
            raise ValueError("invalid input: sigma must be a nonnegative real")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class SpectralData:
    """One observation in spectral coordinates: y(k) paired with lambda(k)."""

    spectrum: Spectrum
    y: np.ndarray

    def __post_init__(self):
        y = _frozen_array(self.y)
        if y.shape != (self.spectrum.effective_rank,):
            raise ValueError("dimension error: y must match effective_rank")
        if not np.all(np.isfinite(y)):
            raise ValueError("invalid input: non-finite observations")
        object.__setattr__(self, "y", y)


def decompose_design(x: np.ndarray, rank_tol: float = 1e-12) -> DecomposedDesign:
    """Decompose a design matrix into spectral form.

    The eigenvalues of X'X are the squared singular values of X; computing
    them from the SVD of X is far better conditioned for severely ill-posed
    designs than forming X'X.  Components with
    lambda(k) < rank_tol * lambda(1) are truncated and ``effective_rank``
    reduced accordingly.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("invalid input: X must be a 2-d matrix")
    n, p = x.shape
    if n < p or p < 1:
        raise ValueError("invalid input: need n >= p >= 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("invalid input: non-finite entries")
    if not np.any(x):
        raise ValueError("degenerate design: all-zero matrix")
    left, sing, vt = np.linalg.svd(x, full_matrices=False)
    lam = sing ** 2
    rank = int(np.count_nonzero(lam >= rank_tol * lam[0]))
    return DecomposedDesign(spectrum=Spectrum(lam, rank), basis=vt.T, n=n, left_basis=left)


def to_spectral(design: DecomposedDesign, y: np.ndarray) -> SpectralData:
    """Transform raw observations into spectral coordinates.

    Returns y(k) = <X'Y, psi_k> / lambda(k) for every retained component,
    evaluated as (U'Y)_k / s_k with s_k the singular values of X.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (design.n,):
        raise ValueError("dimension error: Y must have length n")
    if not np.all(np.isfinite(y)):
        raise ValueError("invalid input: non-finite entries")
    rank = design.spectrum.effective_rank
    proj = design.left_basis.T @ y
    return SpectralData(design.spectrum, proj[:rank] / np.sqrt(design.spectrum.retained))


def orthogonal_residual2(design: DecomposedDesign, y: np.ndarray) -> tuple[float, int]:
    """Squared norm of the part of Y orthogonal to the column span of X.

    Returns the squared residual together with its degrees of freedom n - p.
    This is the optional pure-noise component that :func:`selection.sigma_hat2`
    can fold into the variance estimate in raw-matrix mode.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (design.n,):
        raise ValueError("dimension error: Y must have length n")
    proj = design.left_basis.T @ y
    resid2 = float(y @ y - proj @ proj)
    return max(resid2, 0.0), design.n - design.basis.shape[0]


def simulate_observation(model: SpectralModel, rng: np.random.Generator) -> SpectralData:
    """Draw y(k) = beta(k) + sigma * g(k) / sqrt(lambda(k)) with g standard normal.

    Consumes exactly ``effective_rank`` draws from ``rng``; an identical
    stream state yields bitwise identical output.
    """
    lam = model.spectrum.retained
    g = rng.standard_normal(lam.size)
    return SpectralData(model.spectrum, model.coefficients + model.sigma * g / np.sqrt(lam))


def reconstruct_estimate(design: DecomposedDesign, filtered: np.ndarray) -> np.ndarray:
    """Map filtered spectral coefficients h(k) * y(k) back to coefficient space."""
    filtered = np.asarray(filtered, dtype=float)
    rank = design.spectrum.effective_rank
    if filtered.shape != (rank,):
        raise ValueError("dimension error: filtered must have length effective_rank")
    return design.basis[:, :rank] @ filtered


def replication_stream(master_seed: int, index: int) -> np.random.Generator:
    """Private random stream for one replication, derived from (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, index]))


def model_from_json(obj: dict) -> SpectralModel:
    """Build a model from ``{"eigenvalues": [...], "coefficients": [...], "sigma": s}``."""
    try:
        eig, coef, sigma = obj["eigenvalues"], obj["coefficients"], obj["sigma"]
    except (KeyError, TypeError):
        raise ValueError(
            "invalid input: spectral problem needs eigenvalues, coefficients, sigma"
        ) from None
    return SpectralModel(Spectrum(eig), coef, float(sigma))
