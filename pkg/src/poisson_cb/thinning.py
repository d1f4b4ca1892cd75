"""Binomial thinning of Poisson counts into coupled train/test pairs.

Given ``omega | Y ~ Binom(Y, p)`` the pair ``Y* = Y - omega`` and
``Y_dagger = (1 - p)/p * omega`` are independent with equal means and
``Y* ~ Pois((1 - p) mu)``.

Randomness is counter based: every task is addressed by a seed and an integer
path, hashed into the key of a Philox stream, so streams for different tasks
never overlap.  Bootstrap replicates are drawn row by row from one stream,
hence the first ``B`` replicates do not depend on how many more are drawn.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .losses import as_counts


def _key(seed: int, *path: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in path))
    return ss.generate_state(2, dtype=np.uint64)


def stream(seed: int, *path: int, counter: int = 0) -> np.random.Generator:
    """Generator for the stream addressed by ``(seed, *path, counter)``."""
    ctr = np.array([0, 0, 0, counter], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed, *path), counter=ctr))


def derive_seed(seed: int, *path: int) -> int:
    """A 63-bit integer seed for the sub-task addressed by ``path``."""
    return int(_key(seed, *path)[0] >> np.uint64(1))


class StreamFamily:
    """Cheap factory for many replicate streams sharing one key."""

    def __init__(self, seed: int, *path: int):
        self.seed = int(seed)
        self.path = tuple(int(k) for k in path)
        self._key = _key(self.seed, *self.path)

    def __call__(self, index: int) -> np.random.Generator:
        ctr = np.array([0, 0, 0, index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=self._key, counter=ctr))

    def child(self, *path: int) -> StreamFamily:
        return StreamFamily(self.seed, *self.path, *path)


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return p


@dataclass
class CoupledPair:
    y_star: np.ndarray
    y_dagger: np.ndarray
    omega: np.ndarray


@dataclass
class BootstrapDraws:
    """``B`` coupled pairs drawn from one data vector, stored row-wise."""

    omega: np.ndarray  # (B, n) integer-valued
    y: np.ndarray
    p: float
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def B(self) -> int:
        return self.omega.shape[0]

    @property
    def y_star(self) -> np.ndarray:
        return self.y[None, :] - self.omega

    @property
    def y_dagger(self) -> np.ndarray:
        return (1.0 - self.p) / self.p * self.omega

    @property
    def pairs(self) -> list[CoupledPair]:
        ys, yd = self.y_star, self.y_dagger
        return [CoupledPair(ys[b], yd[b], self.omega[b]) for b in range(self.B)]


def thin_with(y: np.ndarray, omega: np.ndarray, p: float) -> CoupledPair:
    """Build the coupled pair from a given ``omega`` (deterministic)."""
    y = as_counts(y)
    omega = np.asarray(omega, dtype=np.float64)
    if np.any(omega < 0) or np.any(omega > y):
        raise ValueError("omega must satisfy 0 <= omega <= y")
    p = _check_p(p)
    return CoupledPair(y - omega, (1.0 - p) / p * omega, omega)


def binomial_thin(y, p: float, rng: np.random.Generator) -> CoupledPair:
    """One binomial split of ``y``."""
    y = as_counts(y)
    p = _check_p(p)
    omega = rng.binomial(y.astype(np.int64), p).astype(np.float64)
    return CoupledPair(y - omega, (1.0 - p) / p * omega, omega)


def draw_coupled_bootstrap(y, p: float, B: int, seed: int) -> BootstrapDraws:
    """``B`` independent binomial splits drawn row-major from the stream of ``seed``."""
    y = as_counts(y)
    p = _check_p(p)
    if int(B) < 1:
        raise ValueError("B must be at least 1")
    yi = np.broadcast_to(y.astype(np.int64), (int(B), y.size))
    omega = stream(seed).binomial(yi, p).astype(np.float64)
    return BootstrapDraws(omega=omega, y=y, p=p, seed=int(seed))


def beta_split_exponential(y: float, eps: float, rng: np.random.Generator):
    """Split a positive continuous observation with ``Z ~ Beta(eps, 1 - eps)``.

    Returns ``(Z/eps * y, (1 - Z)/(1 - eps) * y)``.  When ``y ~ Exp(lam)`` the
    two parts are independent ``Gam(eps, eps lam)`` and
    ``Gam(1 - eps, (1 - eps) lam)`` variables, both with mean ``1/lam``.
    ``y`` may be an array; one ``Z`` is drawn per entry.
    """
    y = np.asarray(y, dtype=np.float64)
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if np.any(y <= 0):
        raise ValueError("observations must be positive")
    # Beta via two gammas: stable for small shapes.
    ga = rng.standard_gamma(eps, size=y.shape)
    gb = rng.standard_gamma(1.0 - eps, size=y.shape)
    z = ga / (ga + gb)
    return split_with_z(y, eps, z)


def split_with_z(y, eps: float, z):
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    ys = z / eps * y
    yd = (1.0 - z) / (1.0 - eps) * y
    if ys.ndim == 0:
        return float(ys), float(yd)
    return ys, yd
