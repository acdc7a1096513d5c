"""Phase-space points and Gaussian initial Wigner functions.

Points are plain float arrays whose last axis holds the 2k quadratures ordered
``(X_1, Y_1, X_2, Y_2, ...)`` with ``X_j = sqrt(2) Re(alpha_j)`` and
``Y_j = sqrt(2) Im(alpha_j)``.  Leading axes index trajectories.

In this convention a Gaussian Wigner function is

    W0(x) = pi^-k det(M)^-1/2 exp(-(x - mu)^T M^-1 (x - mu))

so vacuum and coherent states have ``M = I`` and the sample covariance of
``x`` is ``M / 2``.
"""
from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)

#: Number of trajectories sharing one generator block in :class:`SeededStream`.
STREAM_BLOCK = 4096


class LayoutError(ValueError):
    """Raised when an array does not match the expected mode layout."""


class SpecError(ValueError):
    """Raised for an invalid Gaussian Wigner specification."""


class ImpureStateError(SpecError):
    """Raised when a QFI run is set up on a spec with det(M) != 1."""


@dataclass(frozen=True)
class ModeLayout:
    names: tuple = ("a",)

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if not names:
            raise LayoutError("a layout needs at least one mode")
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate mode names in {names}")
        object.__setattr__(self, "names", names)

    @classmethod
    def of(cls, k):
        """Layout with ``k`` modes named a, b, c, ..."""
        if k < 1:
            raise LayoutError("k must be >= 1")
        return cls(tuple(chr(ord("a") + j) for j in range(k)))

    @property
    def k(self):
        return len(self.names)

    @property
    def dim(self):
        return 2 * self.k

    def index(self, mode):
        """Mode index for a name or integer."""
        if isinstance(mode, (int, np.integer)):
            if not 0 <= mode < self.k:
                raise LayoutError(f"mode index {mode} out of range for k={self.k}")
            return int(mode)
        try:
            return self.names.index(mode)
        except ValueError:
            raise LayoutError(f"unknown mode {mode!r}; layout has {self.names}") from None

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise LayoutError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        return x


def to_amplitudes(x):
    """Quadratures ``(..., 2k)`` to complex amplitudes ``(..., k)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] % 2:
        raise LayoutError(f"odd quadrature length {x.shape[-1]}")
    return (x[..., 0::2] + 1j * x[..., 1::2]) / SQRT2


def to_quadratures(alpha):
    """Complex amplitudes ``(..., k)`` to quadratures ``(..., 2k)``."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    x = np.empty(alpha.shape[:-1] + (2 * alpha.shape[-1],))
    x[..., 0::2] = alpha.real * SQRT2
    x[..., 1::2] = alpha.imag * SQRT2
    return x


def _matvec(A, v):
    # Explicit accumulation keeps each row's result independent of batch size.
    out = np.zeros(v.shape[:-1] + (A.shape[0],))
    for i in range(A.shape[0]):
        acc = out[..., i]
        for j in range(A.shape[1]):
            acc += A[i, j] * v[..., j]
    return out


def _dot(u, v):
    acc = np.zeros(u.shape[:-1])
    for j in range(u.shape[-1]):
        acc += u[..., j] * v[..., j]
    return acc


@dataclass(frozen=True)
class GaussianWignerSpec:
    """Gaussian initial Wigner function with mean ``mu`` and shape matrix ``M``."""

    mu: np.ndarray
    M: np.ndarray
    layout: ModeLayout = None
    M_inv: np.ndarray = field(init=False, repr=False, compare=False)
    factor: np.ndarray = field(init=False, repr=False, compare=False)
    det: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        M = np.array(self.M, dtype=float)
        layout = self.layout or ModeLayout.of(mu.size // 2 or 1)
        if mu.shape != (layout.dim,):
            raise LayoutError(f"mu has shape {mu.shape}, layout needs ({layout.dim},)")
        if M.shape != (layout.dim, layout.dim):
            raise LayoutError(f"M has shape {M.shape}, layout needs {(layout.dim,) * 2}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(M))):
            raise SpecError("mu and M must be finite")
        if np.max(np.abs(M - M.T)) > 1e-12:
            raise SpecError("M is not symmetric")
        M = 0.5 * (M + M.T)
        eig = np.linalg.eigvalsh(M)
        if eig.min() <= 1e-12:
            raise SpecError(f"M is not positive definite (smallest eigenvalue {eig.min():.3g})")
        mu.setflags(write=False)
        M.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "layout", layout)
        M_inv = np.linalg.inv(M)
        M_inv = 0.5 * (M_inv + M_inv.T)
        M_inv.setflags(write=False)
        object.__setattr__(self, "M_inv", M_inv)
        factor = np.linalg.cholesky(M / 2.0)
        factor.setflags(write=False)
        object.__setattr__(self, "factor", factor)
        object.__setattr__(self, "det", float(np.prod(eig)))

    @classmethod
    def coherent(cls, alpha0, layout=None):
        """Product of coherent states; ``alpha0`` is a scalar or one amplitude per mode."""
        alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=complex))
        layout = layout or ModeLayout.of(alpha0.size)
        if alpha0.size != layout.k:
            raise LayoutError(f"{alpha0.size} amplitudes for a {layout.k}-mode layout")
        return cls(to_quadratures(alpha0), np.eye(layout.dim), layout)

    @classmethod
    def vacuum(cls, layout=None):
        layout = layout or ModeLayout()
        return cls(np.zeros(layout.dim), np.eye(layout.dim), layout)

    @property
    def is_pure(self):
        return abs(self.det - 1.0) <= 1e-9

    def require_pure(self):
        if not self.is_pure:
            raise ImpureStateError(
                f"det(M) = {self.det:.12g}; the pure-state QFI estimator needs det(M) = 1"
            )
        return self

    def whitened(self, x):
        """``M^-1 (x - mu)`` for a batch of points."""
        x = self.layout.check(x)
        return _matvec(self.M_inv, x - self.mu)


def density(spec, x):
    """Evaluate ``W0(x)``; ``x`` may carry leading batch axes."""
    x = spec.layout.check(x)
    d = x - spec.mu
    q = _dot(_matvec(spec.M_inv, d), d)
    norm = np.pi ** (-spec.layout.k) / np.sqrt(spec.det)
    return norm * np.exp(-q)


def gradient(spec, x):
    """Exact gradient ``-2 M^-1 (x - mu) W0(x)``."""
    x = spec.layout.check(x)
    w = density(spec, x)
    return -2.0 * spec.whitened(x) * np.asarray(w)[..., None]


class SeededStream:
    """Reproducible normal deviates addressed by trajectory index.

    The draws for trajectory ``i`` depend only on ``(seed, i, dim)``: indices are
    grouped into fixed blocks of :data:`STREAM_BLOCK` and each block owns a
    generator seeded from ``(seed, block)``.  Any chunking of the index range
    over workers therefore reproduces the same samples bit for bit.
    """

    def __init__(self, seed):
        self.seed = int(seed)
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def __repr__(self):
        return f"SeededStream(seed={self.seed})"

    def _block(self, b, dim):
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, b]))
        return rng.standard_normal((STREAM_BLOCK, dim))

    def normals(self, start, stop, dim):
        """Standard normals for trajectories ``start <= i < stop``, shape ``(stop-start, dim)``."""
        if stop < start or start < 0:
            raise ValueError(f"bad index range [{start}, {stop})")
        out = np.empty((stop - start, dim))
        i = start
        while i < stop:
            b = i // STREAM_BLOCK
            lo = i - b * STREAM_BLOCK
            hi = min(STREAM_BLOCK, stop - b * STREAM_BLOCK)
            out[i - start:i - start + hi - lo] = self._block(b, dim)[lo:hi]
            i += hi - lo
        return out


def sample_initial(spec, rng, size=None, start=0):
    """Draw initial points ``mu + L n`` with ``L L^T = M / 2``.

    ``size=None`` returns the single point for trajectory ``start``; otherwise a
    ``(size, 2k)`` batch for trajectories ``start .. start+size-1``.
    """
    count = 1 if size is None else int(size)
    n = rng.normals(start, start + count, spec.layout.dim)
    x = spec.mu + _matvec(spec.factor, n)
    return x[0] if size is None else x
