"""Trajectory estimator of the quantum Fisher information.

Each initial sample ``x0`` is run through the protocol at ``omega_op +- d/2``
(common random numbers: the same ``x0`` for both), both endpoints are rewound
at ``omega_op`` and their central difference gives ``dx/domega`` at ``t=0``.
With ``s = dx/domega . M^-1 (x0 - mu)`` the QFI is

    F_Q = 8 (2 pi)^k E[ W0(x0) s^2 ]

in the quadrature convention of :mod:`twqfi.phase_space`.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import resolve_backend
from .dynamics import IntegrationError
from .phase_space import SeededStream, density, sample_initial

#: Trajectories per work unit.  Fixed so results never depend on worker count.
CHUNK = 16384

#: Largest fraction of escaped trajectories tolerated before a run aborts.
MAX_ESCAPED_FRACTION = 1e-3


class EstimationError(RuntimeError):
    """Raised when too many trajectories escape or the setup is invalid."""


def prefactor(k):
    """Normalisation ``8 (2 pi)^k`` of the estimator for ``k`` modes."""
    return 8.0 * (2.0 * np.pi) ** k


@dataclass
class TrajectoryBundle:
    x0: np.ndarray
    x_plus: np.ndarray
    x_minus: np.ndarray
    dxdw: np.ndarray
    contribution: np.ndarray = None


def _pullback(p, y, value, backend, check):
    z = p.encode(y, value, backend=backend, check=check)
    z = p.rewind_encoding(z, backend=backend, check=check)
    return p.rewind_preparation(z, backend=backend, check=check)


def parametric_derivative(p, x0, delta, backend=None, check=True, prepared=None):
    """Central-difference derivative of the rewound trajectory w.r.t. the parameter.

    ``prepared`` may carry the already-computed preparation endpoint of ``x0``.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    x0 = p.layout.check(x0)
    y = p.prepare(x0, backend=backend, check=check) if prepared is None else prepared
    w = p.operating_value
    out = []
    for value in (w + 0.5 * delta, w - 0.5 * delta):
        try:
            out.append(_pullback(p, y, value, backend, check))
        except IntegrationError as exc:
            exc.value = value
            raise
    x_plus, x_minus = out
    return TrajectoryBundle(x0, x_plus, x_minus, (x_plus - x_minus) / delta)


def quadrature_mask(layout, modes):
    """Boolean mask over quadratures selecting the given modes (``None`` = all)."""
    keep = np.zeros(layout.dim, dtype=bool)
    if modes is None:
        keep[:] = True
        return keep
    for mode in modes:
        j = layout.index(mode)
        keep[2 * j:2 * j + 2] = True
    return keep


def per_trajectory_contribution(spec, bundle, mask=None):
    """``W0(x0) * (dx/domega . M^-1 (x0 - mu))^2`` with masked modes zeroed."""
    keep = quadrature_mask(spec.layout, mask)
    dxdw = np.where(keep, bundle.dxdw, 0.0)
    white = spec.whitened(bundle.x0)
    s = np.zeros(white.shape[:-1])
    for j in range(spec.layout.dim):
        s += dxdw[..., j] * white[..., j]
    c = density(spec, bundle.x0) * s * s
    bundle.contribution = c
    return c


@dataclass
class Ensemble:
    """Initial samples, preparation endpoints and rewound derivatives of one run."""

    x0: np.ndarray
    prepared: np.ndarray
    dxdw: np.ndarray
    escaped: np.ndarray
    delta: float
    seed: int

    @property
    def n(self):
        return self.x0.shape[0]

    @property
    def n_escaped(self):
        return int(self.escaped.sum())


@dataclass(frozen=True)
class QfiEstimate:
    value: float
    std_error: float
    n_trajectories: int
    delta_omega: float
    mask: tuple = None
    n_nonfinite: int = 0
    config: dict = field(default_factory=dict)

    def __str__(self):
        tag = "" if self.mask is None else f" modes={list(self.mask)}"
        return (f"F_Q = {self.value:.6g} +- {self.std_error:.2g} "
                f"(N={self.n_trajectories}, delta={self.delta_omega:g}{tag})")


def default_delta(p):
    enc = p.encoding.model
    if hasattr(enc, "default_delta"):
        return enc.default_delta(p.encoding.duration)
    return 1e-4


def _run_chunk(spec, p, stream, start, stop, delta, backend, threshold):
    x0 = sample_initial(spec, stream, size=stop - start, start=start)
    with np.errstate(over="ignore", invalid="ignore"):
        y = p.prepare(x0, backend=backend, check=False)
        b = parametric_derivative(p, x0, delta, backend=backend, check=False, prepared=y)
        bad = np.zeros(x0.shape[0], dtype=bool)
        for arr in (y, b.x_plus, b.x_minus, b.dxdw):
            # NaN fails the comparison, so it is caught here too
            bad |= ~np.all(np.abs(arr) <= threshold, axis=-1)
    return x0, y, b.dxdw, bad


def simulate(spec, p, n, delta=None, seed=0, workers=1, backend=None, escape_threshold=1e8):
    """Sample ``n`` trajectories and compute their rewound parametric derivatives.

    Work is split into fixed chunks of :data:`CHUNK` trajectories; sample ``i``
    depends only on ``(seed, i)``, so the output is identical for any ``workers``.
    """
    spec.require_pure()
    if spec.layout.k != p.layout.k:
        raise EstimationError(f"spec has {spec.layout.k} modes, protocol {p.layout.k}")
    n = int(n)
    if n < 2:
        raise EstimationError("need at least two trajectories")
    delta = default_delta(p) if delta is None else float(delta)
    backend = resolve_backend(backend)
    stream = SeededStream(seed)
    bounds = [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]

    def job(b):
        return _run_chunk(spec, p, stream, b[0], b[1], delta, backend, escape_threshold)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    x0, y, dxdw, bad = (np.concatenate(a) for a in zip(*parts))
    ens = Ensemble(x0, y, dxdw, bad, delta, int(seed))
    if ens.n_escaped > MAX_ESCAPED_FRACTION * n:
        raise EstimationError(
            f"{ens.n_escaped} of {n} trajectories escaped (|x| > {escape_threshold:g} or non-finite)"
        )
    return ens


def qfi_from_ensemble(spec, ens, mask=None, config=None):
    """Monte Carlo mean and standard error of the estimator over ``ens``."""
    keep = ~ens.escaped
    b = TrajectoryBundle(ens.x0[keep], None, None, ens.dxdw[keep])
    c = per_trajectory_contribution(spec, b, mask)
    n_ok = c.size
    C = prefactor(spec.layout.k)
    value = C * np.sum(c) / n_ok
    err = C * np.std(c, ddof=1) / np.sqrt(n_ok)
    mask_t = None if mask is None else tuple(spec.layout.names[spec.layout.index(m)] for m in mask)
    return QfiEstimate(float(value), float(err), n_ok, ens.delta, mask_t, ens.n_escaped,
                       dict(config or {}))


def describe(spec, p, n, delta, seed):
    """Plain-dict echo of a run's configuration."""
    return {
        "mu": spec.mu.tolist(),
        "M": spec.M.tolist(),
        "modes": list(spec.layout.names),
        "preparation": {"model": p.preparation.model.name, **p.preparation.model.params,
                        "duration": p.t1, "step": p.preparation.h},
        "encoding": {"model": p.encoding.model.name, "duration": p.encoding.duration,
                     "step": p.encoding.h, "operating_value": p.operating_value},
        "n_trajectories": int(n),
        "delta": delta,
        "seed": int(seed),
    }


def estimate_qfi(spec, p, n, delta=None, seed=0, mask=None, workers=1, backend=None,
                 escape_threshold=1e8):
    """Trajectory estimate of the QFI of protocol ``p`` applied to ``spec``."""
    ens = simulate(spec, p, n, delta, seed, workers, backend, escape_threshold)
    return qfi_from_ensemble(spec, ens, mask, describe(spec, p, n, ens.delta, seed))


def fd_convergence_scan(spec, p, n, seed, deltas, **kwargs):
    """Re-run :func:`estimate_qfi` over a descending list of finite-difference steps.

    Returns rows ``(delta, value, std_error)``; the shared seed means every row
    uses the same initial samples.
    """
    deltas = [float(d) for d in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly descending")
    rows = []
    for d in deltas:
        est = estimate_qfi(spec, p, n, delta=d, seed=seed, **kwargs)
        rows.append((d, est.value, est.std_error))
    return rows
