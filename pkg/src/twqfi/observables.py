"""Symmetrically ordered moments from trajectory ensembles.

Sample averages of Weyl symbols estimate quantum expectation values.  The
symbols used here are ``n -> |alpha|^2 - 1/2`` and ``n^2 -> |alpha|^4 - |alpha|^2``;
quadratures are their own symbols.
"""
from dataclasses import dataclass

import numpy as np

from .phase_space import ModeLayout, to_amplitudes


@dataclass(frozen=True)
class EnsembleMoments:
    mode: str
    n: int
    mean_n: float
    mean_n_err: float
    var_n: float
    var_n_err: float
    mean_X: float
    mean_X_err: float
    var_X: float
    var_X_err: float
    mean_Y: float
    mean_Y_err: float
    var_Y: float
    var_Y_err: float


def _mode_amplitude(samples, mode, layout):
    samples = np.asarray(samples)
    if np.iscomplexobj(samples):
        amp = samples if samples.ndim == 1 else samples[:, mode]
    else:
        layout = layout or ModeLayout.of(samples.shape[-1] // 2)
        amp = to_amplitudes(layout.check(samples))[:, layout.index(mode)]
    if amp.shape[0] < 2:
        raise ValueError("need at least two samples")
    return amp


def number_moments(samples, mode=0, layout=None):
    """Mean and variance of ``n`` with standard errors: ``(mean, err, var, err)``.

    ``samples`` holds quadratures ``(N, 2k)`` or complex amplitudes ``(N,)`` / ``(N, k)``.
    The variance error uses the linearised per-sample influence
    ``f2 - 2 <n> f1`` of ``Var(n) = <f2> - <f1>^2``.
    """
    a = _mode_amplitude(samples, mode, layout)
    N = a.shape[0]
    r2 = a.real ** 2 + a.imag ** 2
    f1 = r2 - 0.5
    f2 = r2 * r2 - r2
    m1 = np.mean(f1)
    var = np.mean(f2) - m1 * m1
    influence = f2 - 2.0 * m1 * f1
    return (float(m1), float(np.std(f1, ddof=1) / np.sqrt(N)),
            float(var), float(np.std(influence, ddof=1) / np.sqrt(N)))


def quadrature_moments(samples, mode=0, layout=None):
    """``(mean_X, err, var_X, err, mean_Y, err, var_Y, err)`` for one mode."""
    a = _mode_amplitude(samples, mode, layout)
    N = a.shape[0]
    out = []
    for q in (np.sqrt(2.0) * a.real, np.sqrt(2.0) * a.imag):
        m = np.mean(q)
        d2 = (q - m) ** 2
        out += [float(m), float(np.std(q, ddof=1) / np.sqrt(N)),
                float(np.sum(d2) / (N - 1)), float(np.std(d2, ddof=1) / np.sqrt(N))]
    return tuple(out)


def ensemble_moments(x, layout):
    """:class:`EnsembleMoments` for every mode of a quadrature ensemble."""
    result = []
    for j, name in enumerate(layout.names):
        n_stats = number_moments(x, j, layout)
        q_stats = quadrature_moments(x, j, layout)
        result.append(EnsembleMoments(name, int(np.shape(x)[0]), *n_stats, *q_stats))
    return result


def qfi_from_generator_variance(var_G, dt=1.0):
    """``4 dt^2 Var(G)``; pass ``dt=1`` when ``G`` already includes the duration."""
    if var_G < 0:
        raise ValueError(f"generator variance must be non-negative, got {var_G}")
    return 4.0 * dt * dt * var_G
