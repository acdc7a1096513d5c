"""Model contract, fixed-step RK4 integration and the forward/rewind protocol.

A protocol is a preparation stage on ``[0, t1]`` followed by an encoding stage
on ``[t1, t2]`` whose model carries the single estimated parameter.  Rewinding
always integrates the encoding stage back at the operating value, then the
preparation stage, with step sequences that mirror the forward pass.
"""
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._backend import resolve_backend
from .phase_space import ModeLayout

DEFAULT_STEPS_PER_STAGE = 1000


class IntegrationError(RuntimeError):
    """Non-finite values met during integration."""

    def __init__(self, message, t=None, x=None, value=None):
        super().__init__(message)
        self.t = t
        self.x = x
        self.value = value


class Model:
    """Autonomous drift on the quadratures of ``layout``.

    Subclasses are frozen dataclasses implementing ``drift`` vectorized over
    leading axes.  Optional hooks: ``weyl_hamiltonian`` (whose symplectic flow
    the drift must equal), ``flow`` (closed-form solution), and ``kernel`` plus
    ``kernel_params`` for the compiled path.  Encoding models name their one
    estimable scalar in ``parameter``.
    """

    layout = ModeLayout()
    kernel = None
    parameter = None
    name = "model"

    def drift(self, x, t=0.0):
        raise NotImplementedError

    def weyl_hamiltonian(self, x):
        raise NotImplementedError

    def flow(self, x, duration):
        raise NotImplementedError

    def kernel_params(self):
        raise NotImplementedError

    @property
    def has_hamiltonian(self):
        return type(self).weyl_hamiltonian is not Model.weyl_hamiltonian

    @property
    def has_flow(self):
        return type(self).flow is not Model.flow

    @property
    def params(self):
        if dataclasses.is_dataclass(self):
            return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                    if f.name not in ("layout", "mode")}
        return {}

    def with_parameter(self, value):
        if self.parameter is None:
            raise TypeError(f"{type(self).__name__} has no encodable parameter")
        return dataclasses.replace(self, **{self.parameter: float(value)})


def step_schedule(t0, t1, h):
    """Signed step sizes carrying ``t0`` to ``t1`` exactly.

    Forward schedules use full steps of ``h`` with one shortened final step.
    A backward schedule is the forward schedule over the same interval,
    reversed and negated, so a rewind retraces the forward steps.
    """
    if not h > 0:
        raise ValueError(f"step magnitude must be positive, got {h}")
    span = abs(t1 - t0)
    if span == 0:
        return np.empty(0)
    n = max(1, math.ceil(span / h * (1.0 - 1e-12)))
    steps = np.full(n, float(h))
    steps[-1] = span - (n - 1) * h
    if t1 < t0:
        steps = -steps[::-1]
    return steps


def _rk4(f, x, t, h):
    k1 = f(x, t)
    k2 = f(x + 0.5 * h * k1, t + 0.5 * h)
    k3 = f(x + 0.5 * h * k2, t + 0.5 * h)
    k4 = f(x + h * k3, t + h)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(model, x, t, h):
    """One classical RK4 step of signed size ``h``."""
    if h == 0:
        raise ValueError("step size must be non-zero")
    x = model.layout.check(x)

    def f(y, s):
        with np.errstate(over="ignore", invalid="ignore"):
            d = np.asarray(model.drift(y, s), dtype=float)
        if not np.all(np.isfinite(d)):
            raise IntegrationError(f"non-finite drift at t={s}", t=s, x=np.array(y))
        return d

    return _rk4(f, x, t, h)


def evolve(model, x0, t0, t1, h, backend=None, check=True):
    """Integrate ``x0`` from ``t0`` to ``t1`` with RK4 steps of magnitude ``h``.

    ``x0`` may be a single point or a batch.  With ``check=False`` non-finite
    trajectories are returned as-is for the caller to count.
    """
    x = model.layout.check(x0)
    steps = step_schedule(t0, t1, h)
    if steps.size == 0:
        return x.copy()
    if resolve_backend(backend) == "numba" and model.kernel is not None:
        batch = np.ascontiguousarray(x.reshape(-1, model.layout.dim))
        out = kernels.rk4_batch(model.kernel, model.kernel_params(), batch, steps)
        out = out.reshape(x.shape)
    else:
        out = x
        t = t0
        with np.errstate(over="ignore", invalid="ignore"):
            for dt in steps:
                out = _rk4(model.drift, out, t, dt)
                t += dt
    if check and not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.all(np.isfinite(out.reshape(-1, model.layout.dim)), axis=1))
        i = int(bad[0, 0])
        raise IntegrationError(
            f"trajectory {i} became non-finite integrating {model.name} from t={t0} to t={t1}",
            t=t1, x=x.reshape(-1, model.layout.dim)[i],
        )
    return out


@dataclass(frozen=True)
class Stage:
    model: Model
    duration: float = 0.0
    step: float = None

    def __post_init__(self):
        if not self.duration >= 0 or not math.isfinite(self.duration):
            raise ValueError(f"stage duration must be finite and >= 0, got {self.duration}")
        if self.step is not None and self.duration > 0:
            if not 0 < self.step <= self.duration:
                raise ValueError(f"step {self.step} must lie in (0, duration={self.duration}]")

    @property
    def h(self):
        if self.step is not None:
            return float(self.step)
        return self.duration / DEFAULT_STEPS_PER_STAGE if self.duration > 0 else 1.0


@dataclass(frozen=True)
class Protocol:
    """Preparation then parameter encoding, evaluated around ``operating_value``.

    ``closed_form`` substitutes a model's exact flow for RK4 wherever one exists.
    """

    preparation: Stage
    encoding: Stage
    operating_value: float = 0.0
    closed_form: bool = False

    def __post_init__(self):
        if self.encoding.model.parameter is None:
            raise ValueError(f"encoding model {self.encoding.model.name} exposes no parameter")
        if self.preparation.model.layout.k != self.encoding.model.layout.k:
            raise ValueError("preparation and encoding models disagree on the number of modes")

    @property
    def layout(self):
        return self.preparation.model.layout

    @property
    def t1(self):
        return self.preparation.duration

    @property
    def t2(self):
        return self.preparation.duration + self.encoding.duration

    def encoder(self, value):
        return self.encoding.model.with_parameter(value)

    def _leg(self, model, stage, x, t0, t1, backend, check):
        if self.closed_form and model.has_flow:
            return model.flow(model.layout.check(x), t1 - t0)
        return evolve(model, x, t0, t1, stage.h, backend=backend, check=check)

    def prepare(self, x0, backend=None, check=True):
        return self._leg(self.preparation.model, self.preparation, x0, 0.0, self.t1, backend, check)

    def encode(self, y, value, backend=None, check=True):
        return self._leg(self.encoder(value), self.encoding, y, self.t1, self.t2, backend, check)

    def rewind_encoding(self, z, backend=None, check=True):
        model = self.encoder(self.operating_value)
        return self._leg(model, self.encoding, z, self.t2, self.t1, backend, check)

    def rewind_preparation(self, y, backend=None, check=True):
        return self._leg(self.preparation.model, self.preparation, y, self.t1, 0.0, backend, check)


def run_protocol(p, x0, omega, backend=None):
    """Evolve ``x0`` through preparation and encoding at parameter ``omega``."""
    return p.encode(p.prepare(x0, backend), omega, backend)


def rewind_protocol(p, x_end, backend=None):
    """Pull ``x_end`` at ``t2`` back to ``t=0`` using the operating value."""
    return p.rewind_preparation(p.rewind_encoding(x_end, backend), backend)


def check_drift_consistency(model, x, step=1e-6):
    """Largest relative mismatch between ``drift`` and the symplectic flow of the
    Weyl Hamiltonian, with derivatives from central differences."""
    x = np.atleast_2d(model.layout.check(x))
    d = np.asarray(model.drift(x), dtype=float)
    grad = np.empty_like(x)
    for j in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[j] = step
        grad[:, j] = (model.weyl_hamiltonian(x + e) - model.weyl_hamiltonian(x - e)) / (2 * step)
    # X' = dH/dY, Y' = -dH/dX for each mode
    expected = np.empty_like(grad)
    expected[:, 0::2] = grad[:, 1::2]
    expected[:, 1::2] = -grad[:, 0::2]
    worst = 0.0
    for di, ei in zip(d, expected):
        scale = max(np.max(np.abs(ei)), np.max(np.abs(di)))
        err = np.max(np.abs(di - ei))
        worst = max(worst, err / scale if scale > 1e-12 else err)
    return float(worst)
