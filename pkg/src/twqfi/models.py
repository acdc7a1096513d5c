"""Truncated-Wigner drifts for the shipped preparation and encoding Hamiltonians.

All drifts are the symplectic flow ``alpha' = -i dW_H/dalpha*`` of the listed
Weyl symbol, written in quadratures (``X' = dW_H/dY``, ``Y' = -dW_H/dX``):

========================  ==============================================  =====================
model                     W_H                                             amplitude equation
========================  ==============================================  =====================
``OpoModel``              (g/2)(a*^2 e^{i th} + c.c.)                     i a' = g e^{i th} a*
``DepletionModel``        (chi/2)(a*^2 b e^{i th} + c.c.)                 i a' = chi e^{i th} b a*
                                                                          i b' = (chi/2) e^{-i th} a^2
``KerrModel``             (chi/2)(|a|^4 - 2|a|^2 + 1/2) - w0(|a|^2 - 1/2)  i a' = (chi(|a|^2-1) - w0) a
``PhaseEncoding``         omega (|a|^2 - 1/2)                             i a' = omega a
``DisplacementEncoding``  v0 i(a - a*)/sqrt(2) = -v0 Y                    X' = -v0, Y' = 0
========================  ==============================================  =====================
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import Model
from .phase_space import ModeLayout, to_amplitudes, to_quadratures

SINGLE = ModeLayout(("a",))
CAVITY_PUMP = ModeLayout(("a", "b"))


def _split(x):
    return x[..., 0], x[..., 1]


@dataclass(frozen=True)
class FreeEvolution(Model):
    """Zero drift; used as an empty preparation stage."""

    layout: ModeLayout = SINGLE
    name = "free"
    kernel = kernels.ZERO

    def drift(self, x, t=0.0):
        return np.zeros_like(np.asarray(x, dtype=float))

    def weyl_hamiltonian(self, x):
        return np.zeros(np.shape(x)[:-1])

    def flow(self, x, duration):
        return np.array(x, dtype=float)

    def kernel_params(self):
        return np.zeros(1)


@dataclass(frozen=True)
class OpoModel(Model):
    """Parametric amplification with an undepleted pump."""

    g: float = 1.0
    theta: float = 0.0
    name = "opo"
    kernel = kernels.OPO

    def drift(self, x, t=0.0):
        X, Y = _split(np.asarray(x, dtype=float))
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.stack([self.g * (s * X - c * Y), -self.g * (c * X + s * Y)], axis=-1)

    def weyl_hamiltonian(self, x):
        a = to_amplitudes(x)[..., 0]
        return self.g * np.real(np.conj(a) ** 2 * np.exp(1j * self.theta))

    def flow(self, x, duration):
        return opo_closed_form(x, self.g, self.theta, duration)

    def kernel_params(self):
        return np.array([self.g, np.cos(self.theta), np.sin(self.theta)])


@dataclass(frozen=True)
class DepletionModel(Model):
    """Degenerate parametric down-conversion with a dynamical pump (modes a, b)."""

    chi: float = 1.0
    theta: float = 0.0
    layout = CAVITY_PUMP
    name = "depletion"
    kernel = kernels.DEPLETION

    def drift(self, x, t=0.0):
        amp = to_amplitudes(x)
        a, b = amp[..., 0], amp[..., 1]
        e = np.exp(1j * self.theta)
        da = -1j * self.chi * e * b * np.conj(a)
        db = -0.5j * self.chi * np.conj(e) * a * a
        return to_quadratures(np.stack([da, db], axis=-1))

    def weyl_hamiltonian(self, x):
        amp = to_amplitudes(x)
        a, b = amp[..., 0], amp[..., 1]
        return self.chi * np.real(np.conj(a) ** 2 * b * np.exp(1j * self.theta))

    def kernel_params(self):
        return np.array([self.chi, np.cos(self.theta), np.sin(self.theta)])


@dataclass(frozen=True)
class KerrModel(Model):
    """Kerr self-phase modulation with a counter-rotation ``omega0``."""

    chi: float = 1.0
    omega0: float = 0.0
    name = "kerr"
    kernel = kernels.KERR

    @classmethod
    def without_bulk_rotation(cls, chi, alpha0):
        """Kerr model whose counter-rotation cancels the drift of ``<a>`` for ``|alpha0>``.

        Exactly, ``<a(t)> = alpha0 e^{i w0 t} exp(|alpha0|^2 (e^{-i chi t} - 1))``,
        whose phase is stationary at ``w0 = chi |alpha0|^2``.
        """
        return cls(chi=chi, omega0=chi * abs(alpha0) ** 2)

    def _rate(self, X, Y):
        return self.chi * (0.5 * (X * X + Y * Y) - 1.0) - self.omega0

    def drift(self, x, t=0.0):
        X, Y = _split(np.asarray(x, dtype=float))
        r = self._rate(X, Y)
        return np.stack([r * Y, -r * X], axis=-1)

    def weyl_hamiltonian(self, x):
        X, Y = _split(np.asarray(x, dtype=float))
        n = 0.5 * (X * X + Y * Y)
        return 0.5 * self.chi * (n * n - 2.0 * n + 0.5) - self.omega0 * (n - 0.5)

    def flow(self, x, duration):
        x = np.asarray(x, dtype=float)
        phase = self._rate(*_split(x)) * duration
        a = to_amplitudes(x) * np.exp(-1j * phase)[..., None]
        return to_quadratures(a)

    def kernel_params(self):
        return np.array([self.chi, self.omega0])


@dataclass(frozen=True)
class PhaseEncoding(Model):
    """Phase rotation of one mode at rate ``omega``."""

    omega: float = 0.0
    mode: int = 0
    layout: ModeLayout = SINGLE
    name = "phase"
    parameter = "omega"
    kernel = kernels.PHASE

    def drift(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        m = 2 * self.mode
        out[..., m] = self.omega * x[..., m + 1]
        out[..., m + 1] = -self.omega * x[..., m]
        return out

    def weyl_hamiltonian(self, x):
        x = np.asarray(x, dtype=float)
        m = 2 * self.mode
        return self.omega * (0.5 * (x[..., m] ** 2 + x[..., m + 1] ** 2) - 0.5)

    def flow(self, x, duration):
        return encoding_closed_form(x, self, duration)

    def default_delta(self, duration):
        return 1e-4 / duration if duration > 0 else 1e-4

    def kernel_params(self):
        return np.array([self.omega, float(self.mode)])


@dataclass(frozen=True)
class DisplacementEncoding(Model):
    """Displacement generated by ``-v0 * Yhat``; moves ``X`` by ``-v0`` per unit time."""

    v0: float = 0.0
    mode: int = 0
    layout: ModeLayout = SINGLE
    name = "displacement"
    parameter = "v0"
    kernel = kernels.DISPLACEMENT

    def drift(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 2 * self.mode] = -self.v0
        return out

    def weyl_hamiltonian(self, x):
        return -self.v0 * np.asarray(x, dtype=float)[..., 2 * self.mode + 1]

    def flow(self, x, duration):
        return encoding_closed_form(x, self, duration)

    def default_delta(self, duration):
        return 1e-4

    def kernel_params(self):
        return np.array([self.v0, float(self.mode)])


def opo_closed_form(x0, g, theta, t):
    """``alpha(t) = cosh(gt) alpha(0) - i e^{i theta} sinh(gt) alpha*(0)``."""
    a = to_amplitudes(x0)[..., 0]
    a_t = np.cosh(g * t) * a - 1j * np.exp(1j * theta) * np.sinh(g * t) * np.conj(a)
    return to_quadratures(a_t[..., None])


def opo_qfi_analytic(abs_alpha0, vartheta, g, theta, t1):
    """QFI per squared encoding time for a coherent state after OPO preparation."""
    n0 = abs_alpha0 ** 2
    r = 4.0 * g * t1
    return (4 * n0 + 1) * np.cosh(r) - 4 * n0 * np.sin(2 * vartheta - theta) * np.sinh(r) - 1


def encoding_closed_form(x, model, duration):
    """Exact flow of a phase or displacement encoding over ``duration``."""
    if not isinstance(model, (PhaseEncoding, DisplacementEncoding)):
        raise TypeError(f"no closed-form encoding for {type(model).__name__}")
    x = np.array(x, dtype=float)
    m = 2 * model.mode
    if isinstance(model, PhaseEncoding):
        a = (x[..., m] + 1j * x[..., m + 1]) * np.exp(-1j * model.omega * duration)
        x[..., m] = a.real
        x[..., m + 1] = a.imag
    else:
        x[..., m] = x[..., m] - model.v0 * duration
    return x


MODELS = {
    "free": FreeEvolution,
    "opo": OpoModel,
    "depletion": DepletionModel,
    "kerr": KerrModel,
    "phase": PhaseEncoding,
    "displacement": DisplacementEncoding,
}
