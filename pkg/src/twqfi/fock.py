"""Exact reference in a truncated Fock basis.

States are dense amplitude arrays with one axis per mode.  Propagation uses the
eigendecomposition of the (time-independent) Hamiltonian when the Hilbert space
is small and RK4 on the state vector otherwise; both are checked for norm
drift and for population leaking into the truncation edge.
"""
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.special import gammaln

NORM_TOL = 1e-9
TAIL_TOL = 1e-8
TAIL_LEVELS = 3
EIG_MAX_DIM = 1600


class TruncationError(RuntimeError):
    """Raised when the truncated basis is too small or the norm drifts."""


def destroy(n):
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def number(n):
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def quadrature_x(n):
    a = destroy(n)
    return (a + a.conj().T) / np.sqrt(2.0)


def quadrature_y(n):
    """``(a - a^dag) / (i sqrt 2)``, so ``<Y> = sqrt(2) Im(alpha)`` as in phase space."""
    a = destroy(n)
    return -1j * (a - a.conj().T) / np.sqrt(2.0)


def embed(op, mode, dims):
    """Lift a single-mode operator onto the tensor product space ``dims``."""
    mats = [op if j == mode else np.eye(d, dtype=complex) for j, d in enumerate(dims)]
    return reduce(np.kron, mats)


@dataclass
class FockState:
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if abs(self.norm - 1.0) > NORM_TOL:
            raise TruncationError(f"state norm {self.norm:.15f} outside 1 +- {NORM_TOL:g}")

    @property
    def dims(self):
        return self.amplitudes.shape

    @property
    def vector(self):
        return self.amplitudes.reshape(-1)

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def populations(self, mode=0):
        p = np.abs(self.amplitudes) ** 2
        axes = tuple(j for j in range(p.ndim) if j != mode)
        return p.sum(axis=axes) if axes else p

    def tail_population(self):
        """Largest marginal population in the top levels of any mode."""
        return max(float(self.populations(m)[-TAIL_LEVELS:].sum()) for m in range(len(self.dims)))

    def check_tail(self, tol=TAIL_TOL):
        tail = self.tail_population()
        if tail >= tol:
            raise TruncationError(f"truncation tail population {tail:.3g} >= {tol:g}; raise n_cut")
        return self


def coherent_state(alpha0, n_cut, tail_tol=1e-10):
    """Coherent state ``|alpha0>`` on ``n_cut`` levels, renormalised."""
    n = np.arange(n_cut)
    alpha0 = complex(alpha0)
    if alpha0 == 0:
        c = np.zeros(n_cut, dtype=complex)
        c[0] = 1.0
        return FockState(c)
    log_mag = -0.5 * abs(alpha0) ** 2 + n * np.log(abs(alpha0)) - 0.5 * gammaln(n + 1)
    c = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha0))
    deficit = 1.0 - np.sum(np.abs(c) ** 2)
    if deficit > tail_tol:
        raise TruncationError(f"coherent state |{alpha0}> loses {deficit:.3g} beyond n_cut={n_cut}")
    return FockState(c / np.linalg.norm(c))


def product_state(*states):
    amp = reduce(np.multiply.outer, [s.amplitudes for s in states])
    return FockState(amp)


def opo_hamiltonian(n, g, theta):
    a = destroy(n)
    ad = a.conj().T
    return 0.5 * g * (ad @ ad * np.exp(1j * theta) + a @ a * np.exp(-1j * theta))


def kerr_hamiltonian(n, chi, omega0):
    k = np.arange(n, dtype=float)
    return np.diag(0.5 * chi * k * (k - 1) - omega0 * k).astype(complex)


def depletion_hamiltonian(na, nb, chi, theta):
    a = embed(destroy(na), 0, (na, nb))
    b = embed(destroy(nb), 1, (na, nb))
    ad = a.conj().T
    bd = b.conj().T
    return 0.5 * chi * (ad @ ad @ b * np.exp(1j * theta) + np.exp(-1j * theta) * bd @ a @ a)


def _rk4_propagate(H, psi, duration, step):
    n = max(1, int(np.ceil(abs(duration) / step - 1e-12)))
    h = duration / n

    def f(v):
        return -1j * (H @ v)

    for _ in range(n):
        k1 = f(psi)
        k2 = f(psi + 0.5 * h * k1)
        k3 = f(psi + 0.5 * h * k2)
        k4 = f(psi + h * k3)
        psi = psi + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def evolve_exact(hamiltonian, state, duration, step=None):
    """Solve ``i d|psi>/dt = H |psi>`` for ``duration``.

    ``hamiltonian`` is a matrix on the flattened space or a callable taking the
    state's dims.  ``step`` forces RK4 with that step; otherwise the exact
    eigendecomposition is used up to :data:`EIG_MAX_DIM` states.
    """
    H = hamiltonian(state.dims) if callable(hamiltonian) else np.asarray(hamiltonian)
    dim = state.vector.size
    if H.shape != (dim, dim):
        raise ValueError(f"Hamiltonian shape {H.shape} does not match state dimension {dim}")
    if np.max(np.abs(H - H.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(H))):
        raise ValueError("Hamiltonian is not Hermitian")
    if duration == 0:
        return FockState(state.amplitudes.copy())
    psi = state.vector
    if step is None and dim <= EIG_MAX_DIM:
        E, V = np.linalg.eigh(H)
        psi = V @ (np.exp(-1j * E * duration) * (V.conj().T @ psi))
    else:
        psi = _rk4_propagate(H, psi, duration, step or 1e-3)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise TruncationError(f"norm drifted to {norm:.15f} during propagation")
    return FockState(psi.reshape(state.dims)).check_tail()


_OPERATORS = {"n": number, "x": quadrature_x, "y": quadrature_y}


def operator(name, dims, mode=0):
    """Named single-mode operator (``n``, ``n2``, ``x``, ``y``) lifted onto ``dims``."""
    if name == "n2":
        op = number(dims[mode]) @ number(dims[mode])
    elif name in _OPERATORS:
        op = _OPERATORS[name](dims[mode])
    else:
        raise ValueError(f"unknown operator {name!r}")
    return embed(op, mode, dims)


def expectation(state, op):
    psi = state.vector
    return float(np.real(np.vdot(psi, op @ psi)))


def exact_moments(state, name, mode=0):
    """``<psi| O |psi>`` for ``O`` in {n, n2, x, y}."""
    return expectation(state, operator(name, state.dims, mode))


def variance(state, op, mode=0):
    if isinstance(op, str):
        op = operator(op, state.dims, mode)
    psi = state.vector
    v = op @ psi
    mean = np.vdot(psi, v).real
    return float(np.vdot(v, v).real - mean ** 2)


def qfi_unitary_generator(state, G, mode=0):
    """``4 Var(G)`` for a pure state; ``G`` is a name or a matrix."""
    return 4.0 * variance(state, G, mode)


@dataclass
class FockProtocol:
    """Preparation under ``preparation`` for ``t1``, then ``H0 + omega * generator`` for ``dt``."""

    initial: FockState
    preparation: np.ndarray
    t1: float
    generator: np.ndarray
    dt: float = 1.0
    encoding_offset: np.ndarray = None

    def prepared(self):
        return evolve_exact(self.preparation, self.initial, self.t1)

    def encoded(self, omega, prepared=None):
        psi = self.prepared() if prepared is None else prepared
        H = omega * self.generator
        if self.encoding_offset is not None:
            H = H + self.encoding_offset
        return evolve_exact(H, psi, self.dt)


def qfi_fidelity(protocol, omega_op=0.0, delta=1e-3):
    """``8 (1 - |<psi(w - d/2)|psi(w + d/2)>|) / d^2`` from two encoded states."""
    if not delta >= 1e-6:
        raise ValueError(f"delta={delta:g} is below the roundoff floor of the overlap")
    base = protocol.prepared()
    plus = protocol.encoded(omega_op + 0.5 * delta, base).vector
    minus = protocol.encoded(omega_op - 0.5 * delta, base).vector
    overlap = abs(np.vdot(minus, plus)) / (np.linalg.norm(plus) * np.linalg.norm(minus))
    return 8.0 * (1.0 - overlap) / delta ** 2
