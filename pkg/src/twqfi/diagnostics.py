"""Self-checks for a configured protocol: step order, reversibility, drift symbols."""
from dataclasses import dataclass

import numpy as np

from .dynamics import check_drift_consistency, evolve
from .estimator import default_delta, fd_convergence_scan
from .phase_space import SeededStream, sample_initial

ORDER_TARGET = 4.0
ORDER_TOL = 0.3
REVERSIBILITY_TOL = 1e-8
DRIFT_TOL = 1e-6
PLATEAU_TOL = 1e-3


@dataclass
class Check:
    name: str
    value: float
    passed: bool
    detail: str = ""

    def line(self):
        flag = "ok  " if self.passed else "FAIL"
        return f"[{flag}] {self.name:<26} {self.value:<12.4g} {self.detail}"


def step_errors(model, x0, duration, counts, reference=None, backend=None):
    """Endpoint errors after ``duration`` for each number of RK4 steps in ``counts``.

    The reference is the model's exact flow when it has one, otherwise an RK4
    run with 16 times the largest step count.
    """
    if reference is None:
        if model.has_flow:
            reference = model.flow(x0, duration)
        else:
            reference = evolve(model, x0, 0.0, duration, duration / (16 * max(counts)), backend)
    errs = []
    for n in counts:
        x = evolve(model, x0, 0.0, duration, duration / n, backend)
        errs.append(float(np.max(np.abs(x - reference))))
    return np.array(errs)


def order_slope(counts, errors):
    """Least-squares slope of ``log err`` against ``log h``; ``nan`` if the errors
    sit at the roundoff floor."""
    counts = np.asarray(counts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    use = errors > 1e-12 * max(1.0, errors.max())
    use &= errors > 1e-13
    if use.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(1.0 / counts[use]), np.log(errors[use]), 1)[0])


def reversibility_residual(p, x0, backend=None):
    """``max |rewind(run(x0, omega_op)) - x0|`` over the given samples."""
    y = p.prepare(x0, backend=backend)
    z = p.encode(y, p.operating_value, backend=backend)
    back = p.rewind_preparation(p.rewind_encoding(z, backend=backend), backend=backend)
    return float(np.max(np.abs(back - x0)))


def run_checks(spec, p, n_fd=20000, n_probe=64, seed=0, backend=None, delta=None):
    """Diagnostics for one protocol; returns a list of :class:`Check`."""
    x0 = sample_initial(spec, SeededStream(seed), size=n_probe)
    checks = []

    for label, model in (("preparation", p.preparation.model),
                         ("encoding", p.encoder(p.operating_value or 0.7))):
        err = check_drift_consistency(model, x0) if model.has_hamiltonian else 0.0
        checks.append(Check(f"drift/Weyl {label}", err, err < DRIFT_TOL, model.name))

    res = reversibility_residual(p, x0, backend)
    checks.append(Check("reversibility", res, res < REVERSIBILITY_TOL,
                        f"h_prep={p.preparation.h:g} h_enc={p.encoding.h:g}"))

    if p.t1 > 0:
        counts = [8 * 2 ** j for j in range(5)]
        errs = step_errors(p.preparation.model, x0, p.t1, counts, backend=backend)
        slope = order_slope(counts, errs)
        if np.isnan(slope):
            checks.append(Check("RK4 order slope", slope, True, "errors at roundoff floor"))
        else:
            checks.append(Check("RK4 order slope", slope, abs(slope - ORDER_TARGET) <= ORDER_TOL,
                                f"steps {counts[0]}..{counts[-1]}, errors {errs[0]:.2g}..{errs[-1]:.2g}"))

    d0 = default_delta(p) if delta is None else delta
    rows = fd_convergence_scan(spec, p, n_fd, seed, [100 * d0, 10 * d0, d0, 0.1 * d0], backend=backend)
    values = np.array([r[1] for r in rows])
    scale = max(abs(values[2]), 1e-12)
    change = abs(values[3] - values[2]) / scale
    detail = "  ".join(f"{d:.0e}:{v:.6g}" for d, v, _ in rows)
    checks.append(Check("delta plateau", change, change < PLATEAU_TOL or scale <= 1e-12, detail))
    return checks
