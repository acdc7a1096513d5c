"""Scenario runners: build protocols from a validated config and tabulate results.

Every runner returns a :class:`Table`.  One row is written per grid point, and
all grid points share the configured seed, so neighbouring rows use the same
initial samples.
"""
import hashlib
import json
import math
import os
import platform
import sys
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import __version__, fock
from ._backend import resolve_backend
from .config import SCENARIOS, ConfigError
from .dynamics import Protocol, Stage
from .estimator import default_delta, describe, parametric_derivative, qfi_from_ensemble, simulate
from .models import (CAVITY_PUMP, DepletionModel, DisplacementEncoding, KerrModel,
                     OpoModel, PhaseEncoding, opo_qfi_analytic)
from .observables import number_moments, quadrature_moments
from .phase_space import GaussianWignerSpec, SeededStream, sample_initial


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, **values):
        missing = set(self.columns) - set(values)
        if missing:
            raise KeyError(f"row lacks columns {sorted(missing)}")
        self.rows.append([values[c] for c in self.columns])

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def _atomic_write(path, text):
    path = os.path.abspath(path)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, table):
    """Write ``table`` with ``%.17g`` floats and LF line endings, atomically."""
    lines = [",".join(table.columns)]
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def write_manifest(path, manifest):
    _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def manifest_for(cfg, table, csv_path):
    with open(csv_path, "rb") as fh:
        csv_sha = hashlib.sha256(fh.read()).hexdigest()
    return {
        "scenario": cfg["scenario"],
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "seed": cfg["numerics"]["seed"],
        "backend": resolve_backend(cfg["numerics"]["backend"]),
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "csv": os.path.basename(csv_path),
        "csv_sha256": csv_sha,
        "columns": table.columns,
        "n_rows": len(table.rows),
        **table.extra,
    }


# --------------------------------------------------------------------------- builders

def _alpha0(m):
    return m["alpha0"] * np.exp(1j * m["vartheta"])


def _stage(model, duration, step):
    if step is not None and duration > 0:
        step = min(step, duration)
    return Stage(model, duration, step if duration > 0 else None)


def build(cfg, t1):
    """``(spec, protocol)`` for one grid point of a validated config."""
    name = cfg["scenario"]
    m, pr = cfg["model"], cfg["protocol"]
    if name in ("opo-undepleted", "flow-field"):
        spec = GaussianWignerSpec.coherent(_alpha0(m))
        prep, enc = OpoModel(m["g"], m["theta"]), PhaseEncoding(0.0)
    elif name == "pump-depletion":
        spec = GaussianWignerSpec.coherent([_alpha0(m), m["beta0"]], CAVITY_PUMP)
        prep = DepletionModel(m["chi"], m["theta"])
        enc = PhaseEncoding(0.0, mode=0, layout=CAVITY_PUMP)
    elif name == "kerr":
        spec = GaussianWignerSpec.coherent(_alpha0(m))
        prep = (KerrModel.without_bulk_rotation(m["chi"], m["alpha0"]) if m["omega0"] is None
                else KerrModel(m["chi"], m["omega0"]))
        enc = DisplacementEncoding(0.0)
    else:
        raise ValueError(f"unknown scenario {name!r}")
    p = Protocol(_stage(prep, t1, pr["prep_step"]), _stage(enc, pr["dt"], pr["enc_step"]),
                 operating_value=pr["omega_op"], closed_form=pr["closed_form"])
    return spec, p


def _rate(cfg):
    s = SCENARIOS[cfg["scenario"]]
    return s["grid_column"], cfg["model"][s["rate_key"]]


@contextmanager
def grid_point(column, value):
    """Prefix any error raised inside with the grid point it belongs to."""
    try:
        yield
    except Exception as exc:
        if exc.args and isinstance(exc.args[0], str):
            exc.args = (f"[{column}={value:g}] {exc.args[0]}",) + exc.args[1:]
        raise


def _at(cfg, t1):
    col, rate = _rate(cfg)
    return grid_point(col, rate * t1)


def _simulate(cfg, spec, p, workers=None):
    nm = cfg["numerics"]
    return simulate(spec, p, nm["n_trajectories"], nm["delta"], nm["seed"],
                    workers or nm["workers"], nm["backend"], nm["escape_threshold"])


# --------------------------------------------------------------------------- runners

def run_opo(cfg, workers=None):
    col, g = _rate(cfg)
    m, dt = cfg["model"], cfg["protocol"]["dt"]
    t = Table([col, "qfi_tw", "qfi_tw_stderr", "qfi_analytic", "qfi_variance_method",
               "qfi_variance_method_stderr", "mean_n_a", "mean_n_a_stderr", "n_escaped"])
    for t1 in cfg["protocol"]["t1"]:
        with _at(cfg, t1):
            spec, p = build(cfg, t1)
            ens = _simulate(cfg, spec, p, workers)
            est = qfi_from_ensemble(spec, ens)
            n, n_err, var, var_err = number_moments(ens.prepared[~ens.escaped])
            t.add(**{col: g * t1}, qfi_tw=est.value, qfi_tw_stderr=est.std_error,
                  qfi_analytic=dt * dt * opo_qfi_analytic(m["alpha0"], m["vartheta"], g, m["theta"], t1),
                  qfi_variance_method=4 * dt * dt * var, qfi_variance_method_stderr=4 * dt * dt * var_err,
                  mean_n_a=n, mean_n_a_stderr=n_err, n_escaped=ens.n_escaped)
    return t


def run_depletion(cfg, workers=None):
    col, chi = _rate(cfg)
    dt = cfg["protocol"]["dt"]
    t = Table([col, "qfi_tw", "qfi_tw_stderr", "qfi_variance_method", "qfi_variance_method_stderr",
               "qfi_partial_a", "qfi_partial_a_stderr", "qfi_partial_b", "qfi_partial_b_stderr",
               "mean_n_a", "mean_n_a_stderr", "mean_n_b", "mean_n_b_stderr", "conserved_sum",
               "n_escaped"])
    for t1 in cfg["protocol"]["t1"]:
        with _at(cfg, t1):
            spec, p = build(cfg, t1)
            ens = _simulate(cfg, spec, p, workers)
            full = qfi_from_ensemble(spec, ens)
            part_a = qfi_from_ensemble(spec, ens, mask=("a",))
            part_b = qfi_from_ensemble(spec, ens, mask=("b",))
            y = ens.prepared[~ens.escaped]
            na, na_err, var_a, var_a_err = number_moments(y, 0, CAVITY_PUMP)
            nb, nb_err, _, _ = number_moments(y, 1, CAVITY_PUMP)
            t.add(**{col: chi * t1}, qfi_tw=full.value, qfi_tw_stderr=full.std_error,
                  qfi_variance_method=4 * dt * dt * var_a,
                  qfi_variance_method_stderr=4 * dt * dt * var_a_err,
                  qfi_partial_a=part_a.value, qfi_partial_a_stderr=part_a.std_error,
                  qfi_partial_b=part_b.value, qfi_partial_b_stderr=part_b.std_error,
                  mean_n_a=na, mean_n_a_stderr=na_err, mean_n_b=nb, mean_n_b_stderr=nb_err,
                  conserved_sum=na + 2 * nb, n_escaped=ens.n_escaped)
    return t


def kerr_oracle(cfg, t1):
    """Exact Fock-basis reference for one Kerr grid point.

    Returns ``(qfi, qfi_fidelity, inverse_var_x, mean_n, var_y)``; QFI values are
    per squared encoding time, i.e. with respect to the displacement ``v0 dt``.
    """
    m, nm = cfg["model"], cfg["numerics"]
    n_cut = nm["n_cut"]
    omega0 = m["chi"] * m["alpha0"] ** 2 if m["omega0"] is None else m["omega0"]
    H = fock.kerr_hamiltonian(n_cut, m["chi"], omega0)
    psi = fock.evolve_exact(H, fock.coherent_state(_alpha0(m), n_cut), t1)
    var_y = fock.variance(psi, "y")
    # H = -v0 Y moves X by -v0 dt; generator -Y, same variance as Y
    proto = fock.FockProtocol(psi, np.zeros_like(H), 0.0, -fock.quadrature_y(n_cut), dt=1.0)
    qfi_fid = fock.qfi_fidelity(proto, 0.0, 1e-3)
    return (4 * var_y, qfi_fid, 1.0 / fock.variance(psi, "x"),
            fock.exact_moments(psi, "n"), var_y)


def run_kerr(cfg, workers=None):
    col, chi = _rate(cfg)
    dt = cfg["protocol"]["dt"]
    t = Table([col, "qfi_tw", "qfi_tw_stderr", "qfi_oracle", "qfi_oracle_fidelity",
               "mom_inverse_varX", "mom_inverse_varX_tw", "qfi_variance_method",
               "qfi_variance_method_stderr", "mean_n_a", "mean_n_a_stderr", "n_escaped"])
    for t1 in cfg["protocol"]["t1"]:
        with _at(cfg, t1):
            spec, p = build(cfg, t1)
            ens = _simulate(cfg, spec, p, workers)
            est = qfi_from_ensemble(spec, ens)
            y = ens.prepared[~ens.escaped]
            _, _, var_x, _, _, _, var_y, var_y_err = quadrature_moments(y)
            n, n_err, _, _ = number_moments(y)
            q, q_fid, inv_vx, _, _ = kerr_oracle(cfg, t1)
            t.add(**{col: chi * t1}, qfi_tw=est.value / dt ** 2, qfi_tw_stderr=est.std_error / dt ** 2,
                  qfi_oracle=q, qfi_oracle_fidelity=q_fid, mom_inverse_varX=inv_vx,
                  mom_inverse_varX_tw=1.0 / var_x, qfi_variance_method=4 * var_y,
                  qfi_variance_method_stderr=4 * var_y_err, mean_n_a=n, mean_n_a_stderr=n_err,
                  n_escaped=ens.n_escaped)
    return t


def run_flow_field(cfg, workers=None):
    """Sample points with ``d/domega`` arrows in three panels.

    ``initial``: encoding applied straight to the initial state (no preparation),
    arrows are the rewound derivative.  ``prepared``: points after preparation,
    arrows are the forward derivative of the encoding there.  ``rewound``: the
    initial points again, arrows are the full-protocol derivative pulled back to
    ``t=0``; these are the arrows the estimator integrates.
    """
    col, g = _rate(cfg)
    nm = cfg["numerics"]
    t1 = cfg["protocol"]["t1"][0]
    spec, p = build(cfg, t1)
    spec0, p0 = build(cfg, 0.0)
    backend = nm["backend"]
    x0 = sample_initial(spec, SeededStream(nm["seed"]), size=nm["n_points"])
    delta = default_delta(p) if nm["delta"] is None else nm["delta"]

    initial = parametric_derivative(p0, x0, delta, backend).dxdw
    y = p.prepare(x0, backend)
    w = p.operating_value
    fwd = (p.encode(y, w + delta / 2, backend) - p.encode(y, w - delta / 2, backend)) / delta
    rewound = parametric_derivative(p, x0, delta, backend, prepared=y).dxdw

    t = Table(["panel", "index", col, "X", "Y", "dX", "dY"])
    for panel, pts, arrows in (("initial", x0, initial), ("prepared", y, fwd), ("rewound", x0, rewound)):
        for i in range(pts.shape[0]):
            t.add(panel=panel, index=i, **{col: g * (0.0 if panel == "initial" else t1)},
                  X=pts[i, 0], Y=pts[i, 1], dX=arrows[i, 0], dY=arrows[i, 1])

    qfi = {}
    for label, (s, q) in (("initial", (spec0, p0)), ("prepared", (spec, p))):
        ens = _simulate(cfg, s, q, workers)
        est = qfi_from_ensemble(s, ens)
        qfi[label] = {"value": est.value, "std_error": est.std_error}
    t.extra["qfi"] = qfi
    return t


RUNNERS = {
    "flow-field": run_flow_field,
    "opo-undepleted": run_opo,
    "pump-depletion": run_depletion,
    "kerr": run_kerr,
}


def run_scenario(cfg, workers=None):
    """Run a validated config; returns a :class:`Table`."""
    start = time.perf_counter()
    table = RUNNERS[cfg["scenario"]](cfg, workers)
    table.extra["wall_time_s"] = time.perf_counter() - start
    if "n_escaped" in table.columns:
        table.extra["n_nonfinite_trajectories"] = int(table.column("n_escaped").sum())
    spec, p = build(cfg, cfg["protocol"]["t1"][-1])
    nm = cfg["numerics"]
    table.extra.setdefault("run", describe(spec, p, nm["n_trajectories"], nm["delta"], nm["seed"]))
    bad = [r for r in table.rows for v in r if isinstance(v, float) and not math.isfinite(v)]
    table.extra["nonfinite_rows"] = len(bad)
    return table


# --------------------------------------------------------------------------- oracle

def oracle_table(cfg):
    """Exact Fock-basis reference rows tagged ``source=oracle``.

    Covers every scenario except ``flow-field``.  Raises
    :class:`twqfi.fock.TruncationError` when ``n_cut`` is too small.
    """
    name = cfg["scenario"]
    if name == "flow-field":
        raise ConfigError("flow-field has no oracle reference")
    col, rate = _rate(cfg)
    m, n_cut = cfg["model"], cfg["numerics"]["n_cut"]
    dt = cfg["protocol"]["dt"]
    t = Table(["source", col, "qfi", "mean_n_a", "var_n_a", "var_X_a", "var_Y_a"])
    for t1 in cfg["protocol"]["t1"]:
        with _at(cfg, t1):
            if name == "kerr":
                q, _, _, _, _ = kerr_oracle(cfg, t1)
                omega0 = m["chi"] * m["alpha0"] ** 2 if m["omega0"] is None else m["omega0"]
                psi = fock.evolve_exact(fock.kerr_hamiltonian(n_cut, m["chi"], omega0),
                                        fock.coherent_state(_alpha0(m), n_cut), t1)
            elif name == "opo-undepleted":
                psi = fock.evolve_exact(fock.opo_hamiltonian(n_cut, m["g"], m["theta"]),
                                        fock.coherent_state(_alpha0(m), n_cut), t1)
                q = 4 * dt * dt * fock.variance(psi, "n")
            else:
                a = fock.coherent_state(_alpha0(m), n_cut)
                b = fock.coherent_state(m["beta0"], n_cut)
                H = fock.depletion_hamiltonian(n_cut, n_cut, m["chi"], m["theta"])
                psi = fock.evolve_exact(H, fock.product_state(a, b), t1, step=min(1e-3, t1 or 1e-3))
                q = 4 * dt * dt * fock.variance(psi, "n", 0)
            t.add(source="oracle", **{col: rate * t1}, qfi=q, mean_n_a=fock.exact_moments(psi, "n"),
                  var_n_a=fock.variance(psi, "n"), var_X_a=fock.variance(psi, "x"),
                  var_Y_a=fock.variance(psi, "y"))
    return t
