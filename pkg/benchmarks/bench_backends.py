"""Compare the numba and numpy RK4 backends on the shipped models.

    python3 benchmarks/bench_backends.py [--trajectories N] [--steps S] [--repeat R]

Prints per-model wall time, ns per trajectory-step and the speed-up, and checks
that both backends agree to 1e-12 relative.
"""
import argparse
import time

import numpy as np

from twqfi.dynamics import Protocol, Stage, evolve
from twqfi.estimator import estimate_qfi
from twqfi.models import (CAVITY_PUMP, DepletionModel, DisplacementEncoding, KerrModel, OpoModel,
                          PhaseEncoding)
from twqfi.phase_space import GaussianWignerSpec

MODELS = {
    "opo": (OpoModel(1.0, 0.0), [10.0]),
    "depletion": (DepletionModel(1.0, 0.0), [10.0, np.sqrt(1000.0)]),
    "kerr": (KerrModel(1.0, 16.0), [4.0]),
    "phase": (PhaseEncoding(1.0), [4.0]),
    "displacement": (DisplacementEncoding(1.0), [4.0]),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    n, steps = args.trajectories, args.steps
    print(f"{'model':<14}{'numba s':>10}{'numpy s':>10}{'ns/step nb':>12}{'ns/step np':>12}{'speed-up':>10}")
    for name, (model, mu) in MODELS.items():
        mu = np.repeat(np.asarray(mu, dtype=float), 2) / np.sqrt(2)
        x0 = mu + 0.7 * rng.normal(size=(n, model.layout.dim))
        evolve(model, x0[:10], 0.0, 0.01, 0.01, backend="numba")  # compile
        t_nb, a = best_of(lambda: evolve(model, x0, 0.0, 0.08, 0.08 / steps, backend="numba"), args.repeat)
        t_np, b = best_of(lambda: evolve(model, x0, 0.0, 0.08, 0.08 / steps, backend="numpy"), args.repeat)
        if not np.allclose(a, b, rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        per = 1e9 / (n * steps)
        print(f"{name:<14}{t_nb:>10.3f}{t_np:>10.3f}{t_nb * per:>12.2f}{t_np * per:>12.2f}{t_np / t_nb:>10.1f}")

    spec = GaussianWignerSpec.coherent([10.0, np.sqrt(1000.0)], CAVITY_PUMP)
    p = Protocol(Stage(DepletionModel(1.0), 0.08), Stage(PhaseEncoding(layout=CAVITY_PUMP), 1.0))
    m = max(n // 10, 2)
    for backend in ("numba", "numpy"):
        t, est = best_of(lambda: estimate_qfi(spec, p, m, seed=0, backend=backend), 1)
        print(f"estimate_qfi depletion, N={m}, 1000 steps/stage, {backend}: {t:.2f} s  ({est})")


if __name__ == "__main__":
    main()
