"""Backend selection for the trajectory kernels.

The hot loops (RK4 over many independent trajectories) run under numba when it
is importable and ``TWQFI_BACKEND`` is unset or ``numba``.  Setting
``TWQFI_BACKEND=numpy`` forces the vectorized pure-numpy path.  The flag is
read on every call so a single process can compare both paths.
"""
import os

BACKEND_ENV = "TWQFI_BACKEND"
BACKENDS = ("numba", "numpy")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False


def resolve_backend(backend=None):
    """Return the backend name to use, honouring an explicit override."""
    name = backend or os.environ.get(BACKEND_ENV, "numba")
    name = name.strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        import numba

        return numba.njit(*args, **kwargs)

    def wrap(func):
        return func

    if args and callable(args[0]):
        return args[0]
    return wrap
