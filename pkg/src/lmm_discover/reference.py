"""Ground-truth trajectories and dynamics for benchmark systems."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .schemes import Scheme

RTOL_REF = 1e-10
DEFAULT_REFINE = 100


class ReferenceConvergenceError(RuntimeError):
    """Two successive RK4 refinements disagree by more than the tolerance."""


@dataclass(frozen=True)
class GridFunction:
    """Values of a d-dimensional function on t_n = t0 + n*h, n = 0..N."""

    values: np.ndarray
    t0: float
    h: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError(f"grid values must have shape (N+1, d), got {v.shape}")
        if not self.h > 0:
            raise ValueError(f"mesh size must be positive, got {self.h}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.N + 1)

    def slice(self, n_end: int) -> "GridFunction":
        """Grid restricted to indices 0..n_end."""
        if not 0 <= n_end <= self.N:
            raise ValueError(f"slice end {n_end} outside 0..{self.N}")
        return GridFunction(self.values[: n_end + 1].copy(), self.t0, self.h)


@dataclass(frozen=True)
class DynamicalSystem:
    name: str
    dim: int
    f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    x0: tuple[float, ...]
    solution: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    # optional scalar kernel on a sequence of floats; integration uses it to
    # avoid per-step numpy overhead on tiny state vectors
    f_point: Callable[[Sequence[float]], Sequence[float]] | None = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        return self.f(np.asarray(x, dtype=float))


def _cubic(x: np.ndarray) -> np.ndarray:
    x1, x2 = x[..., 0], x[..., 1]
    c1, c2 = x1**3, x2**3
    return np.stack([-0.1 * c1 + 2.0 * c2, -2.0 * c1 - 0.1 * c2], axis=-1)


def _cubic_point(x):
    c1, c2 = x[0] ** 3, x[1] ** 3
    return (-0.1 * c1 + 2.0 * c2, -2.0 * c1 - 0.1 * c2)


def cubic_2d() -> DynamicalSystem:
    """Nonlinearly damped cubic oscillator started at (2, 0)."""
    return DynamicalSystem("cubic_2d", 2, _cubic, (2.0, 0.0), f_point=_cubic_point)


def linear_scalar(rate: float = 1.0, x0: float = 1.0) -> DynamicalSystem:
    """x' = rate * x with closed-form solution."""
    return DynamicalSystem(
        "linear",
        1,
        lambda x: rate * x,
        (x0,),
        solution=lambda t: (x0 * np.exp(rate * np.asarray(t)))[..., None],
        f_point=lambda x: (rate * x[0],),
    )


def rotation_2d(omega: float = 1.0) -> DynamicalSystem:
    """x' = omega * (-x2, x1) started at (1, 0); solution is (cos wt, sin wt)."""

    def f(x):
        return omega * np.stack([-x[..., 1], x[..., 0]], axis=-1)

    def sol(t):
        t = np.asarray(t)
        return np.stack([np.cos(omega * t), np.sin(omega * t)], axis=-1)

    return DynamicalSystem(
        "rotation", 2, f, (1.0, 0.0), solution=sol, f_point=lambda x: (-omega * x[1], omega * x[0])
    )


def constant_system(dim: int = 1, x0=None) -> DynamicalSystem:
    x0 = tuple(x0) if x0 is not None else (1.0,) * dim
    return DynamicalSystem("zero", dim, lambda x: np.zeros_like(x), x0)


SYSTEMS: dict[str, Callable[[], DynamicalSystem]] = {
    "cubic_2d": cubic_2d,
    "linear": linear_scalar,
    "rotation": rotation_2d,
}


def get_system(name: str) -> DynamicalSystem:
    try:
        return SYSTEMS[name]()
    except KeyError:
        raise ValueError(f"unknown system {name!r}; expected one of {', '.join(SYSTEMS)}") from None


def steps_between(t0: float, t1: float, h: float, tol: float = 1e-12) -> int:
    """Number of mesh intervals in [t0, t1]; raises if (t1 - t0)/h is not integral."""
    if not h > 0:
        raise ValueError(f"mesh size must be positive, got {h}")
    ratio = (t1 - t0) / h
    n = round(ratio)
    if n < 1 or abs(ratio - n) > tol * max(1.0, abs(ratio)):
        raise ValueError(f"(t1 - t0)/h = {ratio!r} is not a positive integer")
    return n


def rk4_grid(sys: DynamicalSystem, t0: float, t1: float, h_out: float, refine: int) -> GridFunction:
    """Classical RK4 with internal step h_out/refine, sampled every ``refine`` steps."""
    if refine < 1:
        raise ValueError(f"refine must be >= 1, got {refine}")
    n_out = steps_between(t0, t1, h_out)
    dt = h_out / refine
    if sys.f_point is not None:
        out = _rk4_point(sys.f_point, sys.x0, n_out, refine, dt)
    else:
        out = _rk4_array(sys.f, sys.x0, n_out, refine, dt)
    return GridFunction(out, t0, h_out)


def _rk4_point(f, x0, n_out: int, refine: int, dt: float) -> np.ndarray:
    out = np.empty((n_out + 1, len(x0)))
    x = [float(v) for v in x0]
    out[0] = x
    half, sixth = 0.5 * dt, dt / 6.0
    for n in range(1, n_out + 1):
        for _ in range(refine):
            k1 = f(x)
            k2 = f([a + half * b for a, b in zip(x, k1)])
            k3 = f([a + half * b for a, b in zip(x, k2)])
            k4 = f([a + dt * b for a, b in zip(x, k3)])
            x = [a + sixth * (p + 2.0 * q + 2.0 * r + s) for a, p, q, r, s in zip(x, k1, k2, k3, k4)]
        out[n] = x
    return out


def _rk4_array(f, x0, n_out: int, refine: int, dt: float) -> np.ndarray:
    x = np.array(x0, dtype=float)
    out = np.empty((n_out + 1, x.size))
    out[0] = x
    half, sixth = 0.5 * dt, dt / 6.0
    for n in range(1, n_out + 1):
        for _ in range(refine):
            k1 = f(x)
            k2 = f(x + half * k1)
            k3 = f(x + half * k2)
            k4 = f(x + dt * k3)
            x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[n] = x
    return out


def integrate_reference(
    sys: DynamicalSystem,
    t0: float,
    t1: float,
    h_out: float,
    refine: int = DEFAULT_REFINE,
    rtol: float = RTOL_REF,
) -> GridFunction:
    """Reference trajectory on the output grid, self-checked by doubling ``refine``.

    The finer of the two runs is returned.
    """
    coarse = rk4_grid(sys, t0, t1, h_out, refine)
    fine = rk4_grid(sys, t0, t1, h_out, 2 * refine)
    gap = float(np.max(np.abs(fine.values - coarse.values)))
    scale = max(1.0, float(np.max(np.abs(fine.values))))
    if not gap <= rtol * scale:
        raise ReferenceConvergenceError(
            f"RK4 refine={refine} and refine={2 * refine} differ by {gap:.3e} "
            f"(allowed {rtol * scale:.3e}); increase refine"
        )
    return fine


def exact_dynamics_on_grid(sys: DynamicalSystem, x: GridFunction) -> GridFunction:
    if x.dim != sys.dim:
        raise ValueError(f"grid has dimension {x.dim} but system {sys.name} has {sys.dim}")
    return GridFunction(sys.f(x.values), x.t0, x.h)


def truncation_on_grid(s: Scheme, x: GridFunction, f: GridFunction) -> np.ndarray:
    """Residual of exact data under the scheme, rows n = K..N (K the stencil span).

    (tau)_n = (1/h) sum_m alpha_m x_{n-m} - sum_m beta_m f_{n-m}
    """
    if x.values.shape != f.values.shape or x.h != f.h or x.t0 != f.t0:
        raise ValueError("state and dynamics must live on the same grid")
    K = s.span
    N = x.N
    if N < K:
        raise ValueError(f"grid has N={N} < {K} steps needed by {s.name}")
    ax = np.zeros((N - K + 1, x.dim))
    bf = np.zeros_like(ax)
    for m, a in enumerate(s.alpha_float()):
        if a:
            ax += a * x.values[K - m : N + 1 - m]
    for m, b in enumerate(s.beta_float()):
        if b:
            bf += b * f.values[K - m : N + 1 - m]
    return ax / x.h - bf


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def grid_to_csv(g: GridFunction, prefix: str = "x") -> str:
    """CSV with header t,x_1..x_d, preceded by a comment carrying the exact mesh."""
    buf = io.StringIO()
    buf.write(f"# t0={g.t0!r} h={g.h!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"{prefix}_{i + 1}" for i in range(g.dim)])
    for t, row in zip(g.t, g.values):
        w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
    return buf.getvalue()


def _mesh_comment(lines: list[str]) -> tuple[float, float] | None:
    for line in lines:
        fields = dict(part.split("=", 1) for part in line.lstrip("#").split() if "=" in part)
        if "t0" in fields and "h" in fields:
            try:
                return float(fields["t0"]), float(fields["h"])
            except ValueError:
                return None
    return None


def grid_from_csv(text: str) -> GridFunction:
    lines = text.splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    rows = [r for r in csv.reader(ln for ln in lines if not ln.startswith("#")) if r]
    header, data = rows[0], rows[1:]
    if header[0] != "t" or len(header) < 2:
        raise ValueError(f"expected header t,x_1..x_d, got {header}")
    if len(data) < 2:
        raise ValueError("a grid needs at least two rows to define the mesh")
    arr = np.array([[float(v) for v in r] for r in data])
    t = arr[:, 0]
    n = np.arange(len(t))
    mesh = _mesh_comment(comments)
    candidates = [mesh] if mesh else []
    for h in (float(t[1] - t[0]), float((t[-1] - t[0]) / (len(t) - 1))):
        candidates += [(float(t[0]), h), (float(t[0]), float(f"{h:.15g}"))]
    for t0, h in candidates:
        if h > 0 and np.array_equal(t0 + h * n, t):
            return GridFunction(arr[:, 1:], t0, h)
    t0, h = candidates[0] if mesh else (float(t[0]), float((t[-1] - t[0]) / (len(t) - 1)))
    if not np.allclose(t0 + h * n, t, rtol=1e-12, atol=1e-12):
        raise ValueError("time column is not equidistant")
    return GridFunction(arr[:, 1:], t0, h)
