"""Exact flow by inverting Psi, reference integrators and error metrics.

The exact solver uses the flow-box identity: the trajectory through ``z0`` at
time ``tau`` is the solution of ``Psi(z) = Psi(z0) + tau``.
"""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Union

import numpy as np

from .expr import is_infinite
from .kernels import wrap_angle
from .newton import FieldSpec

__all__ = [
    "Trajectory",
    "ErrorSeries",
    "FlowError",
    "exact_point",
    "exact_trajectory",
    "rk4",
    "rkf45",
    "error_series",
    "count_level_crossings",
    "wrapped",
]

MAX_SUBSTEP = 0.1
MIN_SUBSTEP = 1e-6
NEWTON_ITERS = 40


class FlowError(ArithmeticError):
    """The exact trajectory could not be continued; ``last_tau`` was reached."""

    def __init__(self, message: str, last_tau: float, last_z: complex):
        super().__init__(f"{message} (last reachable tau = {last_tau:.17g})")
        self.last_tau = last_tau
        self.last_z = last_z


def wrapped(x: float) -> float:
    """Angle difference mapped into (-pi, pi]."""
    return x - 2 * math.pi * math.ceil((x - math.pi) / (2 * math.pi))


@dataclass
class Trajectory:
    samples: list[tuple[float, complex]]
    source: str
    truncated: bool = False

    @property
    def taus(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def points(self) -> np.ndarray:
        return np.array([z for _, z in self.samples], dtype=np.complex128)

    def __len__(self):
        return len(self.samples)


# ----------------------------------------------------------------------------
# exact flow
# ----------------------------------------------------------------------------

def _solve_step(spec: FieldSpec, zc: complex, acc: complex, target: float, step: float):
    """Newton solve of ``acc + [Psi(z) - Psi(zc)] = target`` starting near ``zc``."""
    fc = spec.f(zc)
    if is_infinite(fc) or fc == 0:
        return None
    z = zc + step * fc
    tol = 1e-14 * (1 + abs(target))
    for _ in range(NEWTON_ITERS):
        inc = spec.increment(zc, z)
        fz = spec.f(z)
        if is_infinite(inc) or is_infinite(fz) or fz == 0:
            return None
        r = acc + inc - target
        z_new = z - r * fz
        if not cmath.isfinite(z_new):
            return None
        moved = abs(z_new - z)
        z = z_new
        if abs(r) <= tol or moved <= 1e-16 * (1 + abs(z)):
            break
    inc = spec.increment(zc, z)
    fz = spec.f(z)
    if is_infinite(inc) or is_infinite(fz):
        return None
    if abs(acc + inc - target) > 1e-12 * (1 + abs(target)):
        return None
    # reject a jump onto another sheet of the inverse
    if abs(z - zc) > 3 * abs(step) * max(abs(fc), abs(fz)) + 1e-15:
        return None
    return z, acc + inc


class _Continuation:
    def __init__(self, spec: FieldSpec, z0: complex, max_step: float = MAX_SUBSTEP):
        self.spec = spec
        self.max_step = max_step
        self.z = complex(z0)
        self.tau = 0.0
        self.acc = 0j  # Psi(z) - Psi(z0)

    def advance(self, tau_target: float) -> complex:
        while self.tau != tau_target:
            remaining = tau_target - self.tau
            step = math.copysign(min(self.max_step, abs(remaining)), remaining)
            while True:
                nxt = self.tau + step if abs(step) < abs(remaining) else tau_target
                res = _solve_step(self.spec, self.z, self.acc, nxt, nxt - self.tau)
                if res is not None:
                    self.z, self.acc = res
                    self.tau = nxt
                    break
                step /= 2
                if abs(step) < MIN_SUBSTEP:
                    raise FlowError("exact trajectory cannot be continued", self.tau, self.z)
        return self.z


def exact_point(spec: FieldSpec, z0: complex, tau: float) -> complex:
    """Point reached from ``z0`` after flow time ``tau``.

    Continuation in sub-steps of at most ``min(0.1, |tau|/10)``, halved on
    failure down to 1e-6.
    """
    sub = min(MAX_SUBSTEP, abs(tau) / 10) if tau else MAX_SUBSTEP
    return _Continuation(spec, z0, sub).advance(float(tau))


def exact_trajectory(spec: FieldSpec, z0: complex, taus: Iterable[float], strict: bool = False) -> Trajectory:
    """Exact samples at increasing ``taus``; stops (truncated) at the first failure."""
    cont = _Continuation(spec, z0)
    samples = []
    for t in taus:
        try:
            samples.append((float(t), cont.advance(float(t))))
        except FlowError:
            if strict:
                raise
            return Trajectory(samples, "exact", truncated=True)
    return Trajectory(samples, "exact")


# ----------------------------------------------------------------------------
# integrators
# ----------------------------------------------------------------------------

def rk4(spec: FieldSpec, z0: complex, h: float, n: int) -> Trajectory:
    """Classical fixed-step RK4 on ``dz/dtau = f(z)``.

    Complex arithmetic is the same update as on the real (Re z, Im z) system.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    f = spec.f
    z = complex(z0)
    samples = [(0.0, z)]
    for k in range(1, n + 1):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z_new = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not cmath.isfinite(z_new):
            return Trajectory(samples, f"rk4(h={h})", truncated=True)
        z = z_new
        samples.append((k * h, z))
    return Trajectory(samples, f"rk4(h={h})")


# Fehlberg 4(5) tableau
_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)


def _fehlberg_step(f, z: complex, h: float):
    k = []
    for i in range(6):
        zi = z + h * sum(a * kk for a, kk in zip(_A[i], k))
        ki = f(zi)
        if not cmath.isfinite(ki):
            return None, math.inf
        k.append(ki)
    z4 = z + h * sum(b * kk for b, kk in zip(_B4, k))
    z5 = z + h * sum(b * kk for b, kk in zip(_B5, k))
    return z4, abs(z5 - z4)


def rkf45(spec: FieldSpec, z0: complex, tau_end: float, tol: float) -> Trajectory:
    """Adaptive Runge-Kutta-Fehlberg 4(5); the 4th-order solution is propagated.

    A step is accepted when the embedded error estimate is at most ``tol``.
    """
    if tol <= 0 or tau_end <= 0:
        raise ValueError("tol and tau_end must be positive")
    h_min, h_max = 1e-12, tau_end / 4
    f = spec.f
    z, t = complex(z0), 0.0
    h = min(h_max, 0.1 * tol**0.2)
    samples = [(0.0, z)]
    while t < tau_end:
        h = min(h, tau_end - t)
        z_new, err = _fehlberg_step(f, z, h)
        if z_new is not None and err <= tol and cmath.isfinite(z_new):
            t = tau_end if tau_end - t - h <= 1e-15 * tau_end else t + h
            z = z_new
            samples.append((t, z))
        factor = 0.1 if not math.isfinite(err) else (5.0 if err == 0 else 0.9 * (tol / err) ** 0.2)
        h_next = h * min(5.0, max(0.1, factor))
        if h_next < h_min:
            if t < tau_end and (z_new is None or err > tol):
                return Trajectory(samples, f"rkf45(tol={tol})", truncated=True)
            h_next = h_min
        h = min(h_next, h_max)
    return Trajectory(samples, f"rkf45(tol={tol})")


# ----------------------------------------------------------------------------
# error metrics
# ----------------------------------------------------------------------------

@dataclass
class ErrorSeries:
    """Rows ``(tau, abs_err, rel_dev, rel_error)``; NaN marks an undefined entry."""

    rows: list[tuple[float, float, float, float]] = field(default_factory=list)

    HEADER = ("tau", "abs_err", "rel_dev", "rel_error")

    def column(self, name: str) -> np.ndarray:
        i = self.HEADER.index(name)
        return np.array([r[i] for r in self.rows])

    def write_csv(self, out: Union[str, IO[str]]) -> None:
        if isinstance(out, str):
            with open(out, "w", newline="") as fh:
                self.write_csv(fh)
            return
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.HEADER)
        for row in self.rows:
            w.writerow(["nan" if math.isnan(v) else f"{v:.17g}" for v in row])


def error_series(spec: FieldSpec, z0: complex, traj: Trajectory) -> ErrorSeries:
    """Compare a trajectory with the exact flow and with the first integral rho.

    ``rel_dev`` measures how far the exact point drifts off the level set of
    ``rho(z0)``; ``rel_error`` does the same for the trajectory's own point.
    Both are undefined (NaN) when ``rho(z0) = 0``.
    """
    rho0 = spec.rho(z0)
    defined = math.isfinite(rho0) and rho0 != 0
    cont = _Continuation(spec, z0)
    failed = False
    rows = []
    for tau, z in traj.samples:
        exact = None
        if not failed:
            try:
                exact = cont.advance(tau)
            except FlowError:
                failed = True
        if exact is None:
            abs_err = rel_dev = math.nan
        else:
            abs_err = abs(exact - z)
            rel_dev = abs(wrapped(spec.rho(exact) - rho0)) / abs(rho0) if defined else math.nan
        rho_z = spec.rho(z)
        rel_error = abs(wrapped(rho_z - rho0)) / abs(rho0) if defined and math.isfinite(rho_z) else math.nan
        rows.append((float(tau), abs_err, rel_dev, rel_error))
    return ErrorSeries(rows)


def count_level_crossings(spec: FieldSpec, center: complex, radius: float, level: float, samples: int = 720) -> int:
    """Sign changes of the wrapped ``rho - level`` around a circle.

    A change only counts when both neighbouring values lie within pi/2 of the
    level, so wrap-around jumps of the angle are not mistaken for crossings.
    Every crossing of ``level + 2*pi*k`` counts, so near a zero of high order
    the circle should be large enough that rho varies by less than 2*pi.
    """
    phis = 2 * np.pi * np.arange(samples) / samples
    pts = complex(center) + radius * np.exp(1j * phis)
    d = wrap_angle(spec.rho_array(pts) - level)
    d = d[np.isfinite(d) & (d != 0)]
    if d.size < 2:
        return 0
    nxt = np.roll(d, -1)
    half = np.pi / 2
    return int(np.sum((d * nxt < 0) & (np.abs(d) < half) & (np.abs(nxt) < half)))
