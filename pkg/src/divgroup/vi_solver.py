"""Smooth-fit solver for the one-line dividend variational inequality.

Solves max{ A f + h, gamma - f' } = 0 on [0, inf) with f(0) = 0, where
A f = -mu f + nu f' + (sigma^2/2) f'' and h is a nonnegative, nondecreasing,
concave source with h(0) = 0.  The solution is f = phi1 + C phi2 below a free
boundary m and affine with slope gamma above it; m is the first root of

    q(x) = phi1''(x) + ((gamma - phi1'(x)) / phi2'(x)) * phi2''(x),

which enforces f'(m) = gamma and f''(m) = 0 simultaneously.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expfun import (
    ContractViolationError,
    ExpPolyPiecewise,
    convolve_green,
)


class NoBoundaryError(RuntimeError):
    """q(x) never crossed zero inside the scan range: no smooth-fit boundary."""


class ConstructionError(RuntimeError):
    """An assembled solution violated one of its own invariants."""


@dataclass(frozen=True)
class SolverSettings:
    """Every tolerance used by the solve pipeline, in one place."""

    root_tol: float = 1e-12          # bisection width for the boundary
    smooth_fit_tol: float = 1e-8     # |f'(m) - gamma|
    curvature_fit_tol: float = 1e-6  # |f''(m)|
    concavity_tol: float = 1e-10     # f'' <= this everywhere
    ode_residual_tol: float = 1e-8   # |A f + h| on [0, m]; A f + h <= this beyond
    residual_tol: float = 1e-7       # branch check max{A f + h, gamma - f'} on the grid
    residual_points: int = 500
    admissibility_points: int = 200
    scan_step_factor: float = 0.1    # scan step = factor / theta1
    scan_range_factor: float = 200.0 # scan cap = factor / theta1
    touch_halvings: int = 20


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class OperatorCoeffs:
    """Coefficients of A f = -mu f + nu f' + (sigma^2/2) f'' plus the payout slope gamma."""

    mu: float
    nu: float
    sigma: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("mu", "nu", "sigma", "gamma"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def _disc(self) -> float:
        return math.sqrt(self.nu * self.nu + 2.0 * self.sigma * self.sigma * self.mu)

    @property
    def theta1(self) -> float:
        """Positive characteristic root of (sigma^2/2) t^2 + nu t - mu = 0."""
        return (-self.nu + self._disc) / (self.sigma * self.sigma)

    @property
    def theta2(self) -> float:
        """Magnitude of the negative root (the root itself is -theta2)."""
        return (self.nu + self._disc) / (self.sigma * self.sigma)

    def characteristic_residual(self, t: float) -> float:
        return 0.5 * self.sigma * self.sigma * t * t + self.nu * t - self.mu

    def apply(self, f: ExpPolyPiecewise) -> ExpPolyPiecewise:
        """A f as an exact piecewise exponential polynomial."""
        return (
            f.scale(-self.mu)
            .add(f.deriv().scale(self.nu))
            .add(f.deriv(2).scale(0.5 * self.sigma * self.sigma))
        )


@dataclass(frozen=True)
class VISolution:
    coeffs: OperatorCoeffs
    h: ExpPolyPiecewise
    phi1: ExpPolyPiecewise
    phi2: ExpPolyPiecewise
    m: float
    C: float
    f: ExpPolyPiecewise


def build_phi(
    coeffs: OperatorCoeffs,
    h: ExpPolyPiecewise,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> tuple[ExpPolyPiecewise, ExpPolyPiecewise]:
    """Particular solution phi1 (A phi1 = -h) and homogeneous phi2 with phi2(0)=0.

    Checks h admissibility (h(0)=0, h >= 0, h nondecreasing, h concave) on a
    grid covering all of h's breakpoints plus a 10/theta1 margin.
    """
    t1, t2 = coeffs.theta1, coeffs.theta2
    _check_source(h, t1, settings)
    phi2 = ExpPolyPiecewise.from_terms([(1.0, 0, t1), (-1.0, 0, -t2)])
    if h.is_zero:
        phi1 = ExpPolyPiecewise.zero()
    else:
        phi1 = convolve_green(h, t1, t2, coeffs.sigma)
    return phi1, phi2


def _check_source(h: ExpPolyPiecewise, theta1: float, settings: SolverSettings) -> None:
    if h.is_zero:
        return
    tol = 1e-9
    if abs(h.eval(0.0)) > tol:
        raise ContractViolationError(f"h(0) must vanish, got {h.eval(0.0):.3e}")
    hi = h.max_break + 10.0 / theta1
    xs = np.linspace(0.0, hi, settings.admissibility_points)
    vals = h.eval_many(xs)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.min(vals) < -tol * scale:
        raise ContractViolationError("h must be nonnegative")
    d1 = h.deriv().eval_many(xs)
    if np.min(d1) < -tol * scale:
        raise ContractViolationError("h must be nondecreasing")
    d2 = h.deriv(2).eval_many(xs)
    if np.max(d2) > tol * scale:
        raise ContractViolationError("h must be concave")


def find_boundary(
    coeffs: OperatorCoeffs,
    phi1: ExpPolyPiecewise,
    phi2: ExpPolyPiecewise,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> tuple[float, float]:
    """First root m of q and the matching constant C = (gamma - phi1'(m)) / phi2'(m).

    Scans forward from 0 (q(0) < 0 always) in steps of 0.1/theta1 up to
    200/theta1; a sign change is narrowed by bisection to root_tol.  If the
    scan finds no change, the step is halved up to touch_halvings times to
    catch a tangential touch before NoBoundaryError is raised.
    """
    gamma = coeffs.gamma
    p1d1, p1d2 = phi1.deriv(), phi1.deriv(2)
    p2d1, p2d2 = phi2.deriv(), phi2.deriv(2)

    def q(x: float) -> float:
        return p1d2.eval(x) + (gamma - p1d1.eval(x)) / p2d1.eval(x) * p2d2.eval(x)

    q0 = q(0.0)
    if not q0 < 0.0:
        raise ContractViolationError(f"q(0) = {q0:.3e} must be negative")
    x_max = settings.scan_range_factor / coeffs.theta1
    step = settings.scan_step_factor / coeffs.theta1
    for _ in range(settings.touch_halvings + 1):
        x_prev, q_prev = 0.0, q0
        x = step
        while x <= x_max + 0.5 * step:
            qx = q(min(x, x_max))
            if qx == 0.0:
                m = min(x, x_max)
                return m, (gamma - p1d1.eval(m)) / p2d1.eval(m)
            if q_prev < 0.0 < qx:
                lo, hi = x_prev, min(x, x_max)
                while hi - lo > settings.root_tol:
                    mid = 0.5 * (lo + hi)
                    if q(mid) > 0.0:
                        hi = mid
                    else:
                        lo = mid
                m = 0.5 * (lo + hi)
                c = (gamma - p1d1.eval(m)) / p2d1.eval(m)
                if not c > 0.0:
                    raise ConstructionError(f"boundary constant C = {c:.3e} must be positive")
                return m, c
            x_prev, q_prev = min(x, x_max), qx
            x += step
        step *= 0.5
    raise NoBoundaryError(
        f"q has no root in (0, {x_max:.6g}] (q ranges below 0 throughout the scan)"
    )


def assemble(
    coeffs: OperatorCoeffs,
    h: ExpPolyPiecewise,
    phi1: ExpPolyPiecewise,
    phi2: ExpPolyPiecewise,
    m: float,
    C: float,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> VISolution:
    """f = phi1 + C phi2 on [0, m], affine with slope gamma beyond; checks invariants."""
    gamma = coeffs.gamma
    core = phi1.add(phi2.scale(C))
    f = core.with_affine_tail(m, gamma)
    f.check_smoothness()

    def fail(check: str, value: float, tol: float) -> None:
        raise ConstructionError(f"{check}: |{value:.3e}| exceeds {tol:.1e}")

    v0 = f.eval(0.0)
    if abs(v0) > 1e-9:
        fail("f(0) = 0", v0, 1e-9)
    # smooth fit, measured on the core (left limit at m)
    d1m = core.deriv().eval(m)
    if abs(d1m - gamma) > settings.smooth_fit_tol:
        fail("f'(m) = gamma", d1m - gamma, settings.smooth_fit_tol)

    xs = np.linspace(0.0, m, settings.residual_points)
    d1 = core.deriv().eval_many(xs)
    if float(np.min(d1 - gamma)) < -settings.smooth_fit_tol:
        fail("f' >= gamma on [0, m]", float(np.min(d1 - gamma)), settings.smooth_fit_tol)
    d2 = core.deriv(2).eval_many(xs)
    # curvature checks scale with the problem: the boundary is located to
    # root_tol in x, which leaves f''(m) of order root_tol * |f'''(m)|, and
    # that grows with theta2^3 for stiff lines
    curv_scale = max(1.0, float(np.max(np.abs(d2))))
    d2m = core.deriv(2).eval(m)
    if abs(d2m) > settings.curvature_fit_tol * curv_scale:
        fail("f''(m) = 0", d2m, settings.curvature_fit_tol * curv_scale)
    if float(np.max(d2)) > settings.concavity_tol * curv_scale:
        fail("f'' <= 0", float(np.max(d2)), settings.concavity_tol * curv_scale)

    resid = coeffs.apply(f).add(h)
    below = resid.eval_many(xs)
    # absolute tolerance, widened only when the operator terms themselves are large
    scale = max(1.0, coeffs.mu * float(np.max(np.abs(f.eval_many(xs)))), float(h.eval(m)))
    worst = float(np.max(np.abs(below)))
    if worst > settings.ode_residual_tol * scale:
        fail("A f + h = 0 on [0, m]", worst, settings.ode_residual_tol * scale)
    span = max(h.max_break - m, 0.0) + 10.0 / coeffs.theta1
    beyond = resid.eval_many(np.linspace(m, m + span, settings.residual_points))
    if float(np.max(beyond)) > settings.ode_residual_tol * scale:
        fail("A f + h <= 0 beyond m", float(np.max(beyond)), settings.ode_residual_tol * scale)

    return VISolution(coeffs=coeffs, h=h, phi1=phi1, phi2=phi2, m=m, C=C, f=f)


def solve(
    coeffs: OperatorCoeffs,
    h: ExpPolyPiecewise | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> VISolution:
    """Full pipeline: build phi1/phi2, locate the boundary, assemble and check."""
    if h is None:
        h = ExpPolyPiecewise.zero()
    phi1, phi2 = build_phi(coeffs, h, settings)
    m, C = find_boundary(coeffs, phi1, phi2, settings)
    return assemble(coeffs, h, phi1, phi2, m, C, settings)
