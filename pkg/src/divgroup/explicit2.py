"""Independent closed-form benchmark for one and two lines.

For a single survivor the solution is fully explicit: characteristic roots,
barrier and constant in closed form.  For two lines in the all-alive state the
particular part f1 has printed two-branch coefficients (below and above the
surviving-alone barrier of the other line's default state), built here
directly from those formulas rather than through the kernel convolution, so
agreement with the recursion is a genuine cross-check of both pipelines.
The free boundary is still located by the shared q-root procedure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .expfun import ExpPolyPiece, ExpPolyPiecewise
from .model import DefaultState, ModelParams
from .vi_solver import (
    DEFAULT_SETTINGS,
    OperatorCoeffs,
    SolverSettings,
    VISolution,
    assemble,
    find_boundary,
)

ROOT_GAP_MIN = 1e-9


class RootCollisionError(RuntimeError):
    """Characteristic roots of the two levels collide; the printed forms divide by zero."""


@dataclass(frozen=True)
class SingleSurvivorForm:
    """Closed-form one-line solution; c follows the convention without the weight factor."""

    theta1: float
    theta2: float
    m: float
    c: float
    alpha: float
    f: ExpPolyPiecewise  # weight-scaled, affine beyond m


def characteristic_roots(a: float, b: float, mu: float) -> tuple[float, float]:
    """Positive root t1 and magnitude t2 of the negative root of b^2/2 t^2 + a t - mu."""
    disc = math.sqrt(a * a + 2.0 * b * b * mu)
    return (-a + disc) / (b * b), (a + disc) / (b * b)


def single_survivor_barrier(a: float, b: float, mu: float) -> float:
    t1, t2 = characteristic_roots(a, b, mu)
    return 2.0 / (t1 + t2) * math.log(t2 / t1)


def single_survivor_form(a: float, b: float, mu: float, alpha: float) -> SingleSurvivorForm:
    """Explicit one-line solution for killing rate mu (= discount + own intensity)."""
    t1, t2 = characteristic_roots(a, b, mu)
    m = 2.0 / (t1 + t2) * math.log(t2 / t1)
    c = 1.0 / (t1 * math.exp(t1 * m) + t2 * math.exp(-t2 * m))
    core = ExpPolyPiecewise.from_terms([(alpha * c, 0, t1), (-alpha * c, 0, -t2)])
    return SingleSurvivorForm(
        theta1=t1, theta2=t2, m=m, c=c, alpha=alpha, f=core.with_affine_tail(m, alpha)
    )


@dataclass(frozen=True)
class ExplicitLine:
    """All printed constants and functions for one line of the two-line model."""

    subsidiary: int
    hat_theta1: float
    hat_theta2: float
    m_single: float       # barrier once the other line has defaulted
    c_single: float       # matching constant, weightless convention
    k_const: float
    theta1: float          # both-alive roots
    theta2: float
    m_both: float
    c_both: float
    f1: ExpPolyPiecewise   # particular part, two printed branches
    f2: ExpPolyPiecewise   # homogeneous part
    f_single: ExpPolyPiecewise
    f: ExpPolyPiecewise    # assembled both-alive component
    solution: VISolution


@dataclass(frozen=True)
class Explicit2Solution:
    lines: tuple[ExplicitLine, ExplicitLine]

    def line(self, i: int) -> ExplicitLine:
        return self.lines[i - 1]


def _build_f1(
    hat1: float, hat2: float, t1: float, t2: float,
    m_hat: float, p: float, q: float, s: float,
) -> ExpPolyPiecewise:
    """The printed two-branch particular part; breaks at the deeper barrier m_hat."""
    below = ExpPolyPiece.make([
        (p * (t1 + t2) / ((hat1 - t1) * (hat1 + t2)), 0, hat1),
        (p * (t1 + t2) / ((hat2 + t1) * (t2 - hat2)), 0, -hat2),
        (-p * (hat1 + hat2) / ((hat1 - t1) * (hat2 + t1)), 0, t1),
        (-p * (hat1 + hat2) / ((hat1 + t2) * (t2 - hat2)), 0, -t2),
    ])
    above = ExpPolyPiece.make([
        (p * (math.exp((hat1 - t1) * m_hat) - 1.0) / (hat1 - t1), 0, t1),
        (p * (1.0 - math.exp((hat1 + t2) * m_hat)) / (hat1 + t2), 0, -t2),
        (p * (math.exp(-(hat2 + t1) * m_hat) - 1.0) / (hat2 + t1), 0, t1),
        (p * (math.exp((t2 - hat2) * m_hat) - 1.0) / (t2 - hat2), 0, -t2),
        (q * math.exp(-t1 * m_hat) / t1, 0, t1),
        (-q / t1, 0, 0.0),
        (q * math.exp(t2 * m_hat) / t2, 0, -t2),
        (-q / t2, 0, 0.0),
        (-s / t1, 1, 0.0),
        (-s / (t1 * t1), 0, 0.0),
        (s * (t1 * m_hat + 1.0) * math.exp(-t1 * m_hat) / (t1 * t1), 0, t1),
        (-s / t2, 1, 0.0),
        (s / (t2 * t2), 0, 0.0),
        (s * (t2 * m_hat - 1.0) * math.exp(t2 * m_hat) / (t2 * t2), 0, -t2),
    ])
    return ExpPolyPiecewise((0.0, m_hat), (below, above))


def solve_explicit2(
    params: ModelParams, settings: SolverSettings = DEFAULT_SETTINGS
) -> Explicit2Solution:
    """Closed-form two-line solution in the all-alive state.

    Raises RootCollisionError when a both-alive characteristic root sits within
    1e-9 of the corresponding single-survivor root (the printed coefficients
    then divide by ~0); callers should fall back to the generic recursion.
    """
    if params.n != 2:
        raise ValueError("explicit two-line form needs n == 2")
    alive = DefaultState.all_alive(2)
    r = params.discount
    lam = {i: params.intensity_of(i, alive) for i in (1, 2)}
    lines = []
    for i in (1, 2):
        other = 3 - i
        a, b, alpha = params.drift[i - 1], params.vol[i - 1], params.weights[i - 1]
        zi = alive.with_default(other)
        single = single_survivor_form(a, b, r + params.intensity_of(i, zi), alpha)
        hat1, hat2, m_hat, c_hat = single.theta1, single.theta2, single.m, single.c
        t1, t2 = characteristic_roots(a, b, r + lam[1] + lam[2])
        if abs(hat1 - t1) <= ROOT_GAP_MIN or abs(t2 - hat2) <= ROOT_GAP_MIN:
            raise RootCollisionError(
                f"subsidiary {i}: root gap below {ROOT_GAP_MIN:g}; closed form unavailable"
            )
        k_const = alpha * c_hat * (
            math.exp(hat1 * m_hat) - math.exp(-hat2 * m_hat)
        ) - alpha * m_hat
        lam_bar = lam[1] * lam[2] / lam[i]
        pref = -2.0 / (b * b) * lam_bar / (t1 + t2)
        f1 = _build_f1(
            hat1, hat2, t1, t2, m_hat,
            p=pref * alpha * c_hat, q=pref * k_const, s=pref * alpha,
        )
        f1.check_smoothness()
        f2 = ExpPolyPiecewise.from_terms([(1.0, 0, t1), (-1.0, 0, -t2)])
        coeffs = OperatorCoeffs(mu=r + lam[1] + lam[2], nu=a, sigma=b, gamma=alpha)
        m_both, c_both = find_boundary(coeffs, f1, f2, settings)
        h = single.f.scale(lam_bar)
        solution = assemble(coeffs, h, f1, f2, m_both, c_both, settings)
        lines.append(ExplicitLine(
            subsidiary=i,
            hat_theta1=hat1, hat_theta2=hat2,
            m_single=m_hat, c_single=c_hat, k_const=k_const,
            theta1=t1, theta2=t2,
            m_both=m_both, c_both=c_both,
            f1=f1, f2=f2, f_single=single.f, f=solution.f,
            solution=solution,
        ))
    return Explicit2Solution(lines=(lines[0], lines[1]))
