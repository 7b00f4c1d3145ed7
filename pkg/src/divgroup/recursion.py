"""Backward induction over the default lattice.

States are processed from all-defaulted to all-alive.  For each state z and
surviving subsidiary i, the one-line VI is solved with killing rate
mu = r + sum of surviving intensities in z and source

    h_i(x) = sum over other survivors l of lambda_l(z) * f_i(x, z with l defaulted),

so each solve only needs the already-finished deeper levels.  The group value
separates across subsidiaries: f(x, z) = sum of f_i(x_i, z) over survivors.
The correlation matrix is never read here; only simulation uses it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

from .expfun import ContractViolationError, ExpPolyPiecewise
from .model import DefaultState, ModelParams, states_by_defaults, validate
from .vi_solver import (
    DEFAULT_SETTINGS,
    ConstructionError,
    NoBoundaryError,
    OperatorCoeffs,
    SolverSettings,
    VISolution,
    solve,
)

HARD_STATE_CAP = 16
WARN_STATE_CAP = 10


class SolveError(RuntimeError):
    """A per-state solve failed; the message carries (subsidiary, state) context."""


@dataclass(frozen=True)
class PolicySolution:
    """All 2^n per-state one-line solutions plus the input parameters."""

    params: ModelParams
    solutions: Mapping[tuple[int, int], VISolution]  # (subsidiary, state mask)

    def solution(self, i: int, state: DefaultState) -> VISolution:
        return self.solutions[(i, state.mask)]

    def barrier(self, i: int, state: DefaultState) -> float:
        return self.solution(i, state).m

    def component(self, i: int, state: DefaultState) -> ExpPolyPiecewise:
        return self.solution(i, state).f

    def value(self, x: Sequence[float], state: DefaultState) -> float:
        """f(x, z) = sum of surviving components; defaulted coordinates are ignored."""
        if len(x) != self.params.n:
            raise ValueError(f"x must have {self.params.n} coordinates")
        return sum(self.component(i, state).eval(float(x[i - 1])) for i in state.surviving)

    def barriers_table(self) -> list[tuple[str, int, float, float]]:
        """Rows (state bitstring, subsidiary, m, C), state mask ascending then subsidiary."""
        rows = []
        for mask in range(1 << self.params.n):
            state = DefaultState(mask, self.params.n)
            for i in state.surviving:
                sol = self.solutions[(i, mask)]
                rows.append((state.bitstring, i, sol.m, sol.C))
        return rows

    def to_dict(self) -> dict:
        per_state: dict[str, dict] = {}
        for mask in range(1 << self.params.n):
            state = DefaultState(mask, self.params.n)
            entry = {}
            for i in state.surviving:
                sol = self.solutions[(i, mask)]
                entry[str(i)] = {"m": sol.m, "C": sol.C, "f": sol.f.to_dict()}
            per_state[state.bitstring] = entry
        return per_state


def value(sol: PolicySolution, x: Sequence[float], state: DefaultState) -> float:
    return sol.value(x, state)


def solve_all(params: ModelParams, settings: SolverSettings = DEFAULT_SETTINGS) -> PolicySolution:
    """Solve every (subsidiary, state) VI by backward induction.

    Raises ValueError listing all parameter violations if the model is
    invalid, and SolveError with (subsidiary, state) context if a per-state
    solve fails.
    """
    violations = validate(params)
    if violations:
        raise ValueError("invalid model parameters:\n  " + "\n  ".join(violations))
    n = params.n
    if n > HARD_STATE_CAP:
        raise ValueError(f"n={n} exceeds the supported cap of {HARD_STATE_CAP}")
    if n > WARN_STATE_CAP:
        warnings.warn(f"n={n} means {1 << n} states; expect a slow solve", stacklevel=2)

    r = params.discount
    solutions: dict[tuple[int, int], VISolution] = {}
    for group in states_by_defaults(n):
        for state in group:
            survivors = state.surviving
            if not survivors:
                continue  # all defaulted: value is identically zero
            total_rate = sum(params.intensity_of(l, state) for l in survivors)
            for i in survivors:
                h = ExpPolyPiecewise.zero()
                for l in survivors:
                    if l == i:
                        continue
                    deeper = solutions[(i, state.with_default(l).mask)]
                    h = h.add(deeper.f.scale(params.intensity_of(l, state)))
                coeffs = OperatorCoeffs(
                    mu=r + total_rate,
                    nu=params.drift[i - 1],
                    sigma=params.vol[i - 1],
                    gamma=params.weights[i - 1],
                )
                try:
                    solutions[(i, state.mask)] = solve(coeffs, h, settings)
                except (NoBoundaryError, ContractViolationError, ConstructionError) as exc:
                    raise SolveError(
                        f"subsidiary {i}, state {state.bitstring}: {exc}"
                    ) from exc
    return PolicySolution(params=params, solutions=solutions)
