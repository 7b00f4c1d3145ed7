"""Exact calculus for piecewise exponential polynomials.

Functions here are finite sums of terms c * x^k * exp(theta*x) on intervals
between breakpoints; the family is closed under addition, scaling,
differentiation, antidifferentiation, shifting, and the two-sided exponential
kernel convolution used to produce particular solutions of the dividend ODEs.
All operations are closed form, so solver output carries no quadrature error.

Rate collisions: when an input rate falls within RATE_SNAP of a kernel root
the resonant limit form (an extra power of x) is used, which is exact.  Gaps
slightly above RATE_SNAP (up to roughly 1e-5) are the usual ill-conditioned
zone of confluent exponentials: coefficients grow like 1/gap^(k+1) and
cancellation eats precision.  Realistic parameter sets keep characteristic
roots well separated.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

COEFF_EPS = 1e-300  # terms with |coeff| below this are dropped
RATE_SNAP = 1e-9    # rate gap below which the resonant (extra power) form is used
EXP_ARG_LIMIT = 700.0


class EvaluationRangeError(ValueError):
    """Evaluation requested where an exponential term would overflow (theta*x > 700)."""


class ContractViolationError(ValueError):
    """An input broke a documented precondition (e.g. h(0) != 0)."""


@dataclass(frozen=True)
class ExpPolyTerm:
    coeff: float
    power: int
    rate: float

    def __post_init__(self) -> None:
        if self.power < 0:
            raise ValueError("power must be a nonnegative integer")


def _canonical_terms(triples: Iterable[tuple[float, int, float]]) -> tuple[ExpPolyTerm, ...]:
    acc: dict[tuple[float, int], float] = {}
    for c, k, th in triples:
        key = (float(th), int(k))
        acc[key] = acc.get(key, 0.0) + float(c)
    terms = [
        ExpPolyTerm(c, k, th)
        for (th, k), c in sorted(acc.items())
        if abs(c) >= COEFF_EPS
    ]
    return tuple(terms)


def _guard_arg(rate: float, x: float) -> float:
    arg = rate * x
    if arg > EXP_ARG_LIMIT:
        raise EvaluationRangeError(f"exp({arg:.3g}) would overflow at x={x:.6g}")
    return arg


@dataclass(frozen=True)
class ExpPolyPiece:
    """Canonical sum of c * x^k * exp(theta*x) terms on one interval."""

    terms: tuple[ExpPolyTerm, ...]

    @classmethod
    def make(cls, triples: Iterable[tuple[float, int, float]]) -> "ExpPolyPiece":
        return cls(_canonical_terms(triples))

    def eval(self, x: float) -> float:
        total = 0.0
        for t in self.terms:
            total += t.coeff * x**t.power * math.exp(_guard_arg(t.rate, x))
        return total

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        out = np.zeros_like(xs, dtype=float)
        for t in self.terms:
            args = t.rate * xs
            if np.any(args > EXP_ARG_LIMIT):
                raise EvaluationRangeError(f"exp overflow for rate {t.rate:.6g}")
            out += t.coeff * xs**t.power * np.exp(args)
        return out

    def deriv(self) -> "ExpPolyPiece":
        triples: list[tuple[float, int, float]] = []
        for t in self.terms:
            if t.power >= 1:
                triples.append((t.coeff * t.power, t.power - 1, t.rate))
            triples.append((t.coeff * t.rate, t.power, t.rate))
        return ExpPolyPiece.make(triples)

    def antideriv(self) -> "ExpPolyPiece":
        triples: list[tuple[float, int, float]] = []
        for t in self.terms:
            triples.extend(_antideriv_mono(t.coeff, t.power, t.rate))
        return ExpPolyPiece.make(triples)

    def scale(self, c: float) -> "ExpPolyPiece":
        return ExpPolyPiece.make((t.coeff * c, t.power, t.rate) for t in self.terms)

    def plus(self, other: "ExpPolyPiece") -> "ExpPolyPiece":
        return ExpPolyPiece.make(
            [(t.coeff, t.power, t.rate) for t in self.terms]
            + [(t.coeff, t.power, t.rate) for t in other.terms]
        )

    @property
    def is_zero(self) -> bool:
        return not self.terms


def _antideriv_mono(c: float, k: int, rate: float) -> list[tuple[float, int, float]]:
    """Termwise antiderivative of c * u^k * exp(rate*u)."""
    if rate == 0.0:
        return [(c / (k + 1), k + 1, 0.0)]
    out = []
    fall = 1.0  # k!/(k-j)!
    for j in range(k + 1):
        out.append((c * (-1.0) ** j * fall / rate ** (j + 1), k - j, rate))
        fall *= k - j
    return out


def _eval_triples(triples: Sequence[tuple[float, int, float]], x: float) -> float:
    total = 0.0
    for c, k, th in triples:
        total += c * x**k * math.exp(_guard_arg(th, x))
    return total


def _int_pow_exp(k: int, rate: float, lo: float, hi: float) -> float:
    """Definite integral of u^k * exp(rate*u) over [lo, hi], cancellation-safe."""
    if rate == 0.0:
        return (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)
    span_arg = abs(rate) * max(abs(lo), abs(hi))
    if span_arg < 0.25:
        # closed form loses ~all digits here; the series converges in a few terms
        total = 0.0
        fact = 1.0
        for m in range(0, 60):
            if m > 0:
                fact *= m
            term = rate**m / fact * (hi ** (k + m + 1) - lo ** (k + m + 1)) / (k + m + 1)
            total += term
            if abs(term) < 1e-18 * (abs(total) + 1e-30) and m > 4:
                break
        return total
    anti = _antideriv_mono(1.0, k, rate)
    return _eval_triples(anti, hi) - _eval_triples(anti, lo)


@dataclass(frozen=True)
class ExpPolyPiecewise:
    """Piecewise exponential polynomial on [0, inf).

    ``pieces[j]`` applies on [breaks[j], breaks[j+1]); the final piece is
    open-ended.  Constructed value functions keep an affine final piece, so
    evaluation beyond the last barrier never touches an exponential.
    """

    breaks: tuple[float, ...]
    pieces: tuple[ExpPolyPiece, ...]

    def __post_init__(self) -> None:
        if not self.breaks or self.breaks[0] != 0.0:
            raise ValueError("breaks must start at 0.0")
        if len(self.breaks) != len(self.pieces):
            raise ValueError("need exactly one piece per breakpoint")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breaks must be strictly ascending")

    @classmethod
    def zero(cls) -> "ExpPolyPiecewise":
        return cls((0.0,), (ExpPolyPiece(()),))

    @classmethod
    def from_terms(cls, triples: Iterable[tuple[float, int, float]]) -> "ExpPolyPiecewise":
        return cls((0.0,), (ExpPolyPiece.make(triples),))

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for p in self.pieces)

    @property
    def max_break(self) -> float:
        return self.breaks[-1]

    def piece_index(self, x: float) -> int:
        if x < 0.0:
            raise ValueError(f"domain is [0, inf), got x={x}")
        return max(bisect_right(self.breaks, x) - 1, 0)

    def eval(self, x: float) -> float:
        return self.pieces[self.piece_index(x)].eval(x)

    __call__ = eval

    def eval_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.size and xs.min() < 0.0:
            raise ValueError("domain is [0, inf)")
        idx = np.searchsorted(self.breaks, xs, side="right") - 1
        idx = np.clip(idx, 0, len(self.pieces) - 1)
        out = np.empty_like(xs)
        for j, piece in enumerate(self.pieces):
            sel = idx == j
            if np.any(sel):
                out[sel] = piece.eval_many(xs[sel])
        return out

    def deriv(self, order: int = 1) -> "ExpPolyPiecewise":
        if order not in (1, 2, 3):
            raise ValueError("order must be 1, 2, or 3")
        pieces = self.pieces
        for _ in range(order):
            pieces = tuple(p.deriv() for p in pieces)
        return ExpPolyPiecewise(self.breaks, pieces)

    def antideriv(self) -> "ExpPolyPiecewise":
        """Continuous antiderivative vanishing at 0 (per-piece constants chained)."""
        pieces = []
        offset = 0.0
        for j, piece in enumerate(self.pieces):
            anti = piece.antideriv()
            lo = self.breaks[j]
            shift = offset - anti.eval(lo)
            pieces.append(ExpPolyPiece.make(
                [(t.coeff, t.power, t.rate) for t in anti.terms] + [(shift, 0, 0.0)]
            ))
            if j + 1 < len(self.pieces):
                offset = pieces[-1].eval(self.breaks[j + 1])
        return ExpPolyPiecewise(self.breaks, tuple(pieces))

    def scale(self, c: float) -> "ExpPolyPiecewise":
        return ExpPolyPiecewise(self.breaks, tuple(p.scale(c) for p in self.pieces))

    def add(self, other: "ExpPolyPiecewise") -> "ExpPolyPiecewise":
        breaks = tuple(sorted(set(self.breaks) | set(other.breaks)))
        pieces = tuple(
            self.pieces[self.piece_index(b)].plus(other.pieces[other.piece_index(b)])
            for b in breaks
        )
        return ExpPolyPiecewise(breaks, pieces)

    def shift_truncate(self, a: float) -> "ExpPolyPiecewise":
        """g(x) = f(x + a) for a >= 0; breakpoints below a are consumed."""
        if a < 0.0:
            raise ValueError("shift must be >= 0")
        if a == 0.0:
            return self
        new_breaks = [0.0]
        new_pieces = [None]
        for b, piece in zip(self.breaks, self.pieces):
            if b - a > 0.0:
                new_breaks.append(b - a)
                new_pieces.append(_shift_piece(piece, a))
        new_pieces[0] = _shift_piece(self.pieces[self.piece_index(a)], a)
        return ExpPolyPiecewise(tuple(new_breaks), tuple(new_pieces))

    def with_affine_tail(self, cut: float, slope: float) -> "ExpPolyPiecewise":
        """Keep pieces on [0, cut), then continue affinely from (cut, f(cut))."""
        if cut <= 0.0:
            raise ValueError("cut must be > 0")
        anchor = self.eval(cut)
        breaks = [b for b in self.breaks if b < cut] + [cut]
        pieces = [self.pieces[self.piece_index(b)] for b in breaks[:-1]]
        pieces.append(ExpPolyPiece.make([(anchor - slope * cut, 0, 0.0), (slope, 1, 0.0)]))
        return ExpPolyPiecewise(tuple(breaks), tuple(pieces))

    def check_smoothness(self, c0_rel: float = 1e-9, c1_abs: float = 1e-8) -> None:
        """Raise if any interior breakpoint is not C0/C1 within tolerance."""
        d = self.deriv()
        for j in range(1, len(self.breaks)):
            b = self.breaks[j]
            left, right = self.pieces[j - 1].eval(b), self.pieces[j].eval(b)
            scale = max(abs(left), abs(right), 1.0)
            if abs(left - right) > c0_rel * scale:
                raise ContractViolationError(
                    f"discontinuity {left - right:.3e} at breakpoint {b:.6g}"
                )
            dleft, dright = d.pieces[j - 1].eval(b), d.pieces[j].eval(b)
            if abs(dleft - dright) > c1_abs * max(1.0, abs(dleft), abs(dright)):
                raise ContractViolationError(
                    f"derivative jump {dleft - dright:.3e} at breakpoint {b:.6g}"
                )

    def to_dict(self) -> dict:
        return {
            "breaks": list(self.breaks),
            "pieces": [[[t.coeff, t.power, t.rate] for t in p.terms] for p in self.pieces],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExpPolyPiecewise":
        return cls(
            tuple(float(b) for b in doc["breaks"]),
            tuple(ExpPolyPiece.make((c, int(k), th) for c, k, th in piece) for piece in doc["pieces"]),
        )


def _shift_piece(piece: ExpPolyPiece, a: float) -> ExpPolyPiece:
    triples: list[tuple[float, int, float]] = []
    for t in piece.terms:
        boost = math.exp(_guard_arg(t.rate, a))
        coeff = t.coeff * boost
        # (x+a)^k expanded binomially
        binom = 1.0
        for j in range(t.power, -1, -1):
            triples.append((coeff * binom * a ** (t.power - j), j, t.rate))
            binom *= j / (t.power - j + 1.0)
    return ExpPolyPiece.make(triples)


def convolve_green(
    h: ExpPolyPiecewise, theta1: float, theta2: float, sigma: float
) -> ExpPolyPiecewise:
    """Exact particular solution phi with A phi = -h for the two-root kernel.

    phi(x) = -2/(sigma^2 (theta1+theta2)) * int_0^x h(u) (e^{theta1 (x-u)} -
    e^{-theta2 (x-u)}) du, computed term by term in closed form.  The result
    shares h's breakpoints.  Rates within RATE_SNAP of theta1 (or -theta2)
    take the resonant limit form with one extra power of x.

    Requires theta1, theta2, sigma > 0 and h(0) = 0 (within 1e-9); phi then
    satisfies phi(0) = phi'(0) = phi''(0) = 0.
    """
    if not (theta1 > 0.0 and theta2 > 0.0 and sigma > 0.0):
        raise ValueError("theta1, theta2, sigma must all be > 0")
    if abs(h.eval(0.0)) > 1e-9:
        raise ContractViolationError(f"h(0) must vanish, got {h.eval(0.0):.3e}")
    pref = -2.0 / (sigma * sigma * (theta1 + theta2))

    out_pieces: list[ExpPolyPiece] = []
    acc1 = 0.0  # running int h(u) e^{-theta1 u} du over completed segments
    acc2 = 0.0  # running int h(u) e^{+theta2 u} du over completed segments
    last = len(h.pieces) - 1
    for j, piece in enumerate(h.pieces):
        lo = h.breaks[j]
        triples: list[tuple[float, int, float]] = [
            (pref * acc1, 0, theta1),
            (-pref * acc2, 0, -theta2),
        ]
        for t in piece.terms:
            # e^{theta1 x} side: integrand  c u^k e^{(rate-theta1) u}
            gap1 = t.rate - theta1
            snap1 = abs(gap1) < RATE_SNAP
            anti1 = _antideriv_mono(t.coeff, t.power, 0.0 if snap1 else gap1)
            rate_out1 = theta1 if snap1 else t.rate
            for c, k, _ in anti1:
                triples.append((pref * c, k, rate_out1))
            lo_val1 = _eval_triples(anti1, lo)
            triples.append((-pref * lo_val1, 0, theta1))
            # e^{-theta2 x} side: integrand  c u^k e^{(rate+theta2) u}, global minus sign
            gap2 = t.rate + theta2
            snap2 = abs(gap2) < RATE_SNAP
            anti2 = _antideriv_mono(t.coeff, t.power, 0.0 if snap2 else gap2)
            rate_out2 = -theta2 if snap2 else t.rate
            for c, k, _ in anti2:
                triples.append((-pref * c, k, rate_out2))
            lo_val2 = _eval_triples(anti2, lo)
            triples.append((pref * lo_val2, 0, -theta2))
            if j < last:
                hi = h.breaks[j + 1]
                acc1 += t.coeff * _int_pow_exp(t.power, 0.0 if snap1 else gap1, lo, hi)
                acc2 += t.coeff * _int_pow_exp(t.power, 0.0 if snap2 else gap2, lo, hi)
        out_pieces.append(ExpPolyPiece.make(triples))
    return ExpPolyPiecewise(h.breaks, tuple(out_pieces))
