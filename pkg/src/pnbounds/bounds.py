"""Closed-form sharp bounds on counterfactual-event probabilities.

Two regimes: bounds that use only the two marginal laws (valid for any
event), and narrower bounds that additionally assume the treatment never
lowers the outcome (available in closed form for the single-level and
all-but-one-level event families; other events go through the LP module).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import (
    ATOL,
    Assumptions,
    CausalAttributionError,
    EventSpec,
    JointProbabilityMatrix,
    MarginalPair,
    ZeroEvidenceError,
)
from .identify import gap_sequence


class UnsupportedEventError(CausalAttributionError):
    """No closed form for this event under monotonicity; use the LP route."""


class Method(Enum):
    CLOSED_FORM = "closed-form"
    LP = "lp"


@dataclass(frozen=True)
class BoundsResult:
    """Lower/upper bound pair with its assumption level and provenance.

    For monotone-consistent data, 0 <= lower <= upper <= 1 within tolerance.
    When the data contradict the monotone ordering the closed forms can
    cross; that is surfaced through ``note`` (and ``crossed``) instead of
    being clamped away.
    """

    lower: float
    upper: float
    assumptions: Assumptions
    method: Method
    witnesses: tuple[JointProbabilityMatrix, JointProbabilityMatrix] | None = field(
        default=None, compare=False
    )
    note: str | None = None

    @property
    def crossed(self) -> bool:
        return self.lower > self.upper + ATOL

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float, slack: float = ATOL) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def _check_evidence(pair: MarginalPair, event: EventSpec, y: int) -> float:
    if len(event.coeffs) != pair.levels:
        raise CausalAttributionError(
            f"event has {len(event.coeffs)} levels, marginal pair {pair.levels}"
        )
    if not 0 <= y < pair.levels:
        raise CausalAttributionError(f"evidence level {y} out of range")
    mass = pair.treated_law[y]
    if mass <= ATOL:
        raise ZeroEvidenceError(f"treated outcome level {y} has zero probability")
    return mass


def pn_bounds_marginal(pair: MarginalPair, event: EventSpec, y: int) -> BoundsResult:
    """Sharp bounds from the marginal laws alone, for any event.

    With t = treated[y] and w = sum_l c_l control[l] (the event's mass under
    the control law), the two-event probability bracket gives

        lower = max(0, (t - (1 - w)) / t),    upper = min(1, w / t).

    Both endpoints are attained by explicit joint constructions.
    """
    mass = _check_evidence(pair, event, y)
    omega = float(event.vector @ pair.control_law.probs)
    lower = min(1.0, max(0.0, (mass - (1.0 - omega)) / mass))
    upper = min(1.0, omega / mass)
    return BoundsResult(
        lower=lower,
        upper=upper,
        assumptions=Assumptions.MARGINAL_ONLY,
        method=Method.CLOSED_FORM,
    )


def _classify_monotone(event: EventSpec, y: int) -> tuple[str, int | None]:
    """Classify an event by its coefficients at levels 0..y.

    Under monotonicity the control outcome cannot exceed the treated one, so
    only the head of the coefficient vector matters given evidence y.  Head
    patterns: all zeros (event impossible), all ones (event certain),
    (1,...,1,0) (complement of the evidence level), exactly one 1 at some
    y' <= y (single level).  Anything else has no closed form.
    """
    head = event.coeffs[: y + 1]
    if all(c == 0 for c in head):
        return "impossible", None
    if all(c == 1 for c in head):
        return "certain", None
    if head == (1,) * y + (0,):
        return "noteq", None
    if sum(head) == 1:
        return "eq", head.index(1)
    return "unsupported", None


def pn_bounds_monotone(pair: MarginalPair, event: EventSpec, y: int) -> BoundsResult:
    """Sharp bounds assuming the treatment never lowers the outcome.

    Supported families given evidence y (classification looks only at
    coefficients for levels <= y, the reachable control levels):

    * complement of the evidence level:
        lower = max(0, (treated[y] - control[y]) / treated[y]),
        upper = min(1, gap_y / treated[y]);
    * single level y' < y:
        lower = max(0, (treated[y] + sum_{k<y'} treated[k]
                         - sum_{l<=y} control[l] + control[y']) / treated[y]),
        upper = min(1, control[y'] / treated[y],
                    min_{y' < k <= y} gap_k / treated[y]);
    * single level y' = y: same lower; the gap terms in the upper bound run
      over an empty range and are omitted;
    * single level y' > y: impossible given the ordering, returns [0, 0];
    * events certain given the ordering return [1, 1].

    Gaps are used unclipped: if the data contradict the monotone ordering
    the interval can cross, which is reported via ``note`` rather than
    silently clamped.
    """
    mass = _check_evidence(pair, event, y)
    treated = pair.treated_law.probs
    control = pair.control_law.probs
    kind, level = _classify_monotone(event, y)
    if kind == "unsupported":
        raise UnsupportedEventError(
            f"event {event.label!r} with evidence {y} has no closed form under "
            "monotonicity; use the LP bounds"
        )
    if kind == "impossible":
        return BoundsResult(0.0, 0.0, Assumptions.MONOTONICITY, Method.CLOSED_FORM)
    if kind == "certain":
        return BoundsResult(1.0, 1.0, Assumptions.MONOTONICITY, Method.CLOSED_FORM)
    gaps = gap_sequence(pair)
    if kind == "noteq":
        lower = max(0.0, (mass - control[y]) / mass)
        upper = min(1.0, gaps[y - 1] / mass)
    else:  # single level y' <= y
        y_prime = level
        lower = max(
            0.0,
            (mass + treated[:y_prime].sum() - control[: y + 1].sum() + control[y_prime])
            / mass,
        )
        terms = [1.0, control[y_prime] / mass]
        terms += [gaps[k - 1] / mass for k in range(y_prime + 1, y + 1)]
        upper = min(terms)
    lower = min(1.0, lower)
    upper = max(0.0, upper)
    note = None
    if lower > upper + ATOL:
        note = (
            "monotonicity falsified by data: lower bound "
            f"{lower:.6g} exceeds upper bound {upper:.6g}"
        )
    return BoundsResult(
        lower=lower,
        upper=upper,
        assumptions=Assumptions.MONOTONICITY,
        method=Method.CLOSED_FORM,
        note=note,
    )


def monotone_consistent(pair: MarginalPair) -> bool:
    """Data-checkable implication of the monotone ordering: all gaps >= 0."""
    return bool(gap_sequence(pair).gaps.min() >= -ATOL)
