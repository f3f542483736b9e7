"""One run of a price-menu mechanism.

Ratio computation, district classification, fair randomization, price
assignment, sell decisions, and payment accounting. Everything works on
class counts: voters of the same (district, ballot type, action) are
interchangeable, so payments are computed per class and multiplied out.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .model import (
    DeltaBelowThreshold,
    MenuVariant,
    ProfileError,
    Scenario,
    q_subsets,
)

# Actions a citizen can take in step two.
S1 = "s1"
S2 = "s2"
ABSTAIN = "abstain"
ACTIONS = (S1, S2, ABSTAIN)
SLOTS = (S1, S2)

# Ballot types.
REAL = "real"
DECOY = "decoy"

# Final district status. The six-price menu prices slot-two applicants of
# outright-selected districts differently from draw-selected ones; the
# four-price menus collapse the two selected statuses.
SELECTED_OUTRIGHT = "selected_outright"
SELECTED_BY_DRAW = "selected_by_draw"
NOT_SELECTED = "not_selected"


@dataclass(frozen=True)
class ActionCount:
    """How many voters of each type in one district chose each action."""

    real_s1: int
    real_s2: int
    real_abstain: int
    decoy_s1: int
    decoy_s2: int
    decoy_abstain: int

    @property
    def real_total(self) -> int:
        return self.real_s1 + self.real_s2 + self.real_abstain

    @property
    def decoy_total(self) -> int:
        return self.decoy_s1 + self.decoy_s2 + self.decoy_abstain

    @property
    def slot1_applicants(self) -> int:
        return self.real_s1 + self.decoy_s1

    def count(self, voter_type: str, action: str) -> int:
        return getattr(self, f"{voter_type}_{action}")

    def as_tuple(self) -> tuple[int, int, int, int, int, int]:
        return (self.real_s1, self.real_s2, self.real_abstain,
                self.decoy_s1, self.decoy_s2, self.decoy_abstain)

    @classmethod
    def from_tuple(cls, t: tuple[int, int, int, int, int, int]) -> "ActionCount":
        return cls(*t)


@dataclass(frozen=True)
class CountProfile:
    """Symmetry-reduced strategy profile, one ActionCount per district."""

    per_district: tuple[ActionCount, ...]

    @classmethod
    def sigma_star(cls, s: Scenario) -> "CountProfile":
        """The target profile: every real voter in slot one, every decoy in slot two."""
        return cls(tuple(
            ActionCount(d.real_count, 0, 0, 0, d.decoy_count, 0) for d in s.districts
        ))

    @classmethod
    def from_counts(cls, counts: Iterable[tuple[int, int, int, int, int, int]]) -> "CountProfile":
        return cls(tuple(ActionCount.from_tuple(t) for t in counts))

    def as_counts(self) -> tuple[tuple[int, int, int, int, int, int], ...]:
        return tuple(ac.as_tuple() for ac in self.per_district)

    def slot1_applicants(self, k: int) -> int:
        return self.per_district[k].slot1_applicants

    def check_against(self, s: Scenario) -> None:
        """Raise ProfileError unless the profile fits the scenario's counts."""
        if len(self.per_district) != s.num_districts:
            raise ProfileError(
                f"profile covers {len(self.per_district)} districts, "
                f"scenario has {s.num_districts}"
            )
        for k, (ac, d) in enumerate(zip(self.per_district, s.districts)):
            if min(ac.as_tuple()) < 0:
                raise ProfileError(f"district {k}: negative action count")
            if ac.real_total != d.real_count:
                raise ProfileError(
                    f"district {k}: real actions sum to {ac.real_total}, "
                    f"expected {d.real_count}"
                )
            if ac.decoy_total != d.decoy_count:
                raise ProfileError(
                    f"district {k}: decoy actions sum to {ac.decoy_total}, "
                    f"expected {d.decoy_count}"
                )


@dataclass(frozen=True)
class Classification:
    """The below/at/above partition of districts around the threshold ratio.

    ratios[k] is district k's slot-one applicants divided by its real-ballot
    count; threshold is the q-th smallest ratio (with multiplicity). Districts
    strictly below are selected outright, districts at the threshold enter the
    fair draw, districts above are never selected.
    """

    ratios: tuple[Fraction, ...]
    threshold: Fraction
    below: frozenset[int]
    tied: frozenset[int]
    above: frozenset[int]

    @property
    def c(self) -> int:
        return len(self.below)

    @property
    def t(self) -> int:
        return len(self.tied)

    @property
    def o(self) -> int:
        return len(self.above)


def classify(s: Scenario, p: CountProfile) -> Classification:
    """Partition districts by their slot-one application ratio.

    Deterministic; the threshold is the q-th smallest ratio counted with
    multiplicity.
    """
    p.check_against(s)
    ratios = tuple(
        Fraction(ac.slot1_applicants, d.real_count)
        for ac, d in zip(p.per_district, s.districts)
    )
    threshold = sorted(ratios)[s.target_count - 1]
    below = frozenset(k for k, r in enumerate(ratios) if r < threshold)
    tied = frozenset(k for k, r in enumerate(ratios) if r == threshold)
    above = frozenset(k for k, r in enumerate(ratios) if r > threshold)
    return Classification(ratios, threshold, below, tied, above)


def select_districts(
    cl: Classification, q: int, rng: random.Random
) -> tuple[frozenset[int], frozenset[int]]:
    """Final selection: all below-threshold districts plus a uniform draw from the tie set.

    The draw is a Fisher-Yates prefix of length q - c over the tie set in
    ascending index order, so results are reproducible from the generator
    state alone regardless of platform.
    """
    need = q - cl.c
    assert 0 <= need <= cl.t, "classification invariant t >= q - c violated"
    pool = sorted(cl.tied)
    for i in range(need):
        j = i + rng.randrange(len(pool) - i)
        pool[i], pool[j] = pool[j], pool[i]
    drawn = frozenset(pool[:need])
    return frozenset(cl.below) | drawn, drawn


def district_status(k: int, cl: Classification, selected: frozenset[int]) -> str:
    """Final status for pricing.

    A tied district whose draw was degenerate (the whole tie set gets
    selected, q - c = t) counts as selected outright: its selection was
    certain at interim time, so it is priced like a below-threshold
    district. See the pricing note in the README.
    """
    if k in cl.below:
        return SELECTED_OUTRIGHT
    if k in selected:
        certain = len(selected) - cl.c == cl.t
        return SELECTED_OUTRIGHT if certain else SELECTED_BY_DRAW
    return NOT_SELECTED


def price_for(
    menu: MenuVariant,
    slot: str,
    status: str,
    v: Fraction,
    epsilon: Fraction,
    delta: Fraction,
) -> Fraction:
    """Offered price for a slot applicant given his district's final status.

    The four-price menus treat both selected statuses alike; the six-price
    menu pays slot-two applicants V - eps in outright-selected districts and
    delta in draw-selected ones. Status assignment, including the degenerate
    draw that makes a tied district certain, lives in district_status.
    """
    if menu.tag == "commitment":
        raise ValueError("the commitment menu is districtless; use variants.run_commitment")
    if slot not in SLOTS:
        raise ValueError(f"no price for action {slot!r}")
    selected = status in (SELECTED_OUTRIGHT, SELECTED_BY_DRAW)
    if slot == S1:
        return v + epsilon if selected else epsilon
    if menu.tag == "weak4":
        return delta if selected else 2 * epsilon
    if menu.tag == "strong4":
        return 2 * epsilon
    # strong6
    if status == SELECTED_OUTRIGHT:
        return v - epsilon
    if status == SELECTED_BY_DRAW:
        return delta
    return 2 * epsilon


def sell_decision(voter_type: str, offered_price: Fraction, v: Fraction) -> bool:
    """A voter sells iff the price strictly beats his valuation (ties keep the ballot)."""
    valuation = v if voter_type == REAL else Fraction(0)
    return offered_price > valuation


@dataclass(frozen=True)
class ClassPayment:
    """Offer made to one (district, type, slot) class and what came of it."""

    price: Fraction
    sells: bool
    count: int
    paid: Fraction


@dataclass(frozen=True)
class Outcome:
    """Realized run: who was selected, who sold, and what it cost."""

    selected: frozenset[int]
    drawn_from_tie: frozenset[int]
    prices_paid: Mapping[tuple[int, str, str], ClassPayment]
    expenditure: Fraction
    acquired_real_ballots: tuple[int, ...]

    @property
    def total_acquired(self) -> int:
        return sum(self.acquired_real_ballots)


def payments_for_selection(
    s: Scenario, p: CountProfile, cl: Classification, selected: frozenset[int]
) -> tuple[dict[tuple[int, str, str], ClassPayment], Fraction, tuple[int, ...]]:
    """Price every applicant class under a fixed final selection.

    Abstainers receive no offer. Expenditure sums accepted sales only.
    """
    prices_paid: dict[tuple[int, str, str], ClassPayment] = {}
    expenditure = Fraction(0)
    acquired = []
    for k, ac in enumerate(p.per_district):
        status = district_status(k, cl, selected)
        got_real = 0
        for voter_type in (REAL, DECOY):
            for slot in SLOTS:
                count = ac.count(voter_type, slot)
                if count == 0:
                    continue
                price = price_for(s.menu, slot, status, s.real_value, s.epsilon, s.delta)
                sells = sell_decision(voter_type, price, s.real_value)
                paid = price * count if sells else Fraction(0)
                prices_paid[(k, voter_type, slot)] = ClassPayment(price, sells, count, paid)
                expenditure += paid
                if voter_type == REAL and sells:
                    got_real += count
        acquired.append(got_real)
    return prices_paid, expenditure, tuple(acquired)


def execute(s: Scenario, p: CountProfile, rng: random.Random) -> Outcome:
    """Run the mechanism once: classify, select, price, settle."""
    cl = classify(s, p)
    selected, drawn = select_districts(cl, s.target_count, rng)
    prices_paid, expenditure, acquired = payments_for_selection(s, p, cl, selected)
    return Outcome(selected, drawn, prices_paid, expenditure, acquired)


def budget_bound(s: Scenario) -> Fraction:
    """Worst-case equilibrium expenditure of the four-price menu.

    Maximum over q-subsets of: real ballots at V + eps and decoys at delta
    inside the subset, decoys at 2*eps outside. Real and decoy counts enter
    with different weights, so this is an exhaustive subset scan, not a
    largest-q heuristic.
    """
    if s.menu.tag != "weak4":
        raise ValueError("the expenditure bound with a delta term is for the weak four-price menu")
    v, eps, delta = s.real_value, s.epsilon, s.delta
    total_decoy = s.total_decoy
    best = None
    for subset in q_subsets(s.num_districts, s.target_count):
        inside_real = sum(s.districts[k].real_count for k in subset)
        inside_decoy = sum(s.districts[k].decoy_count for k in subset)
        val = ((v + eps) * inside_real
               + delta * inside_decoy
               + 2 * eps * (total_decoy - inside_decoy))
        if best is None or val > best:
            best = val
    assert best is not None
    return best


def strong4_expenditure_bound(s: Scenario) -> Fraction:
    """Expenditure bound for the pinned-price strong menu: decoys cost 2*eps everywhere."""
    best_real = max(
        sum(s.districts[k].real_count for k in subset)
        for subset in q_subsets(s.num_districts, s.target_count)
    )
    return (s.real_value + s.epsilon) * best_real + 2 * s.epsilon * s.total_decoy


def strong6_expenditure_bound(s: Scenario) -> Fraction:
    """Expenditure bound for the six-price menu run at its minimum tie price 3*eps."""
    best_real = max(
        sum(s.districts[k].real_count for k in subset)
        for subset in q_subsets(s.num_districts, s.target_count)
    )
    return (s.real_value + s.epsilon) * best_real + 3 * s.epsilon * s.total_decoy


def minimal_delta(s: Scenario, sequential: bool = False) -> Fraction:
    """Smallest tie price under which the target profile is provably the unique equilibrium.

    Four-price menu: (q / k) * V + 2*eps one-shot, V / (k - q + 1) + 2*eps when
    run sequentially one district per date. Six-price menu: 3*eps. The pinned
    strong menu has no free tie price; its value is 2*eps by construction.
    """
    k, q = s.num_districts, s.target_count
    if sequential:
        if s.menu.tag != "weak4":
            raise ValueError("sequential runs use the weak four-price menu")
        return Fraction(1, k - q + 1) * s.real_value + 2 * s.epsilon
    if s.menu.tag == "weak4":
        return Fraction(q, k) * s.real_value + 2 * s.epsilon
    if s.menu.tag == "strong6":
        return 3 * s.epsilon
    if s.menu.tag == "strong4":
        return 2 * s.epsilon
    raise ValueError("the commitment menu has no tie price")


def require_delta_at_least(s: Scenario, required: Fraction) -> None:
    if s.delta < required:
        raise DeltaBelowThreshold(s.delta, required)


def selection_distribution(
    cl: Classification, q: int
) -> list[tuple[frozenset[int], Fraction]]:
    """All final selections with their fair-randomization probabilities."""
    need = q - cl.c
    pool = sorted(cl.tied)
    combos = list(itertools.combinations(pool, need))
    prob = Fraction(1, len(combos))
    return [(frozenset(cl.below) | frozenset(u), prob) for u in combos]
