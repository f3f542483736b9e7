"""Exact expected payoffs, best responses, and pure-equilibrium enumeration.

Payoffs are computed analytically over the fair randomization: a voter's
expected payoff depends only on his own action, his district's interim
status, and the draw odds (q - c) / t, never on sampling. All comparisons
are exact rationals, so equilibrium checks cannot be corrupted by float
ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Optional

from .mechanism import (
    ABSTAIN,
    ACTIONS,
    DECOY,
    NOT_SELECTED,
    REAL,
    S1,
    S2,
    SELECTED_BY_DRAW,
    SELECTED_OUTRIGHT,
    CountProfile,
    classify,
    payments_for_selection,
    price_for,
    selection_distribution,
)
from .model import ProfileError, ScanCapExceeded, Scenario

DEFAULT_SCAN_CAP = 5_000_000

# Interim status codes used in the hot path.
_BELOW, _TIED, _ABOVE = "C", "T", "O"


@dataclass(frozen=True)
class VoterClass:
    """Representative-agent handle: one voter of (district, type) playing action."""

    district: int
    voter_type: str
    action: str


@dataclass(frozen=True)
class EquilibriumReport:
    """Result of an exhaustive pure-equilibrium scan."""

    equilibria: tuple
    sigma_star_present: bool
    sigma_star_unique: bool
    dominance_filtered: bool
    profiles_scanned: int


class _Ctx:
    """Per-scenario caches for the enumeration hot path.

    interim classifications are keyed by the slot-one applicant vector, and
    expected payoffs by (own interim status, c, t, type, action); both spaces
    are tiny at desk scale, so repeated deviation checks reduce to dict hits.
    """

    def __init__(self, s: Scenario):
        self.s = s
        self.k = s.num_districts
        self.q = s.target_count
        self.n_real = tuple(d.real_count for d in s.districts)
        self.n_decoy = tuple(d.decoy_count for d in s.districts)
        self._prices = {
            (slot, status): price_for(s.menu, slot, status, s.real_value, s.epsilon, s.delta)
            for slot in (S1, S2)
            for status in (SELECTED_OUTRIGHT, SELECTED_BY_DRAW, NOT_SELECTED)
        }
        self._valuation = {REAL: s.real_value, DECOY: Fraction(0)}
        self._interim: dict[tuple[int, ...], tuple[tuple[str, ...], int, int]] = {}
        self._payoff: dict[tuple, Fraction] = {}

    def interim(self, m: tuple[int, ...]) -> tuple[tuple[str, ...], int, int]:
        got = self._interim.get(m)
        if got is None:
            ratios = [Fraction(mk, nk) for mk, nk in zip(m, self.n_real)]
            threshold = sorted(ratios)[self.q - 1]
            statuses = tuple(
                _BELOW if r < threshold else (_TIED if r == threshold else _ABOVE)
                for r in ratios
            )
            got = (statuses, statuses.count(_BELOW), statuses.count(_TIED))
            self._interim[m] = got
        return got

    def _settle(self, voter_type: str, slot: str, status: str) -> Fraction:
        price = self._prices[(slot, status)]
        valuation = self._valuation[voter_type]
        return price if price > valuation else valuation

    def payoff(self, status: str, c: int, t: int, voter_type: str, action: str) -> Fraction:
        """Expected payoff of one voter given his district's interim status."""
        key = (status, c, t, voter_type, action)
        got = self._payoff.get(key)
        if got is None:
            if action == ABSTAIN:
                got = self._valuation[voter_type]
            elif status == _BELOW:
                got = self._settle(voter_type, action, SELECTED_OUTRIGHT)
            elif status == _ABOVE:
                got = self._settle(voter_type, action, NOT_SELECTED)
            elif self.q - c == t:
                # Degenerate draw: the whole tie set goes through, so the
                # district is certain at interim time and priced outright.
                got = self._settle(voter_type, action, SELECTED_OUTRIGHT)
            else:
                p_draw = Fraction(self.q - c, t)
                got = (p_draw * self._settle(voter_type, action, SELECTED_BY_DRAW)
                       + (1 - p_draw) * self._settle(voter_type, action, NOT_SELECTED))
            self._payoff[key] = got
        return got


@lru_cache(maxsize=32)
def _ctx_for(s: Scenario) -> _Ctx:
    return _Ctx(s)


def _slot1_vector(counts) -> tuple[int, ...]:
    return tuple(c[0] + c[3] for c in counts)


_CLASS_SLOTS = {  # index of each (type, action) inside a counts tuple
    (REAL, S1): 0, (REAL, S2): 1, (REAL, ABSTAIN): 2,
    (DECOY, S1): 3, (DECOY, S2): 4, (DECOY, ABSTAIN): 5,
}


def _payoff_in(ctx: _Ctx, m: tuple[int, ...], k: int, voter_type: str, action: str) -> Fraction:
    statuses, c, t = ctx.interim(m)
    return ctx.payoff(statuses[k], c, t, voter_type, action)


def expected_payoff(s: Scenario, p: CountProfile, who: VoterClass) -> Fraction:
    """Exact expected payoff of one voter of who's class under profile p.

    The class may be empty: the value is what such a voter would get, which
    is what deviation checks evaluate after moving a voter in.
    """
    p.check_against(s)
    ctx = _ctx_for(s)
    m = _slot1_vector(p.as_counts())
    return _payoff_in(ctx, m, who.district, who.voter_type, who.action)


def deviation_payoff(s: Scenario, p: CountProfile, who: VoterClass, new_action: str) -> Fraction:
    """Payoff of one who-class voter after he alone switches to new_action.

    The whole profile is reclassified from scratch: a single move can push
    the district across the below/tied/above boundary.
    """
    p.check_against(s)
    counts = p.as_counts()
    idx = _CLASS_SLOTS[(who.voter_type, who.action)]
    if counts[who.district][idx] == 0:
        raise ProfileError(
            f"district {who.district} has no {who.voter_type} voter playing {who.action}"
        )
    ctx = _ctx_for(s)
    m = list(_slot1_vector(counts))
    m[who.district] += (new_action == S1) - (who.action == S1)
    return _payoff_in(ctx, tuple(m), who.district, who.voter_type, new_action)


def _is_nash_counts(ctx: _Ctx, counts, filtered: bool) -> bool:
    if filtered:
        # The filtered game keeps only undominated actions: nobody abstains
        # and real voters sit on slot one. Other profiles are not part of the
        # game and cannot be equilibria of it.
        for cnt in counts:
            if cnt[1] or cnt[2] or cnt[5]:
                return False
    m = _slot1_vector(counts)
    statuses, c, t = ctx.interim(m)
    for k, cnt in enumerate(counts):
        status = statuses[k]
        if filtered:
            # Only decoys move, between the two slots.
            if cnt[3]:
                cur = ctx.payoff(status, c, t, DECOY, S1)
                m2 = m[:k] + (m[k] - 1,) + m[k + 1:]
                st2, c2, t2 = ctx.interim(m2)
                if ctx.payoff(st2[k], c2, t2, DECOY, S2) > cur:
                    return False
            if cnt[4]:
                cur = ctx.payoff(status, c, t, DECOY, S2)
                m2 = m[:k] + (m[k] + 1,) + m[k + 1:]
                st2, c2, t2 = ctx.interim(m2)
                if ctx.payoff(st2[k], c2, t2, DECOY, S1) > cur:
                    return False
            continue
        for voter_type in (REAL, DECOY):
            for action in ACTIONS:
                if cnt[_CLASS_SLOTS[(voter_type, action)]] == 0:
                    continue
                cur = ctx.payoff(status, c, t, voter_type, action)
                for alt in ACTIONS:
                    if alt == action:
                        continue
                    dm = (alt == S1) - (action == S1)
                    if dm == 0:
                        st2, c2, t2 = statuses, c, t
                    else:
                        m2 = m[:k] + (m[k] + dm,) + m[k + 1:]
                        st2, c2, t2 = ctx.interim(m2)
                    if ctx.payoff(st2[k], c2, t2, voter_type, alt) > cur:
                        return False
    return True


def is_nash(s: Scenario, p: CountProfile, filter_dominated: bool = True) -> bool:
    """True iff no occupied class has a strictly profitable unilateral move.

    With filter_dominated the game is the dominance-reduced one: abstention
    is out for everyone, real voters are pinned to slot one, and profiles
    outside that space are not equilibria of it. Without it, every voter may
    move across both slots and abstention.
    """
    p.check_against(s)
    return _is_nash_counts(_ctx_for(s), p.as_counts(), filter_dominated)


def _compositions3(n: int) -> list[tuple[int, int, int]]:
    return [(a, b, n - a - b) for a in range(n + 1) for b in range(n + 1 - a)]


def enumerate_equilibria(
    s: Scenario,
    filter_dominated: bool = True,
    scan_cap: int = DEFAULT_SCAN_CAP,
) -> EquilibriumReport:
    """Exhaustively scan symmetry-reduced profiles and collect the equilibria.

    Filtered scan space: both slots per voter, per district (real+1)*(decoy+1)
    count profiles. Profiles with any real voter on slot two fail the
    dominance screen regardless of decoy placement, so they are rejected
    wholesale and only the remaining candidates run the deviation checks;
    profiles_scanned reports the full space. Unfiltered scan space: all
    three-action count splits per type.
    """
    ctx = _ctx_for(s)
    sigma = CountProfile.sigma_star(s).as_counts()
    equilibria: list[CountProfile] = []

    if filter_dominated:
        space = 1
        for r, d in zip(ctx.n_real, ctx.n_decoy):
            space *= (r + 1) * (d + 1)
        if space > scan_cap:
            raise ScanCapExceeded(space, scan_cap)
        options = [
            [(r, 0, 0, d1, d - d1, 0) for d1 in range(d + 1)]
            for r, d in zip(ctx.n_real, ctx.n_decoy)
        ]
        for counts in product(*options):
            if _is_nash_counts(ctx, counts, True):
                equilibria.append(CountProfile.from_counts(counts))
    else:
        space = 1
        for r, d in zip(ctx.n_real, ctx.n_decoy):
            space *= len(_compositions3(r)) * len(_compositions3(d))
        if space > scan_cap:
            raise ScanCapExceeded(space, scan_cap)
        options = [
            [rc + dc for rc in _compositions3(r) for dc in _compositions3(d)]
            for r, d in zip(ctx.n_real, ctx.n_decoy)
        ]
        for counts in product(*options):
            if _is_nash_counts(ctx, counts, False):
                equilibria.append(CountProfile.from_counts(counts))

    present = any(e.as_counts() == sigma for e in equilibria)
    return EquilibriumReport(
        equilibria=tuple(equilibria),
        sigma_star_present=present,
        sigma_star_unique=present and len(equilibria) == 1,
        dominance_filtered=filter_dominated,
        profiles_scanned=space,
    )


def expected_expenditure(s: Scenario, p: CountProfile) -> Fraction:
    """Expected total payment under p, averaged exactly over the fair draw."""
    cl = classify(s, p)
    total = Fraction(0)
    for selected, prob in selection_distribution(cl, s.target_count):
        _, spend, _ = payments_for_selection(s, p, cl, selected)
        total += prob * spend
    return total


def single_deviation_profile(
    s: Scenario, district: int, voter_type: str, new_action: str
) -> CountProfile:
    """Sigma-star with one voter of (district, voter_type) moved to new_action."""
    base = [list(ac.as_tuple()) for ac in CountProfile.sigma_star(s).per_district]
    from_action = S1 if voter_type == REAL else S2
    src = _CLASS_SLOTS[(voter_type, from_action)]
    dst = _CLASS_SLOTS[(voter_type, new_action)]
    if base[district][src] == 0:
        raise ProfileError(f"district {district} has no {voter_type} voter to move")
    base[district][src] -= 1
    base[district][dst] += 1
    return CountProfile.from_counts(tuple(tuple(row) for row in base))


@dataclass(frozen=True)
class SabotageReport:
    """Worst-case cost of a lone decoy defecting to slot one, against the bound."""

    per_district: dict[int, Fraction]
    worst: Optional[Fraction]
    bound: Fraction
    holds: bool


def verify_sabotage_bound(s: Scenario) -> SabotageReport:
    """Check that one decoy defecting to slot one cannot push spending past the bound.

    Every district with a decoy is tried as the defector's home; expected
    expenditure is exact over the draw. holds is True iff all of them stay
    within the four-price expenditure bound.
    """
    from .mechanism import budget_bound

    bound = budget_bound(s)
    per: dict[int, Fraction] = {}
    for k, d in enumerate(s.districts):
        if d.decoy_count == 0:
            continue
        p = single_deviation_profile(s, k, DECOY, S1)
        per[k] = expected_expenditure(s, p)
    worst = max(per.values()) if per else None
    holds = all(v <= bound for v in per.values())
    return SabotageReport(per_district=per, worst=worst, bound=bound, holds=holds)


def real_deviation_expenditures(s: Scenario) -> dict[int, Fraction]:
    """Expected spending after a lone real voter leaves slot one (informational only;
    the sabotage bound makes no claim about real-voter deviations)."""
    out: dict[int, Fraction] = {}
    for k, d in enumerate(s.districts):
        if d.real_count == 0:
            continue
        p = single_deviation_profile(s, k, REAL, S2)
        out[k] = expected_expenditure(s, p)
    return out


def tie_payoff_gap_holds(s: Scenario) -> bool:
    """Per-instance check of the uniqueness margin for the four-price menu.

    For every count c of outright-selected districts up to q - 1, the best
    tie-set gamble (q-c)/(k-c) * V + eps must fall strictly below delta
    whenever delta is at least (q/k) * V + 2*eps. Exact arithmetic.
    """
    k, q = s.num_districts, s.target_count
    v, eps, delta = s.real_value, s.epsilon, s.delta
    if delta < Fraction(q, k) * v + 2 * eps:
        return False
    for c in range(q):
        gamble = Fraction(q - c, k - c) * v + eps
        if not (gamble <= Fraction(q, k) * v + eps < delta):
            return False
    return True
