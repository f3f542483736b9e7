"""Price-menu vote-buying mechanisms with exact equilibrium verification.

A buyer facing an electorate padded with worthless look-alike ballots can
split citizens across districts with a multi-price menu so that, in the
unique equilibrium, real ballots sell at their holders' valuation while the
look-alikes go for pennies. This package runs those menus on small
instances with exact rational arithmetic: single runs, expenditure bounds,
exhaustive pure-equilibrium enumeration, sequential and all-or-nothing
variants, and a used-car-market reading of the same screen.
"""

from .model import (
    DeltaBelowThreshold,
    DistrictSpec,
    MenuVariant,
    ProfileError,
    Rational,
    ScanCapExceeded,
    Scenario,
    ScenarioFormatError,
    brute_force_cost,
    format_rational,
    make_scenario,
    parse_rational,
    scenario_warnings,
    validate_budget,
    validate_scenario,
)
from .mechanism import (
    ABSTAIN,
    DECOY,
    NOT_SELECTED,
    REAL,
    S1,
    S2,
    SELECTED_BY_DRAW,
    SELECTED_OUTRIGHT,
    ActionCount,
    Classification,
    CountProfile,
    Outcome,
    budget_bound,
    classify,
    execute,
    minimal_delta,
    price_for,
    select_districts,
    sell_decision,
    strong4_expenditure_bound,
    strong6_expenditure_bound,
)
from .equilibrium import (
    EquilibriumReport,
    SabotageReport,
    VoterClass,
    deviation_payoff,
    enumerate_equilibria,
    expected_expenditure,
    expected_payoff,
    is_nash,
    tie_payoff_gap_holds,
    verify_sabotage_bound,
)
from .variants import (
    CommitmentGame,
    CommitmentOutcome,
    CommitmentProfile,
    LemonsOutcome,
    SequentialState,
    run_commitment,
    run_lemons,
    run_sequential,
    sequential_rounds,
    verify_commitment_equilibrium,
    verify_subgame_perfect,
)

__version__ = "0.1.0"
