from devilsmenu import MenuVariant, make_scenario
from devilsmenu.mechanism import minimal_delta


def scenario_for(districts, q, menu=MenuVariant.WEAK4, delta=None, v=100, eps=1, seed=0):
    """Build a scenario with the menu's minimum tie price unless given one."""
    if delta is None:
        probe = make_scenario(districts, v, eps, 1, q, menu=menu, seed=seed)
        delta = minimal_delta(probe)
    return make_scenario(districts, v, eps, delta, q, menu=menu, seed=seed)


def sym(k, r, d, q, **kwargs):
    """Symmetric scenario: k districts, each with r real and d decoy ballots."""
    return scenario_for([(r, d)] * k, q, **kwargs)
