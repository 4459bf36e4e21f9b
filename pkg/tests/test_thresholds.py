import itertools
import random

import numpy as np
import pytest

from groupnls.errors import MissingThreshold, NotGroupInvariant
from groupnls.fields import Grid, NlsParameters
from groupnls.functionals import FunctionalReport, evaluate
from groupnls.ground_state import ground_action_radial, ground_state
from groupnls.symmetry import builtin_group, symmetrized_translate, trivial_group
from groupnls.thresholds import (
    BLOWUP_OR_GROWUP,
    OUT_OF_THEORY,
    SCATTER,
    RotationPhaseFamily,
    ThresholdTable,
    classify_values,
    excluded_subgroups,
    populate_ledger,
    predict,
    required_groups,
    scattering_threshold,
    threshold_entry,
    trapping_check,
)
from tests.conftest import random_field

P2 = NlsParameters(2, 5.0)


def table(entries, omega=1.0):
    t = ThresholdTable()
    for gid, value in entries.items():
        t.set_l(gid, omega, value)
    return t


# -- recursion --------------------------------------------------------------------------


def test_trivial_threshold_is_ground_action(p1):
    l = ground_action_radial(p1)
    assert scattering_threshold(trivial_group(1), p1, table({"G0": l})) == l


def test_odd_threshold_takes_subgroup_branch(p1):
    l = 1.3
    e = threshold_entry(builtin_group("G_odd"), p1, table({"G0": l, "G_odd": 2.0 * l + 1e-3}))
    assert e.s == 2 * l and e.m == 2 * l
    assert e.chain_text == "G_odd:2>G0:1"


def test_threshold_prefers_smaller_l(p1):
    e = threshold_entry(builtin_group("G_odd"), p1, table({"G0": 1.0, "G_odd": 1.5}))
    assert e.s == 1.5 and e.m == 2.0 and e.chain_text == "G_odd:2"


def test_order_four_group_excludes_g1():
    l = 4.0
    G = builtin_group("B1")
    assert [H.label for H in excluded_subgroups(G)] == ["B1_G1"]
    # a cheap G_1 value would lower the minimum if G_1 were admitted
    t = table({"G0_d2": l, "B1_G1": 1.2 * l, "B1": 10 * l})
    e = threshold_entry(G, P2, t)
    assert e.s == 4 * l and e.chain_text == "B1:4>G0_d2:1"
    t = table({"G0_d2": l, "B1_G1": 1.2 * l, "B1": 3 * l})
    assert scattering_threshold(G, P2, t) == 3 * l


def test_required_groups_skip_excluded():
    assert [H.label for H in required_groups(builtin_group("B1"))] == ["G0_d2", "B1"]


def test_missing_values_raise(p1):
    with pytest.raises(MissingThreshold):
        scattering_threshold(trivial_group(1), p1, ThresholdTable())
    # l^G absent: the subgroup branch alone, flagged
    e = threshold_entry(builtin_group("G_odd"), p1, table({"G0": 1.0}))
    assert e.s == 2.0 and "l_unavailable" in e.flags


def test_rotation_family_is_leaf():
    fam = RotationPhaseFamily()
    t = ThresholdTable()
    populate_ledger(fam, P2, t)
    e = threshold_entry(fam, P2, t)
    assert e.s == e.l and e.m is None and e.s > ground_action_radial(P2)


def test_threshold_bounds_hold_for_random_values():
    rnd = random.Random(7)
    G = builtin_group("B1")
    for _ in range(50):
        l = rnd.uniform(0.5, 5)
        lg = rnd.uniform(l, 6 * l)  # l^G >= l always
        t = table({"G0_d2": l, "B1": lg, "B1_G1": rnd.uniform(l, 3 * l)})
        s = scattering_threshold(G, P2, t)
        assert l <= s <= lg
        assert s == min(4 * l, lg)


def test_recursion_independent_of_enumeration_order(monkeypatch):
    import groupnls.thresholds as th

    G = builtin_group("B1")
    values = {"G0_d2": 2.0, "B1": 7.5, "B1_G1": 3.0}
    ref = threshold_entry(G, P2, table(values))
    real = th.proper_subgroups
    for perm in itertools.permutations(range(2)):
        monkeypatch.setattr(th, "proper_subgroups", lambda H, perm=perm: [real(H)[i] for i in perm] if H.order == 4 else real(H))
        e = threshold_entry(G, P2, table(values))
        assert (e.s, e.chain) == (ref.s, ref.chain)


def test_ledger_round_trip_and_recompute(tmp_path, p1):
    t = table({"G0": 1.3354952094267662, "G_odd": 2.6711619193240503})
    t.set_l("G_odd", 1.0, 2.6711619193240503, ("minimized", "unconverged"))
    e = threshold_entry(builtin_group("G_odd"), p1, t)
    path = tmp_path / "thresholds.csv"
    t.write_csv(path)
    assert path.read_text().splitlines()[0] == "group_id,omega,l,m,s,chain,flags"
    back = ThresholdTable.read_csv(path)
    e2 = back.entry("G_odd", 1.0)
    assert (e2.s, e2.m, e2.l, e2.chain, e2.flags) == (e.s, e.m, e.l, e.chain, e.flags)
    assert back.recompute(e2) == e2.s
    assert back.get_l("G_odd", 1.0).flags == ("minimized", "unconverged")


# -- classification --------------------------------------------------------------------------


def test_classify_values_regions():
    assert classify_values(1.0, 0.1, 2.0, 2.0) == SCATTER
    assert classify_values(1.0, 0.0, 2.0, 2.0) == SCATTER
    assert classify_values(1.0, -0.1, 2.0, 2.0) == BLOWUP_OR_GROWUP
    assert classify_values(2.0, 0.1, 2.0, 2.0) == OUT_OF_THEORY
    assert classify_values(2.5, -0.1, 3.0, 2.0) == OUT_OF_THEORY


@pytest.fixture(scope="module")
def odd_ledger(p1):
    t = ThresholdTable()
    populate_ledger(builtin_group("G_odd"), p1, t, grid=Grid(1, 1024, 40.0), max_iter=3000)
    return t


def test_predict_scaled_ground_states(p1, grid1, odd_ledger):
    Q = ground_state(p1, grid1)
    G0 = trivial_group(1)
    pr = predict(0.9 * Q, G0, p1, odd_ledger)
    assert pr.verdict == SCATTER and pr.K > 0
    pr = predict(1.1 * Q, G0, p1, odd_ledger)
    assert pr.verdict == BLOWUP_OR_GROWUP and pr.K < 0 and pr.S < pr.l_group


def test_predict_odd_dipole(p1, odd_ledger):
    grid = Grid(1, 4096, 128.0)
    Q = ground_state(p1, grid)
    dipole = symmetrized_translate(2 * 0.9 * Q, [6.0], builtin_group("G_odd"))
    l = ground_action_radial(p1)
    pr = predict(dipole, builtin_group("G_odd"), p1, odd_ledger)
    assert l < pr.S < 2 * l and pr.K >= 0
    assert pr.verdict == SCATTER
    assert predict(dipole, trivial_group(1), p1, odd_ledger).verdict == OUT_OF_THEORY


def test_predict_rejects_non_invariant(p1, grid1, odd_ledger, rng):
    with pytest.raises(NotGroupInvariant):
        predict(random_field(grid1, rng), builtin_group("G_odd"), p1, odd_ledger)


def test_odd_ledger_values(p1, odd_ledger):
    l = odd_ledger.get_l("G0", 1.0).value
    lg = odd_ledger.get_l("G_odd", 1.0).value
    assert lg >= l
    assert scattering_threshold(builtin_group("G_odd"), p1, odd_ledger) == pytest.approx(min(2 * l, lg), rel=1e-15)


# -- trapping --------------------------------------------------------------------------------


def _report(S, K, g2=1.0):
    return FunctionalReport(1.0, 0.0, np.zeros(1), S, K, S - K / 4, g2, 1.0)


def test_trapping_constant_soliton():
    reports = [_report(1.0, 0.0) for _ in range(10)]
    assert trapping_check(reports, 1.5, 1)


def test_trapping_detects_flip():
    reports = [_report(1.0, k) for k in (0.3, 0.2, 0.1, -0.05)]
    assert not trapping_check(reports, 1.5, 1)


def test_trapping_gap_on_negative_branch():
    # gap is -4 (1.5 - 1.0) / 1 = -2
    assert trapping_check([_report(1.0, k) for k in (-2.5, -3.0, -2.0)], 1.5, 1)
    assert not trapping_check([_report(1.0, k) for k in (-2.5, -1.9)], 1.5, 1)


def test_trapping_requires_subthreshold_data():
    with pytest.raises(ValueError):
        trapping_check([_report(2.0, 0.1)], 1.5, 1)


def test_trapping_reports_from_field(p1, grid1):
    Q = ground_state(p1, grid1)
    rep = evaluate(1.1 * Q, p1)
    l = ground_action_radial(p1)
    assert rep.K <= -4 * (l - rep.S) / p1.d
