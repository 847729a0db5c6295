import numpy as np
import pytest

from udncoord.channel import ChannelRealization, PrecodingMatrix, SupportCase, per_an_power, sinrs
from udncoord.conic import (FeasibilityInstance, SINRProgram, TOL_POW, TOL_SINR, check_sinr_feasibility,
                            support_sets, witness_ok)
from udncoord.pairing import PairingSolution
from udncoord.precoding import BisectionConfig, bisection_max_min_sinr

from conftest import make_snapshot


def single_link(rng, L=4):
    return ChannelRealization(rng.standard_normal((L, 1)) + 1j * rng.standard_normal((L, 1)), L)


def assert_witness(inst, res):
    W = res.W
    s = sinrs(inst.H, W)
    assert s.min() >= inst.theta * (1 - TOL_SINR)
    assert np.all(per_an_power(W, inst.power_form) <= inst.per_an_cap * (1 + TOL_POW))
    # support pattern is exact
    allowed = np.zeros((inst.H.M, inst.H.K), dtype=bool)
    for k, ans in enumerate(support_sets(inst.pairing, inst.support_case)):
        allowed[list(ans), k] = True
    assert np.all(W.block_norms_sq()[~allowed] == 0)


def test_single_link_both_sides(rng):
    H = single_link(rng)
    pairing = PairingSolution((0,), 1, 0.0)
    opt = float(np.linalg.norm(H.H) ** 2)
    inst = FeasibilityInstance(H, pairing, "CaseI_SingleServing", 0.5 * opt)
    res = check_sinr_feasibility(inst)
    assert res.feasible
    assert_witness(inst, res)
    assert not check_sinr_feasibility(FeasibilityInstance(H, pairing, "CaseI_SingleServing", 2 * opt)).feasible


def test_around_bisection_optimum(rng):
    L = 2
    H = ChannelRealization(rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)), L)
    pairing = PairingSolution((0, 1), 2, 0.0)
    for case in SupportCase:
        theta = bisection_max_min_sinr(H, pairing, case, cfg=BisectionConfig(epsilon=1e-5)).theta
        for f in (0.9, 0.97):
            assert check_sinr_feasibility(FeasibilityInstance(H, pairing, case, f * theta)).feasible
        for f in (1.03, 1.1):
            assert not check_sinr_feasibility(FeasibilityInstance(H, pairing, case, f * theta)).feasible


@pytest.mark.parametrize("case", list(SupportCase))
@pytest.mark.parametrize("form", ["squared", "literal"])
def test_monotone_and_witnesses(case, form):
    from udncoord.strategies import pair
    for index in range(3):
        sc, topo, H = make_snapshot(K=6, M=6, index=index, strategy="JPcon" if case is SupportCase.JOINT_ACTIVE else "CoordPr")
        pairing = pair(topo, sc)
        program = SINRProgram(H, pairing, case, power_form=form)
        for theta in (0.5, 2.0, 8.0, 32.0):
            inst = FeasibilityInstance(H, pairing, case, theta, power_form=form)
            res = check_sinr_feasibility(inst, program=program)
            if res.feasible:
                assert_witness(inst, res)
                half = check_sinr_feasibility(FeasibilityInstance(H, pairing, case, theta / 2, power_form=form),
                                              program=program)
                assert half.feasible


def test_witness_phase_alignment(rng):
    H = single_link(rng)
    pairing = PairingSolution((0,), 1, 0.0)
    res = check_sinr_feasibility(FeasibilityInstance(H, pairing, "CaseI_SingleServing", 0.3))
    useful = H.H[:, 0].conj() @ res.W.W[:, 0]
    assert abs(useful.imag) <= 1e-12 * abs(useful) and useful.real > 0


def test_witness_ok_rejects_overpowered(rng):
    H = single_link(rng)
    pairing = PairingSolution((0,), 1, 0.0)
    prog = SINRProgram(H, pairing, "CaseI_SingleServing")
    W = PrecodingMatrix(H.H * 10, "CaseI_SingleServing", 4)
    assert not witness_ok(prog, W, 0.1)


def test_instance_validation(rng):
    H = single_link(rng)
    pairing = PairingSolution((0,), 1, 0.0)
    with pytest.raises(ValueError):
        FeasibilityInstance(H, pairing, "CaseI_SingleServing", 0.0)
    with pytest.raises(ValueError):
        FeasibilityInstance(H, PairingSolution((0, 0), 1, 0.0), "CaseI_SingleServing", 1.0)
    inst = FeasibilityInstance(H, pairing, "CaseI_SingleServing", 1.0)
    assert '"theta": 1.0' in inst.to_json()
