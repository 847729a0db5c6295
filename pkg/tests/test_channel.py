import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from udncoord.channel import (ChannelRealization, PrecodingMatrix, SupportCase, draw_fading, effective_gains,
                              interference_matrix, per_an_power, rates, sinr, sinrs)
from udncoord.topology import Scenario, generate_topology, snapshot_rng

from conftest import make_snapshot


def test_shapes_and_readonly():
    sc, topo, H = make_snapshot(K=5, M=3)
    assert H.H.shape == (12, 5) and (H.M, H.K, H.L) == (3, 5, 4)
    with pytest.raises(ValueError):
        H.H[0, 0] = 0
    with pytest.raises(ValueError):
        ChannelRealization(np.zeros((5, 2)), 4)


def test_fading_statistics():
    # a UE at the corner distance from every AN has unit-variance entries times snr_ref
    sc = Scenario(K=1, M=400, snr_ref_db=10.0)
    from udncoord.topology import Topology
    topo = Topology(np.zeros((400, 2)), [[500.0, 500.0]], 1000.0, sc.d_edge)
    H = draw_fading(topo, sc, np.random.default_rng(0))
    assert np.mean(np.abs(H.H) ** 2) == pytest.approx(10.0, rel=0.05)


def test_common_fading_across_snr():
    sc = Scenario(K=3, M=3)
    topo = generate_topology(sc, snapshot_rng(0, 0))
    H1 = draw_fading(topo, sc, np.random.default_rng(1), snr_ref=1.0)
    H2 = draw_fading(topo, sc, np.random.default_rng(1), snr_ref=100.0)
    np.testing.assert_allclose(H2.H, 10.0 * H1.H)


def test_sinr_recomputation(rng):
    H = ChannelRealization(rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3)), 4)
    W = PrecodingMatrix(rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3)), "CaseII_JointActive", 4)
    s = sinrs(H, W)
    for k in range(3):
        num = abs(H.H[:, k].conj() @ W.W[:, k]) ** 2
        den = 1 + sum(abs(H.H[:, k].conj() @ W.W[:, i]) ** 2 for i in range(3) if i != k)
        assert s[k] == pytest.approx(num / den)
        assert sinr(H, W, k) == pytest.approx(s[k])
    np.testing.assert_allclose(rates(H, W), np.log2(1 + s))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_phase_invariance(seed):
    r = np.random.default_rng(seed)
    H = ChannelRealization(r.standard_normal((4, 2)) + 1j * r.standard_normal((4, 2)), 2)
    W = r.standard_normal((4, 2)) + 1j * r.standard_normal((4, 2))
    ph = np.exp(1j * r.uniform(0, 2 * np.pi, 2))
    a = sinrs(H, PrecodingMatrix(W, "CaseI_SingleServing", 2))
    b = sinrs(H, PrecodingMatrix(W * ph, "CaseI_SingleServing", 2))
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_zero_precoder_gives_zero_rate():
    H = ChannelRealization(np.ones((4, 2)), 4)
    W = PrecodingMatrix(np.zeros((4, 2)), SupportCase.SINGLE_SERVING, 4)
    assert np.all(rates(H, W) == 0)


def test_effective_gains_requires_unit_beams(rng):
    H = ChannelRealization(rng.standard_normal((4, 2)) + 0j, 4)
    D = rng.standard_normal((4, 2)) + 0j
    with pytest.raises(ValueError):
        effective_gains(H, PrecodingMatrix(D, "CaseI_SingleServing", 4))
    D /= np.linalg.norm(D, axis=0)
    G = effective_gains(H, PrecodingMatrix(D, "CaseI_SingleServing", 4))
    np.testing.assert_allclose(G, interference_matrix(H, PrecodingMatrix(D, "CaseI_SingleServing", 4)))


def test_per_an_power_forms():
    W = np.zeros((4, 2), dtype=complex)
    W[0, 0], W[1, 1] = 3.0, 4.0  # AN 0 (L=2) carries both UEs
    P = PrecodingMatrix(W, "CaseI_SingleServing", 2)
    assert per_an_power(P, "squared").tolist() == [25.0, 0.0]
    assert per_an_power(P, "literal").tolist() == [49.0, 0.0]


def test_json_round_trips(rng):
    Hm = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
    H = ChannelRealization(Hm, 4)
    assert np.array_equal(ChannelRealization.from_json(H.to_json()).H, H.H)
    W = PrecodingMatrix(Hm, "CaseII_JointActive", 4)
    W2 = PrecodingMatrix.from_json(W.to_json())
    assert np.array_equal(W2.W, W.W) and W2.support_case is SupportCase.JOINT_ACTIVE
