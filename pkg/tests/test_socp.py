import numpy as np
import pytest

from udncoord.socp import Cones, _NTScaling, identity, jordan_product, jordan_solve, max_step, solve_socp


def interior(cones, rng):
    u = identity(cones) * 2 + 0.3 * rng.standard_normal(cones.size)
    u[:cones.l] = np.abs(u[:cones.l]) + 0.5
    for sl in cones.soc_slices():
        u[sl.start] = np.linalg.norm(u[sl][1:]) + 1
    return u


def random_problem(rng):
    n = int(rng.integers(3, 12))
    cones = Cones(int(rng.integers(0, 4)), tuple(int(x) for x in rng.integers(2, 6, size=rng.integers(1, 4))))
    p = int(rng.integers(0, 3))
    G = rng.standard_normal((cones.size, n))
    x0 = rng.standard_normal(n)
    h = G @ x0 + interior(cones, rng)
    A = rng.standard_normal((p, n))
    c = -(G.T @ interior(cones, rng)) - A.T @ rng.standard_normal(p)
    return c, G, h, cones, A, A @ x0


def test_cone_algebra(rng):
    cones = Cones(2, (3, 4))
    lam = interior(cones, rng)
    r = rng.standard_normal(cones.size)
    x = jordan_solve(lam, r, cones)
    np.testing.assert_allclose(jordan_product(lam, x, cones), r, atol=1e-10)
    e = identity(cones)
    np.testing.assert_allclose(jordan_product(e, r, cones), r)


def test_nt_scaling_identity(rng):
    cones = Cones(3, (2, 5, 3))
    s, z = interior(cones, rng), interior(cones, rng)
    sc = _NTScaling(s, z, cones)
    np.testing.assert_allclose(sc.W(z), sc.Winv(s), atol=1e-10)
    np.testing.assert_allclose(sc.lam, sc.W(z), atol=1e-10)
    x = rng.standard_normal(cones.size)
    np.testing.assert_allclose(sc.W(sc.Winv(x)), x, atol=1e-10)


def test_max_step(rng):
    cones = Cones(1, (3,))
    u = np.array([1.0, 2.0, 0.0, 0.0])
    du = np.array([-1.0, -1.0, 1.0, 0.0])
    t = max_step(u, du, cones)
    assert t == pytest.approx(1.0)
    v = u[1:] + t * du[1:]
    assert v[0] == pytest.approx(np.linalg.norm(v[1:]))


def test_small_lp():
    # min -x1 - x2  s.t. x1 + x2 <= 1, x >= 0
    G = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    res = solve_socp(np.array([-1.0, -1.0]), G, np.array([1.0, 0.0, 0.0]), Cones(3))
    assert res.status == "optimal" and res.pcost == pytest.approx(-1.0, abs=1e-7)


def test_norm_ball():
    # min c'x s.t. ||x|| <= 1 gives -||c||
    c = np.array([3.0, -4.0])
    G = np.vstack([np.zeros(2), -np.eye(2)])
    h = np.array([1.0, 0.0, 0.0])
    res = solve_socp(c, G, h, Cones(0, (3,)))
    assert res.pcost == pytest.approx(-5.0, abs=1e-7)
    np.testing.assert_allclose(res.x, -c / 5, atol=1e-6)


def test_against_cvxopt():
    pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers
    solvers.options["show_progress"] = False
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 40:
        c, G, h, cones, A, b = random_problem(rng)
        if cones.size < c.size:
            continue
        res = solve_socp(c, G, h, cones, A, b)
        dims = {"l": cones.l, "q": list(cones.q), "s": []}
        args = (matrix(A), matrix(b)) if A.shape[0] else ()
        ref = solvers.conelp(matrix(c), matrix(G), matrix(h), dims, *args)
        if ref["status"] != "optimal":
            continue
        assert res.status in ("optimal", "inaccurate")
        ref_obj = ref["primal objective"]
        assert res.pcost == pytest.approx(ref_obj, abs=1e-5 * max(1.0, abs(ref_obj)))
        checked += 1


def test_shape_validation():
    with pytest.raises(ValueError):
        solve_socp(np.zeros(2), np.zeros((3, 2)), np.zeros(2), Cones(3))
