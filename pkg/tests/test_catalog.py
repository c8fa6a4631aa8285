import numpy as np
import pytest

from quasitunnel.catalog import CATALOG, make_field, polynomial_2d, random_polynomial_2d, sphere_tilted
from quasitunnel.fields import find_critical_points


def test_polynomial_2d_evaluates_coefficients():
    c = np.zeros((3, 3))
    c[1, 0], c[0, 2], c[1, 1] = 2.0, -1.0, 0.5
    W = polynomial_2d(c)
    x = np.array([0.3, -1.2])
    assert W.value(x) == pytest.approx(2 * 0.3 - 1.44 + 0.5 * 0.3 * -1.2)
    np.testing.assert_allclose(W.gradient(x), [2.0 + 0.5 * -1.2, -2 * -1.2 + 0.5 * 0.3])
    np.testing.assert_allclose(W.hessian(x), [[0.0, 0.5], [0.5, -2.0]])


def test_random_polynomial_family_constraints():
    rng = np.random.default_rng(7)
    for _ in range(5):
        W, cps = random_polynomial_2d(rng)
        assert len(cps) == 2
        assert all(not c.degenerate for c in cps)
        assert cps[0].w_value - cps[1].w_value >= 0.2
        assert np.linalg.norm(cps[0].location - cps[1].location) >= 0.5
        assert np.max(np.abs(np.array(W.params["coeffs"]))) > 0


def test_random_polynomial_is_seed_deterministic():
    a, _ = random_polynomial_2d(np.random.default_rng(11))
    b, _ = random_polynomial_2d(np.random.default_rng(11))
    assert a.params["coeffs"] == b.params["coeffs"]


def test_tilted_sphere_critical_points():
    W = sphere_tilted(1.0)
    # minima at cos(theta) = -1/2 on phi = 0, pi
    for p in (0.0, np.pi):
        x = np.array([2 * np.pi / 3, p])
        assert np.linalg.norm(W.gradient(x)) < 1e-14
        assert np.all(np.linalg.eigvalsh(W.hessian(x)) > 0)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_entries_instantiate(name):
    W = make_field(name)
    assert W.dimension in (1, 2)
    entry = CATALOG[name]
    if entry.kind == "flat" and name != "quadratic":
        assert len(find_critical_points(W, entry.box, 9)) >= 2
