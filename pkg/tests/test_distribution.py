import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from structlab import distribution as dist
from structlab.distribution import Support


def naive_project(target_atoms, target_probs, sup):
    """Per-atom loop straight from the C51 projection rule."""
    out = np.zeros(sup.n_atoms)
    z = [sup.v_min + i * sup.delta for i in range(sup.n_atoms)]
    for t, p in zip(target_atoms, target_probs):
        t = min(max(t, sup.v_min), sup.v_max)
        for i, zi in enumerate(z):
            w = 1.0 - abs(t - zi) / sup.delta
            if w > 0:
                out[i] += p * w
    return out


SUP3 = Support(0.0, 2.0, 3)


def test_support_atoms():
    sup = Support()
    assert sup.atoms[0] == -100 and sup.atoms[-1] == 0 and sup.delta == 2.0
    assert np.all(np.diff(sup.atoms) > 0)
    with pytest.raises(ValueError):
        Support(0.0, 0.0, 3)
    with pytest.raises(ValueError):
        Support(0.0, 1.0, 1)


def test_mean_examples():
    assert dist.mean(Support(-10, 0, 11).one_hot(0), Support(-10, 0, 11)) == -10
    assert dist.mean(np.full(3, 1 / 3), Support(-1, 1, 3)) == pytest.approx(0.0, abs=1e-15)
    assert dist.mean(np.array([0.25, 0.75]), Support(0, 4, 2)) == pytest.approx(3.0)


def test_std_examples():
    sup = Support(-1, 1, 3)
    assert dist.std(sup.one_hot(2), sup) == 0.0
    assert dist.std(np.array([0.5, 0.0, 0.5]), sup) == pytest.approx(1.0)
    assert dist.std(np.full(3, 1 / 3), SUP3) == pytest.approx(math.sqrt(2 / 3), abs=1e-12)


def test_project_identity_on_grid():
    p = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(dist.project(SUP3.atoms, p, SUP3), p)


def test_project_clips_below():
    out = dist.project(np.array([-5.0, -5.0, -5.0]), np.array([1.0, 0.0, 0.0]), SUP3)
    np.testing.assert_array_equal(out, [1.0, 0.0, 0.0])


def test_project_interpolates():
    out = dist.project(np.array([0.25, 1.0, 2.0]), np.array([1.0, 0.0, 0.0]), SUP3)
    np.testing.assert_allclose(out, [0.75, 0.25, 0.0], atol=1e-15)


def test_bellman_target_examples():
    sup = Support()
    atoms, probs = dist.bellman_target(sup.uniform(), -1.0, 1.0, True, sup)
    np.testing.assert_array_equal(atoms, np.full(51, -1.0))
    proj = dist.project(atoms, probs, sup)
    # -1 is midway between atoms -2 and 0
    np.testing.assert_allclose(proj[-2:], [0.5, 0.5])
    atoms, _ = dist.bellman_target(sup.uniform(), 0.0, 1.0, False, sup)
    np.testing.assert_array_equal(atoms, sup.atoms)
    one = sup.one_hot(int(np.flatnonzero(sup.atoms == -4)[0]))
    atoms, probs = dist.bellman_target(one, -2.0, 1.0, False, sup)
    proj = dist.project(atoms, probs, sup)
    assert dist.mean(proj, sup) == pytest.approx(-6.0)
    assert proj[sup.atoms == -6][0] == 1.0
    with pytest.raises(ValueError):
        dist.bellman_target(one, 0.0, 1.5, False, sup)


def test_bellman_target_unit_shift_matches_analytic():
    sup = Support(-10, 0, 11)  # unit spacing, so -3 - 1 = -4 lands on an atom
    one = sup.one_hot(7)
    assert sup.atoms[7] == -3
    atoms, probs = dist.bellman_target(one, -1.0, 1.0, False, sup)
    proj = dist.project(atoms, probs, sup)
    np.testing.assert_array_equal(proj, sup.one_hot(6))


simplex = arrays(np.float64, 7, elements=st.floats(0.0, 1.0)).filter(lambda p: p.sum() > 1e-3)
targets = arrays(np.float64, 7, elements=st.floats(-15.0, 15.0))


@settings(max_examples=300)
@given(simplex, targets)
def test_project_matches_naive_loop(p, t):
    sup = Support(-10.0, 10.0, 7)
    p = p / p.sum()
    out = dist.project(t, p, sup)
    # snapping onto a grid atom may move up to 1e-10 atom units of mass
    np.testing.assert_allclose(out, naive_project(t, p, sup), atol=1e-9)
    assert abs(out.sum() - 1.0) <= 1e-9 and np.all(out >= 0)
    clipped_mean = float(p @ np.clip(t, sup.v_min, sup.v_max))
    assert dist.mean(out, sup) == pytest.approx(clipped_mean, abs=1e-9)


@given(simplex)
def test_std_zero_iff_point_mass(p):
    sup = Support(-10.0, 10.0, 7)
    p = p / p.sum()
    s = dist.std(p, sup)
    assert s >= 0
    if s < 1e-9:
        assert np.count_nonzero(p > 1e-12) == 1


def test_project_batched_shape():
    sup = Support()
    rng = np.random.default_rng(0)
    p = rng.dirichlet(np.ones(51), size=(4, 3))
    t = rng.uniform(-120, 20, size=(4, 3, 51))
    out = dist.project(t, p, sup)
    assert out.shape == (4, 3, 51)
    np.testing.assert_allclose(out[2, 1], naive_project(t[2, 1], p[2, 1], sup), atol=1e-12)
