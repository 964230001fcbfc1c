import itertools
import logging

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fairfilter.metrics import (
    as_mask,
    auc,
    calders_verwer,
    phi_from_prule,
    prule,
    prule_from_phi,
    target_phi,
    utility_loss,
)

from conftest import auc_pairs

scores = arrays(np.float64, st.integers(2, 20), elements=st.floats(0, 10))


def test_prule_anchor():
    assert prule([0.6, 0.8], [0]) == 0.75


def test_prule_degenerate():
    assert prule([0.0, 0.0, 0.0], [0]) == 0.0
    assert prule([1.0, 1.0, 1.0, 1.0], [0, 1]) == 1.0


def test_prule_rejects_negative_and_empty_groups():
    with pytest.raises(ValueError):
        prule([-0.1, 0.5], [0])
    with pytest.raises(ValueError):
        prule([0.1, 0.5], np.array([True, True]))


@settings(max_examples=100, deadline=None)
@given(scores, st.floats(0.01, 100), st.data())
def test_prule_invariances(r, c, data):
    n = len(r)
    s = np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    assume(0 < s.sum() < n)
    p = prule(r, s)
    assert 0 <= p <= 1
    assert prule(r, ~s) == p
    assert prule(c * r, s) == pytest.approx(p, rel=1e-12)


def test_prule_scale_exact_for_powers_of_two(rng):
    r = rng.random(30)
    s = rng.random(30) < 0.4
    assert prule(4.0 * r, s) == prule(r, s)


def test_phi_prule_conversions():
    assert phi_from_prule(1, 25, 100) == 0.25
    assert prule_from_phi(0.2, 25, 100) == pytest.approx(0.75, abs=1e-15)
    for phi in np.linspace(0.01, 0.99, 25):
        for n_s, n in [(1, 2), (25, 100), (7, 50), (40, 41)]:
            assert phi_from_prule(prule_from_phi(phi, n_s, n), n_s, n) == pytest.approx(phi, abs=1e-12)


def test_prule_from_phi_domain():
    with pytest.raises(ValueError):
        prule_from_phi(1.0, 2, 5)


def test_target_phi_orientation():
    # protected group lower-scored
    phi, swapped = target_phi([1.0, 3.0, 3.0, 3.0], [0])
    assert not swapped and phi == 0.25
    # protected group higher-scored: complement is treated as protected
    phi, swapped = target_phi([3.0, 1.0, 1.0, 1.0], [0])
    assert swapped and phi == pytest.approx(0.25)
    # at target 0.5 the fair mass split lands the group at prule 0.5 either way
    for r in ([1.0, 3.0, 3.0, 3.0], [3.0, 1.0, 1.0, 1.0]):
        phi, _ = target_phi(r, [0], 0.5)
        fair = np.array([phi, (1 - phi) / 3, (1 - phi) / 3, (1 - phi) / 3])
        assert prule(fair, [0]) == pytest.approx(0.5, abs=1e-12)


def test_utility_loss_examples():
    assert utility_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert utility_loss([0.5, 2.0], [1.0, 2.0]) == 0.25
    r = np.array([0.3, 0.2, 0.5])
    assert utility_loss(2 * r, r) == 1.0


def test_utility_loss_floor(caplog):
    with caplog.at_level(logging.WARNING):
        assert utility_loss([0.5, 7.0], [1.0, 0.0]) == 0.5
    assert "skips 1 nodes" in caplog.text
    with pytest.raises(ValueError):
        utility_loss([0.5, 7.0], [1.0, 0.0], strict=True)
    with pytest.raises(ValueError):
        utility_loss([0.5], [0.0])
    with pytest.raises(ValueError):
        utility_loss([0.5, 1.0], [1.0])


@settings(max_examples=100, deadline=None)
@given(scores, st.data())
def test_utility_loss_nonnegative(r_orig, data):
    assume(np.any(r_orig > 1e-12))
    r_fair = data.draw(arrays(np.float64, len(r_orig), elements=st.floats(0, 10)))
    assert utility_loss(r_fair, r_orig) >= 0
    assert utility_loss(r_orig, r_orig) == 0


def test_auc_examples():
    assert auc([0.9, 0.8, 0.1, 0.2], [0, 1]) == 1.0
    assert auc([0.5] * 6, [0, 3]) == 0.5
    s = [0.3, 0.1, 0.3, 0.7, 0.2]
    y = [True, False, False, True, False]
    assert auc(s, np.array(y)) == auc_pairs(s, y)


def test_auc_eval_mask_drops_nodes():
    s = [0.9, 0.8, 0.1, 0.95]
    mask = np.array([True, True, True, False])
    assert auc(s, [0], mask) == 1.0
    with pytest.raises(ValueError):
        auc(s, [0, 1, 2, 3])


def test_auc_exhaustive_small_instances(rng):
    for _ in range(300):
        n = int(rng.integers(2, 21))
        s = rng.integers(0, 5, size=n) / 4.0  # many ties
        y = rng.random(n) < 0.4
        if y.all() or not y.any():
            continue
        assert auc(s, y) == auc_pairs(s, y)


def test_auc_every_labeling_of_five_nodes():
    s = [0.1, 0.4, 0.4, 0.2, 0.9]
    for k in range(1, 5):
        for pos in itertools.combinations(range(5), k):
            y = np.zeros(5, dtype=bool)
            y[list(pos)] = True
            assert auc(s, y) == auc_pairs(s, y)


def test_calders_verwer():
    assert calders_verwer([0.5, 0.5, 0.5, 0.5], [0, 1]) == 0.0
    assert calders_verwer([0.8, 0.6], [1]) == pytest.approx(0.2)
    assert calders_verwer([0.4, 0.3], [1]) == pytest.approx(0.1)
    assert prule([0.8, 0.6], [1]) == prule([0.4, 0.3], [1]) == 0.75
    r = np.array([1.0, 3.0, 2.0, 2.0])
    assert calders_verwer(r, [0, 1], normalize=True) == pytest.approx(abs(2 / 8 - 2 / 8))
    assert calders_verwer([1.0, 3.0, 0.0, 4.0], [0], normalize=True) == pytest.approx(abs(1 / 8 - 7 / 24))


def test_as_mask():
    np.testing.assert_array_equal(as_mask([0, 2], 4), [True, False, True, False])
    with pytest.raises(ValueError):
        as_mask([0, 2])
    with pytest.raises(ValueError):
        as_mask(np.array([True, False]), 3)
