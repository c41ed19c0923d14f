import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from darcs.adversary import (AttackProfile, apply_gaussian, apply_gradient_ascent, apply_profile,
                             box_muller, choose_attackers)
from darcs.detection import cosine
from darcs.errors import InvalidInputError

vec = arrays(np.float64, 8, elements=st.floats(-50, 50))


def test_gaussian_examples(rng):
    u = rng.normal(size=5)
    np.testing.assert_array_equal(apply_gaussian(u, 0.0, 0.0, rng), u)
    np.testing.assert_array_equal(apply_gaussian(u, 2.0, 0.0, rng), u + 2.0)
    with pytest.raises(InvalidInputError):
        apply_gaussian(u, 0.0, -1.0, rng)


def test_gaussian_moments():
    u = np.zeros(10_000)
    diff = apply_gaussian(u, 2.0, 0.3, np.random.default_rng(11)) - u
    assert abs(diff.mean() - 2.0) < 0.02
    assert abs(diff.var() - 0.3) < 0.02


def test_box_muller_is_standard_normal():
    z = box_muller(np.random.default_rng(3), 50_000)
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1) < 0.02
    assert np.all(np.isfinite(z))


def test_gradient_ascent_examples():
    np.testing.assert_array_equal(apply_gradient_ascent(np.array([-0.1, 0.2])), [0.1, -0.2])
    np.testing.assert_array_equal(apply_gradient_ascent(np.zeros(3)), np.zeros(3))


@given(vec)
def test_gradient_ascent_involution_and_signatures(u):
    np.testing.assert_array_equal(apply_gradient_ascent(apply_gradient_ascent(u)), u)
    assert np.linalg.norm(apply_gradient_ascent(u)) == np.linalg.norm(u)
    if np.linalg.norm(u) > 1e-9:
        assert cosine(apply_gradient_ascent(u), u).value == pytest.approx(-1.0, abs=1e-12)


def test_gaussian_inflates_norm():
    r = np.random.default_rng(5)
    us = [r.normal(0, 0.1, 50) for _ in range(200)]
    noisy = [np.linalg.norm(apply_gaussian(u, 2.0, 0.3, r)) for u in us]
    assert np.mean(noisy) > 5 * np.mean([np.linalg.norm(u) for u in us])


@given(vec, st.sampled_from(["none", "gaussian", "gradient_ascent", "combined"]))
def test_benign_passthrough(u, kind):
    out = apply_profile(u, AttackProfile(kind), False, np.random.default_rng(0))
    np.testing.assert_array_equal(out, u)


@given(vec)
def test_combined_degenerate_is_negation(u):
    out = apply_profile(u, AttackProfile("combined", 0.0, 0.0), True, np.random.default_rng(0))
    np.testing.assert_array_equal(out, -u)


def test_onset_round(rng):
    u = np.ones(3)
    p = AttackProfile("gradient_ascent", onset_round=3)
    np.testing.assert_array_equal(apply_profile(u, p, True, rng, round_index=2), u)
    np.testing.assert_array_equal(apply_profile(u, p, True, rng, round_index=3), -u)


@given(st.integers(0, 10**6))
def test_attacker_set(seed):
    a = choose_attackers(25, 0.2, seed)
    assert len(a) == 5 and a == choose_attackers(25, 0.2, seed)
    assert all(0 <= v < 25 for v in a)


def test_profile_validation():
    with pytest.raises(InvalidInputError):
        AttackProfile("flip")
    with pytest.raises(InvalidInputError):
        AttackProfile("gaussian", attacker_fraction=1.0)
    assert choose_attackers(25, 0.0, 0) == frozenset()
