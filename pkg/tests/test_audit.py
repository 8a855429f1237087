import math

import numpy as np
import pytest

from dplang.audit import (
    ScoreBuilder,
    audit_exp_ratio,
    audit_gaussian,
    audit_sensitivity,
    max_log_ratio,
    noise_moment_check,
    reference_sigma,
)
from dplang.distribution import Dataset
from dplang.errors import InvalidDelta

import oracles

# frozen from oracles.gaussian_sigma(sqrt(3) / 20, 1, 0.05)
SIGMA_ID_EXAMPLE = 0.2197342426046132


def test_identical_neighbor_ratio_zero(ipp):
    b = ScoreBuilder("identification", ipp.collection, 3)
    s = Dataset([1, 1, 3, 1])
    assert max_log_ratio(b(s), b(s), 1.0) == 0.0


@pytest.mark.parametrize("eps", [0.1, 1.0, 2.0])
def test_identification_ratio(ipp, eps):
    rep = audit_exp_ratio(ScoreBuilder("identification", ipp.collection, 3), ipp.distribution, 20, eps, 200, 0)
    assert rep.passed and rep.statistic <= eps + 1e-9 and rep.pairs == 200


def test_window_and_pair_ratio(iidp):
    for b in (ScoreBuilder("q_W", iidp.collection, 2, g=4, W=4), ScoreBuilder("q_pair", iidp.collection, 2, g=4, h=8)):
        rep = audit_exp_ratio(b, iidp.distribution, 24, 0.7, 100, 1)
        assert rep.passed


@pytest.mark.parametrize("k", [2, 3])
def test_group_privacy(ipp, k):
    rep = audit_exp_ratio(ScoreBuilder("identification", ipp.collection, 3), ipp.distribution, 20, 0.5, 100, 2, steps=k)
    assert rep.bound == k * 0.5 and rep.passed


def test_sensitivity_examples(ipp, iidp):
    rep = audit_sensitivity(ScoreBuilder("identification", ipp.collection, 3), ipp.distribution, 12, 100, 0)
    assert rep.bound == 1.5 and rep.passed
    rep = audit_sensitivity(ScoreBuilder("q_W", iidp.collection, 2, g=4, W=4), iidp.distribution, 24, 100, 0)
    assert rep.bound == 1.0 and rep.passed
    rep = audit_sensitivity(ScoreBuilder("q_pair", iidp.collection, 2, g=4, h=8), iidp.distribution, 24, 100, 0)
    assert rep.bound == 2.0 and rep.passed


def test_audit_is_deterministic(ipp):
    b = ScoreBuilder("identification", ipp.collection, 3)
    a = audit_exp_ratio(b, ipp.distribution, 20, 1.0, 50, 9)
    c = audit_exp_ratio(b, ipp.distribution, 20, 1.0, 50, 9)
    assert a == c


def test_report_flags_violation(ipp):
    # declaring too small a sensitivity must be caught
    class Understated(ScoreBuilder):
        def sensitivity(self, n):
            return 0.1

    rep = audit_sensitivity(Understated("identification", ipp.collection, 3), ipp.distribution, 12, 50, 0)
    assert not rep.passed and rep.margin < 0


def test_gaussian_examples():
    rep = audit_gaussian(math.sqrt(3) / 20, 1.0, 0.05, f=3, n=20)
    assert rep.passed and rep.statistic <= 1e-12
    assert reference_sigma(math.sqrt(3) / 20, 1.0, 0.05) == pytest.approx(SIGMA_ID_EXAMPLE, rel=1e-15)
    near_one = reference_sigma(1.0, 1.0, 1 - 1e-15)
    assert near_one == pytest.approx(math.sqrt(2 * math.log(1.25)), rel=1e-12)
    assert reference_sigma(1.0, 2.0, 0.05) == pytest.approx(reference_sigma(1.0, 1.0, 0.05) / 2, rel=1e-15)
    with pytest.raises(InvalidDelta):
        audit_gaussian(1.0, 1.0, 1.5)


def test_reference_sigma_matches_oracle():
    assert reference_sigma(0.3, 0.25, 1e-6) == pytest.approx(oracles.gaussian_sigma(0.3, 0.25, 1e-6), rel=1e-15)


def test_noise_moment_check():
    assert abs(noise_moment_check(0.5, 10**6, np.random.default_rng(0)) - 1) <= 0.005


def test_unknown_family(ipp):
    with pytest.raises(ValueError):
        ScoreBuilder("nope", ipp.collection, 3)
