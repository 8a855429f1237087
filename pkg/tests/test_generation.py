import math

import numpy as np
import pytest

from dplang.distribution import Dataset, draw_dataset, named_distribution
from dplang.errors import NotContained
from dplang.generation import (
    GenConfig,
    approx_dp_generate,
    coverage_stats,
    dp_generate,
    estimate_gen_err,
    gen_error_bound,
    gen_scores,
    j_cap,
    min_prefix_count,
    nonprivate_generate,
    pair_sigma,
    run_gen_trials,
)
from dplang.instances import named_instance
from dplang.mechanisms import PrivacyParams, ScoreVector, exp_mech_probs
from dplang.rng import trial_stream
from dplang.universe import ArithmeticLanguage, Collection

import oracles

# frozen from oracles.gen_bound(2000, 2, 125, 2, 0.125, 1, "public")
PUBLIC_BOUND = 1.0724015471127213e-13
# frozen from oracles.gaussian_sigma(8 / 125 * 4, 1, 0.05)
PAIR_SIGMA = 0.649541755483914


def test_min_prefix_count_examples(pair):
    L, Lp = pair
    assert min_prefix_count(Dataset([1, 1, 3]), L, 0) == 3
    assert min_prefix_count(Dataset([1, 1, 3]), L, 4) == 1
    s = draw_dataset(named_distribution("iidp-d"), 500, trial_stream(0, 0, 0))
    assert min_prefix_count(s, Lp, 4) == 0


def _public(W=4, g=3, f=2, eps=1.0):
    return GenConfig(f, g, PrivacyParams(eps), "public", witness_bound=W)


def _joint(h=8, g=3, f=2, eps=1.0, mode="joint", delta=0.0):
    return GenConfig(f, g, PrivacyParams(eps, delta), mode, h_schedule=h)


def test_window_scores_good_and_bad(collection):
    s = Dataset([1] * 3 + [3] * 3 + [6] * 3)
    d = gen_scores(s, collection, _public())
    assert list(d.scores) == [0.0, -3.0]
    assert d.sensitivity == 1.0


def test_pair_scores_separation(collection):
    s = Dataset([1] * 3 + [3] * 3 + [6] * 3)
    d = gen_scores(s, collection, _joint())
    assert d.scores.shape == (2, 8)
    assert d.scores[0, 7] == 8.0
    assert d.sensitivity == 8 / 3
    # the bad language scores at most i(C, D) - 1 = 3 everywhere
    assert d.scores[1].max() <= 3.0


def test_kth_member_above_window(pair):
    assert pair[0].kth_member_above(4, 2) == 9


def test_public_output_follows_selection(collection):
    s = Dataset([1] * 3 + [3] * 3)
    for r in range(50):
        out, diag = dp_generate(s, collection, _public(), trial_stream(1, 0, r), return_diagnostics=True)
        lang = collection.language(diag.selected_language)
        assert out == lang.kth_member_above(4, diag.j_hat)
        assert 1 <= diag.j_hat <= j_cap(s.n)


def test_two_candidate_gap_closed_form():
    g, eps = 10, 0.5
    p = exp_mech_probs(ScoreVector([0.0, -float(g)], 1.0), eps)
    w = math.exp(-eps * g / 2)
    assert p[1] == pytest.approx(w / (1 + w), rel=1e-13)
    assert p[1] == pytest.approx(oracles.em_probs([0, -g], eps, 1)[1], rel=1e-13)


def test_zero_noise_approx_selects_best_pair(collection):
    s = Dataset([1] * 3 + [3] * 3 + [6] * 3)
    cfg = _joint(mode="approximate-joint", delta=0.05)
    out, diag = approx_dp_generate(s, collection, cfg, np.random.default_rng(0), noise_override=np.zeros((2, 8)),
                                   return_diagnostics=True)
    assert (diag.selected_language, diag.threshold) == (1, 8)
    assert out > 8 and named_distribution("iidp-d").in_support(out)


def test_small_noise_selects_good_language(collection, rng):
    s = Dataset([1] * 3 + [3] * 3 + [6] * 3)
    cfg = _joint(mode="approximate-joint", delta=0.05)
    for _ in range(200):
        noise = rng.uniform(-1, 1, size=(2, 8))
        _, diag = approx_dp_generate(s, collection, cfg, rng, noise_override=noise, return_diagnostics=True)
        assert diag.selected_language == 1


def test_approx_tie_break_is_lexicographic(collection):
    s = Dataset([1] * 3 + [3] * 3 + [6] * 3)
    cfg = _joint(mode="approximate-joint", delta=0.05)
    noise = np.zeros((2, 8))
    noise[0, 7] = -1.0
    noise[0, 6] = 0.0  # (1, 7) and (1, 8) both reach 7
    _, diag = approx_dp_generate(s, collection, cfg, np.random.default_rng(0), noise_override=noise,
                                 return_diagnostics=True)
    assert (diag.selected_language, diag.threshold) == (1, 7)


def test_pair_sigma_example():
    assert pair_sigma(2, 125, 8, 1.0, 0.05) == pytest.approx(PAIR_SIGMA, rel=1e-13)


def test_nonprivate_examples(pair):
    L = pair[0]
    coll = Collection([L])
    assert nonprivate_generate(Dataset([1, 3]), coll, 1) == 6
    assert nonprivate_generate(Dataset([2]), coll, 1) == 1


def test_nonprivate_prefers_good_language(iidp):
    s = draw_dataset(iidp.distribution, 2000, trial_stream(0, 0, 1))
    out = nonprivate_generate(s, iidp.collection, 2)
    assert iidp.distribution.in_support(out) and out not in s


def test_coverage_examples(pair):
    d = named_distribution("iidp-d")
    c = coverage_stats(d, pair[0], 4)
    assert c.indices == (1, 3) and c.p_star == 0.125
    c = coverage_stats(d, pair[0], 1)
    assert c.indices == (1,) and c.p_star == 0.75
    c = coverage_stats(d, ArithmeticLanguage(0, 3), 2)
    assert c.vacuous and c.p_star == 1.0
    with pytest.raises(NotContained):
        coverage_stats(d, pair[1], 4)


def test_bound_examples():
    eps = PrivacyParams(1.0)
    assert gen_error_bound(2000, 2, 125, 2, 0.125, eps, "public") == pytest.approx(PUBLIC_BOUND, rel=1e-12)
    assert gen_error_bound(2000, 2, 1, 2, 1.0, eps, "joint", h=2) == 1.0
    inf = gen_error_bound(64, 2, 5, 2, 0.5, PrivacyParams(math.inf), "public")
    assert inf == pytest.approx(2 * math.exp(-4) + math.exp(-32), rel=1e-14)
    for mode, h, delta in (("joint", 8, None), ("approximate-joint", 8, 1e-6)):
        privacy = PrivacyParams(1.0, delta or 0.0)
        want = oracles.gen_bound(3000, 2, 180, 3, 1 / 16, 1.0, mode, h, delta)
        assert gen_error_bound(3000, 2, 180, 3, 1 / 16, privacy, mode, h) == pytest.approx(want, rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(2, 3, PrivacyParams(1.0), "public")
    with pytest.raises(ValueError):
        GenConfig(2, 3, PrivacyParams(1.0), "joint")
    with pytest.raises(ValueError):
        GenConfig(2, 3, PrivacyParams(1.0), "approximate-joint", h_schedule=8)


def test_estimate_nonprivate_good_language():
    inst = named_instance("iidp-d", collection=[{"kind": "ap", "offset": 0, "step": 3, "extras": [1]}])
    est = estimate_gen_err(inst, GenConfig(1, None, PrivacyParams(1.0), "nonprivate"), 200, 300, 0)
    assert est.failures == 0 and est.theoretical_bound is None


def test_estimate_without_contained_language():
    inst = named_instance("point:2", collection="mod3-pair")
    est = estimate_gen_err(inst, GenConfig(2, None, PrivacyParams(1.0), "nonprivate"), 50, 200, 0)
    assert est.estimate == 1.0
    assert not est.guaranteed


def test_batch_matches_single_trials(collection):
    inst = named_instance("iidp")
    for cfg in (_public(g=20), _joint(g=10), _joint(g=10, mode="approximate-joint", delta=0.01)):
        batch = run_gen_trials(inst, cfg, 200, 20, 5, grid_index=1)
        for r in range(20):
            rng = trial_stream(5, 1, r)
            s = draw_dataset(inst.distribution, 200, rng)
            fn = approx_dp_generate if cfg.mode == "approximate-joint" else dp_generate
            assert fn(s, collection, cfg, rng) == batch.outputs[r]


def test_public_run_small_scale(iidp):
    est = estimate_gen_err(iidp, _public(g=50), 800, 500, 3)
    assert est.failures == 0
    assert est.guaranteed
