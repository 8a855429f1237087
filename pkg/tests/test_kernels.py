import numpy as np
import pytest

from dplang import _kernels
from dplang.distribution import named_distribution
from dplang.generation import GenConfig, run_gen_trials
from dplang.identification import IdConfig, run_id_trials
from dplang.instances import named_instance
from dplang.mechanisms import PrivacyParams

BACKENDS = _kernels.available_backends()


def _inputs():
    rng = np.random.default_rng(0)
    u = rng.random((50, 300))
    u[0, :3] = [0.0, 0.75, np.nextafter(1.0, 0)]
    return {
        "u": u,
        "cdf": named_distribution("atoms:1=0.2,3=0.3,8=0.5").cdf,
        "counts": rng.integers(0, 9, size=(40, 12)),
        "member": rng.random((5, 12)) < 0.4,
        "scores": rng.normal(0, 30, size=(400, 7)),
        "su": rng.random(400),
    }


def _run_all(x):
    codes = _kernels.cdf_codes(x["u"], x["cdf"])
    return [
        codes,
        _kernels.geometric_codes(x["u"]),
        _kernels.count_codes(codes, 3),
        _kernels.prefix_min_counts(x["counts"], x["member"], 77),
        _kernels.em_select(x["scores"], 0.3, x["su"]),
    ]


def test_numba_available():
    assert "numpy" in BACKENDS


@pytest.mark.skipif("numba" not in BACKENDS, reason="numba not installed")
def test_backends_agree_exactly():
    x = _inputs()
    with _kernels.using_backend("numpy"):
        a = _run_all(x)
    with _kernels.using_backend("numba"):
        b = _run_all(x)
    for p, q in zip(a, b):
        assert p.dtype == q.dtype and np.array_equal(p, q)


@pytest.mark.skipif("numba" not in BACKENDS, reason="numba not installed")
def test_backends_agree_end_to_end():
    ipp, iidp = named_instance("ipp"), named_instance("iidp")
    id_cfg = IdConfig(5, PrivacyParams(0.3), "pure")
    gen_cfg = GenConfig(2, 20, PrivacyParams(0.5), "joint", h_schedule=8)
    out = {}
    for b in BACKENDS:
        with _kernels.using_backend(b):
            out[b] = (run_id_trials(ipp, id_cfg, 100, 500, 1), run_gen_trials(iidp, gen_cfg, 200, 200, 1).outputs)
    assert np.array_equal(out["numpy"][0], out["numba"][0])
    assert out["numpy"][1] == out["numba"][1]


def test_geometric_codes_closed_form():
    u = np.array([0.0, 0.74, 0.75, 0.8, 0.9, 0.95, 0.875])
    # boundaries map to the lower family member, as the ceiling dictates
    assert _kernels.geometric_codes(u).tolist() == [0, 0, 1, 1, 2, 3, 1]


def test_prefix_min_fill_when_no_members():
    counts = np.array([[5, 1, 7]])
    member = np.array([[False, True, True], [False, False, False]])
    out = _kernels.prefix_min_counts(counts, member, 99)
    assert out.tolist() == [[[99, 1, 1], [99, 99, 99]]]


def test_em_select_first_crossing():
    scores = np.array([[0.0, 0.0]])
    assert _kernels.em_select(scores, 1.0, np.array([0.49]))[0] == 0
    assert _kernels.em_select(scores, 1.0, np.array([0.51]))[0] == 1


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("DPLANG_DISABLE_NUMBA", "1")
    assert _kernels._default_backend() == "numpy"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")
