"""Hot Monte Carlo kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``DPLANG_DISABLE_NUMBA`` is unset (or set to ``0``). Both paths take
and return the same dtypes and agree exactly on integer outputs; the
selection kernel can differ only when a uniform lands within one ulp of a
cumulative-weight boundary.
"""

import contextlib
import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


# numpy reference implementations --------------------------------------------


def _cdf_codes_np(u, cdf):
    codes = np.searchsorted(cdf, u, side="right")
    np.minimum(codes, len(cdf) - 1, out=codes)
    return codes.astype(np.int64, copy=False)


def _geometric_codes_np(u):
    with np.errstate(divide="ignore"):
        k = np.ceil(-np.log2(4.0 * (1.0 - u)))
    codes = np.where(u < 0.75, 0, np.maximum(k, 1.0))
    return codes.astype(np.int64)


def _count_codes_np(codes, n_codes):
    t = codes.shape[0]
    flat = codes + (np.arange(t, dtype=np.int64) * n_codes)[:, None]
    counts = np.bincount(flat.ravel(), minlength=t * n_codes)
    return counts.reshape(t, n_codes).astype(np.int64, copy=False)


def _prefix_min_counts_np(counts, member, fill):
    masked = np.where(member[None, :, :], counts[:, None, :], fill)
    return np.minimum.accumulate(masked, axis=2).astype(np.int64, copy=False)


def _em_select_np(scores, scale, u):
    shifted = scale * (scores - scores.max(axis=1, keepdims=True))
    cum = np.cumsum(np.exp(shifted), axis=1)
    above = cum > (u * cum[:, -1])[:, None]
    idx = np.argmax(above, axis=1)
    # argmax of an all-False row is 0; such rows can only come from u rounding
    idx[~above.any(axis=1)] = scores.shape[1] - 1
    return idx.astype(np.int64)


# numba implementations ------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _cdf_codes_nb(u, cdf):
        flat = u.ravel()
        out = np.empty(flat.size, dtype=np.int64)
        m = cdf.size
        for i in range(flat.size):
            x = flat[i]
            lo = 0
            hi = m
            while lo < hi:
                mid = (lo + hi) >> 1
                if cdf[mid] <= x:
                    lo = mid + 1
                else:
                    hi = mid
            out[i] = lo if lo < m else m - 1
        return out.reshape(u.shape)

    @numba.njit(cache=True)
    def _geometric_codes_nb(u):
        flat = u.ravel()
        out = np.empty(flat.size, dtype=np.int64)
        for i in range(flat.size):
            x = flat[i]
            if x < 0.75:
                out[i] = 0
            else:
                k = math.ceil(-math.log2(4.0 * (1.0 - x)))
                out[i] = k if k > 1 else 1
        return out.reshape(u.shape)

    @numba.njit(cache=True)
    def _count_codes_nb(codes, n_codes):
        t, n = codes.shape
        out = np.zeros((t, n_codes), dtype=np.int64)
        for r in range(t):
            for c in range(n):
                out[r, codes[r, c]] += 1
        return out

    @numba.njit(cache=True)
    def _prefix_min_counts_nb(counts, member, fill):
        t, h = counts.shape
        f = member.shape[0]
        out = np.empty((t, f, h), dtype=np.int64)
        for r in range(t):
            for i in range(f):
                running = fill
                for k in range(h):
                    if member[i, k] and counts[r, k] < running:
                        running = counts[r, k]
                    out[r, i, k] = running
        return out

    @numba.njit(cache=True)
    def _em_select_nb(scores, scale, u):
        t, m = scores.shape
        out = np.empty(t, dtype=np.int64)
        cum = np.empty(m, dtype=np.float64)
        for r in range(t):
            top = scores[r, 0]
            for k in range(1, m):
                if scores[r, k] > top:
                    top = scores[r, k]
            acc = 0.0
            for k in range(m):
                acc += math.exp(scale * (scores[r, k] - top))
                cum[k] = acc
            thr = u[r] * acc
            pick = m - 1
            for k in range(m):
                if cum[k] > thr:
                    pick = k
                    break
            out[r] = pick
        return out


_NUMPY = {
    "cdf_codes": _cdf_codes_np,
    "geometric_codes": _geometric_codes_np,
    "count_codes": _count_codes_np,
    "prefix_min_counts": _prefix_min_counts_np,
    "em_select": _em_select_np,
}

_NUMBA = None
if numba is not None:
    _NUMBA = {
        "cdf_codes": _cdf_codes_nb,
        "geometric_codes": _geometric_codes_nb,
        "count_codes": _count_codes_nb,
        "prefix_min_counts": _prefix_min_counts_nb,
        "em_select": _em_select_nb,
    }


def _default_backend():
    if _NUMBA is None:
        return "numpy"
    flag = os.environ.get("DPLANG_DISABLE_NUMBA", "").strip().lower()
    return "numpy" if flag not in ("", "0", "false", "no") else "numba"


_state = {"name": _default_backend()}


def available_backends():
    """Names of the kernel backends usable in this interpreter."""
    return ("numpy",) if _NUMBA is None else ("numpy", "numba")


def backend():
    """Name of the active kernel backend."""
    return _state["name"]


def set_backend(name):
    """Select the kernel backend for subsequent calls.

    Args:
        name: ``"numba"`` or ``"numpy"``.
    """
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _state["name"] = name


@contextlib.contextmanager
def using_backend(name):
    """Temporarily switch the kernel backend inside a ``with`` block."""
    previous = backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def _impl(key):
    table = _NUMBA if _state["name"] == "numba" else _NUMPY
    return table[key]


def cdf_codes(u, cdf):
    """Map uniforms to atom codes by inverse CDF.

    Args:
        u: Uniforms in [0, 1), any shape.
        cdf: Increasing cumulative masses; the last entry should be 1.

    Returns:
        int64 array shaped like ``u``; entry is the first position whose
        cumulative mass exceeds the uniform, clamped to the last atom.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    return _impl("cdf_codes")(u, np.ascontiguousarray(cdf, dtype=np.float64))


def geometric_codes(u):
    """Map uniforms to anchor/family codes of the 3/4 + 2^-k/4 law.

    Code 0 is the anchor (u < 3/4); code k >= 1 is family member k.
    """
    return _impl("geometric_codes")(np.ascontiguousarray(u, dtype=np.float64))


def count_codes(codes, n_codes):
    """Per-row histogram of codes.

    Args:
        codes: int64 array of shape (trials, n) with values in [0, n_codes).
        n_codes: Number of histogram bins.

    Returns:
        int64 array of shape (trials, n_codes).
    """
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    return _impl("count_codes")(codes, int(n_codes))


def prefix_min_counts(counts, member, fill):
    """Running minimum of counts over each language's members.

    Args:
        counts: int64 array (trials, h); column k holds N_S(u_{k+1}).
        member: bool array (f, h); member[i, k] says u_{k+1} is in language i+1.
        fill: Value used while no member has been seen yet (the sample size).

    Returns:
        int64 array (trials, f, h) whose [r, i, t-1] entry is the minimum
        count over members of language i+1 with index at most t, or ``fill``.
    """
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    member = np.ascontiguousarray(member, dtype=np.bool_)
    return _impl("prefix_min_counts")(counts, member, int(fill))


def em_select(scores, scale, u):
    """Exponential-mechanism draws, one uniform per row.

    Args:
        scores: float64 array (trials, m) of candidate scores.
        scale: The factor epsilon / (2 * sensitivity).
        u: Uniforms in [0, 1), one per row.

    Returns:
        int64 array of zero-based selected candidates.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    return _impl("em_select")(scores, float(scale), u)
