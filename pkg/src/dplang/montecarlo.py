"""Trial blocking, per-trial draws and optional process parallelism.

Every trial owns a stream derived from (master seed, grid index, trial
index) and consumes it in a fixed order: n uniforms for the sample, then the
mechanism's draws, then the public index j (generation only). Blocks of
consecutive trials are drawn together so the kernels can work on matrices;
the result of any trial does not depend on how trials are blocked or which
worker runs them.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from dplang.rng import trial_stream

# uniforms held in memory per block (about 16 MB of float64)
BLOCK_ELEMENTS = 1 << 21


def trial_block_draws(master_seed, grid_index, start, stop, n, extra=0, kind="uniform", j_cap=None):
    """Draw the random inputs of trials ``start .. stop-1``.

    Args:
        master_seed: Experiment seed.
        grid_index: Grid position.
        start: First trial index.
        stop: One past the last trial index.
        n: Sample size (uniforms per trial for the dataset).
        extra: Mechanism draws per trial.
        kind: ``"uniform"`` or ``"normal"`` for the mechanism draws.
        j_cap: If set, also draw j uniform on {1, ..., j_cap} after the mechanism.

    Returns:
        ``(u, mech, j)`` with shapes (T, n), (T, extra) and (T,) (j is None
        when ``j_cap`` is None).
    """
    t = stop - start
    u = np.empty((t, n), dtype=np.float64)
    mech = np.empty((t, extra), dtype=np.float64)
    j = np.empty(t, dtype=np.int64) if j_cap is not None else None
    for r in range(t):
        rng = trial_stream(master_seed, grid_index, start + r)
        rng.random(out=u[r])
        if extra:
            mech[r] = rng.standard_normal(extra) if kind == "normal" else rng.random(extra)
        if j is not None:
            j[r] = rng.integers(1, j_cap, endpoint=True)
    return u, mech, j


def trial_block_uniforms(master_seed, grid_index, start, stop, n, extra=0, kind="uniform"):
    """Like :func:`trial_block_draws` without the public index."""
    u, mech, _ = trial_block_draws(master_seed, grid_index, start, stop, n, extra, kind)
    return u, mech


def block_ranges(trials, n):
    """Split ``range(trials)`` into consecutive blocks sized for memory."""
    size = max(1, min(int(trials), BLOCK_ELEMENTS // max(1, int(n))))
    return [(a, min(a + size, trials)) for a in range(0, trials, size)]


def run_blocks(block_fn, job_fn, trials, n, workers=1):
    """Evaluate ``block_fn(job_fn(start, stop))`` over all blocks, in block order.

    Args:
        block_fn: Picklable function of one job tuple.
        job_fn: Builds the job tuple for a trial range.
        trials: Total trials.
        n: Sample size, used to size blocks.
        workers: Number of worker processes; 1 runs in-process.

    Returns:
        Concatenation of the per-block outputs when they are arrays, or the
        list of block outputs otherwise.
    """
    jobs = [job_fn(a, b) for a, b in block_ranges(trials, n)]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(block_fn, jobs))
    else:
        parts = [block_fn(job) for job in jobs]
    if parts and isinstance(parts[0], np.ndarray):
        return np.concatenate(parts)
    return parts
