"""Private and non-private language identification.

Scores for the first f languages are built from empirical risks. The margin
of language i is ``min_{j < i} err_S(L_j) - err_S(L_i)`` (1 for i = 1), the
deficit is ``(2/f - margin)_+`` and the score is ``i - f^2 * deficit``.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from dplang import _kernels
from dplang.distribution import outside_count
from dplang.mechanisms import PrivacyParams, ScoreVector, em_scale, exp_mech_sample, gaussian_sigma
from dplang.montecarlo import run_blocks, trial_block_uniforms
from dplang.schedules import parse_schedule
from dplang.stats import wilson_interval

MECHANISMS = ("pure", "approximate", "nonprivate")


@dataclass(frozen=True)
class IdConfig:
    """Identification algorithm settings.

    Attributes:
        f_schedule: Horizon schedule (int, text form or Schedule).
        privacy: Privacy parameters (ignored by the non-private rule).
        mechanism: ``"pure"``, ``"approximate"`` or ``"nonprivate"``.
    """

    f_schedule: object
    privacy: PrivacyParams
    mechanism: str = "pure"

    def __post_init__(self):
        object.__setattr__(self, "f_schedule", parse_schedule(self.f_schedule, "f"))
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}")
        if self.mechanism == "approximate" and not 0 < self.privacy.delta < 1:
            raise ValueError("approximate identification needs delta in (0, 1)")

    def f_at(self, n):
        return self.f_schedule(n)


@dataclass
class IdDiagnostics:
    """Intermediate quantities of one identification run (all 1-based by position).

    Attributes:
        f: Horizon.
        n: Sample size.
        errors: Empirical risks of L_1..L_f.
        margins: Margins M_S(i).
        deficits: Deficits d_S(i).
        scores: Scores q(S, i).
        sensitivity: Declared score sensitivity 2 f^2 / n.
        noisy_errors: Perturbed risks (approximate mechanism only).
        noisy_margins: Margins of the perturbed risks.
        sigma: Gaussian noise scale.
        selected: Chosen index.
    """

    f: int
    n: int
    errors: np.ndarray
    margins: np.ndarray
    deficits: np.ndarray
    scores: np.ndarray
    sensitivity: float
    noisy_errors: np.ndarray | None = None
    noisy_margins: np.ndarray | None = None
    sigma: float | None = None
    selected: int | None = None


def margins_from_errors(errors):
    """Margins along the last axis; the first entry is fixed at 1."""
    errors = np.asarray(errors, dtype=np.float64)
    out = np.empty_like(errors)
    out[..., 0] = 1.0
    if errors.shape[-1] > 1:
        running = np.minimum.accumulate(errors, axis=-1)
        out[..., 1:] = running[..., :-1] - errors[..., 1:]
    return out


def scores_from_errors(errors, f):
    """Margins, deficits and scores for an error array whose last axis has length f."""
    margins = margins_from_errors(errors)
    deficits = np.maximum(2.0 / f - margins, 0.0)
    scores = np.arange(1, f + 1, dtype=np.float64) - float(f * f) * deficits
    return margins, deficits, scores


def score_sensitivity(f, n):
    """Per-coordinate sensitivity 2 f^2 / n of the identification score."""
    return 2.0 * f * f / n


def approx_noise_scale(f, n, epsilon, delta):
    """Noise scale for the perturbed risks: Euclidean sensitivity sqrt(f) / n."""
    return gaussian_sigma(math.sqrt(f) / n, epsilon, delta)


def empirical_errors(sample, languages):
    """Empirical risks of each language on the sample."""
    return np.array([outside_count(sample, lang) for lang in languages], dtype=np.int64) / sample.n


def margin_and_score(sample, collection, f_n):
    """Margins, deficits and scores of the first f_n languages.

    Args:
        sample: The dataset.
        collection: Language collection.
        f_n: Horizon.

    Returns:
        IdDiagnostics with ``selected`` unset.
    """
    f_n = int(f_n)
    if f_n < 1:
        raise ValueError("f_n must be >= 1")
    errors = empirical_errors(sample, collection.prefix(f_n))
    margins, deficits, scores = scores_from_errors(errors, f_n)
    return IdDiagnostics(f_n, sample.n, errors, margins, deficits, scores, score_sensitivity(f_n, sample.n))


def select_by_margin(margins, f):
    """Largest 1-based index whose margin exceeds 2/f, or 1 if none does."""
    passing = np.flatnonzero(np.asarray(margins) > 2.0 / f)
    return int(passing[-1]) + 1 if passing.size else 1


def select_from_noisy_errors(noisy_errors, f):
    """The approximate-DP selection rule applied to already-perturbed risks."""
    return select_by_margin(margins_from_errors(noisy_errors), f)


def pure_dp_identify(sample, collection, cfg, rng, return_diagnostics=False):
    """Exponential-mechanism identification over the first f(n) languages.

    Args:
        sample: The dataset.
        collection: Language collection.
        cfg: IdConfig with mechanism ``"pure"``.
        rng: Generator; one uniform is consumed.
        return_diagnostics: Also return the IdDiagnostics.

    Returns:
        The selected 1-based index (and diagnostics if requested).
    """
    diag = margin_and_score(sample, collection, cfg.f_at(sample.n))
    sv = ScoreVector(diag.scores, diag.sensitivity)
    diag.selected = exp_mech_sample(sv, cfg.privacy.epsilon, rng) + 1
    return (diag.selected, diag) if return_diagnostics else diag.selected


def approx_dp_identify(sample, collection, cfg, rng, noise_override=None, return_diagnostics=False):
    """Gaussian-noise identification: largest index whose noisy margin exceeds 2/f.

    Args:
        sample: The dataset.
        collection: Language collection.
        cfg: IdConfig with mechanism ``"approximate"``.
        rng: Generator; f standard normals are consumed unless
            ``noise_override`` is given.
        noise_override: Optional fixed noise vector of length f, added as is.
        return_diagnostics: Also return the IdDiagnostics.
    """
    diag = margin_and_score(sample, collection, cfg.f_at(sample.n))
    f = diag.f
    diag.sigma = approx_noise_scale(f, sample.n, cfg.privacy.epsilon, cfg.privacy.delta)
    if noise_override is not None:
        noise = np.asarray(noise_override, dtype=np.float64).reshape(f)
    else:
        noise = diag.sigma * rng.standard_normal(f)
    diag.noisy_errors = diag.errors + noise
    diag.noisy_margins = margins_from_errors(diag.noisy_errors)
    diag.selected = select_by_margin(diag.noisy_margins, f)
    return (diag.selected, diag) if return_diagnostics else diag.selected


def nonprivate_identify(sample, collection, f_n):
    """Largest i <= f_n with err_S(L_j) - err_S(L_i) > 2/f_n for every j < i."""
    diag = margin_and_score(sample, collection, f_n)
    margins = diag.margins.copy()
    margins[0] = np.inf  # index 1 passes vacuously
    return select_by_margin(margins, diag.f)


def id_error_bound(n, f_n, privacy, mechanism):
    """Closed-form identification error bound, clamped to at most 1.

    pure: ``2f e^{-n/(8f^2)} + f e^{-eps n/(8f^2)}``;
    approximate: ``2f e^{-n/(8f^2)} + 2f e^{-eps^2 n^2/(64 f^3 ln(1.25/delta))}``.
    """
    n = float(n)
    f = float(f_n)
    eps = privacy.epsilon
    stat = 2 * f * math.exp(-n / (8 * f * f))
    if mechanism == "pure":
        priv = f * math.exp(-eps * n / (8 * f * f))
    elif mechanism == "approximate":
        priv = 2 * f * math.exp(-(eps * eps) * n * n / (64 * f**3 * math.log(1.25 / privacy.delta)))
    elif mechanism == "nonprivate":
        priv = 0.0
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    return min(1.0, stat + priv)


@dataclass
class IdEstimate:
    """Monte Carlo summary for identification.

    Attributes:
        trials: Number of trials.
        failures: Trials whose selection differs from i_star.
        estimate: Misidentification frequency failures / trials.
        ci_low: Wilson 95% lower end.
        ci_high: Wilson 95% upper end.
        iderr: Mean realized excess risk.
        theoretical_bound: Closed-form bound at the resolved horizon.
        f: Resolved horizon.
        i_star: Optimal index within the horizon.
        guaranteed: Whether the bound's preconditions hold at this n.
        notes: Reasons for a non-guaranteed bound, truncation flags.
        selection_counts: Histogram of selected indices (position i-1).
        wall_time_ms: Elapsed time.
    """

    trials: int
    failures: int
    estimate: float
    ci_low: float
    ci_high: float
    iderr: float
    theoretical_bound: float
    f: int
    i_star: int
    guaranteed: bool
    notes: tuple
    selection_counts: np.ndarray
    wall_time_ms: float


def _id_block(job):
    """Run a contiguous range of identification trials; returns selections (1-based)."""
    dist, languages, n, f, mechanism, eps, sigma, seed, grid, start, stop = job
    extra = {"pure": 1, "approximate": f, "nonprivate": 0}[mechanism]
    kind = "normal" if mechanism == "approximate" else "uniform"
    u, mech = trial_block_uniforms(seed, grid, start, stop, n, extra, kind)
    codes = dist.codes_from_uniforms(u)
    n_codes = dist.atom_count or int(codes.max()) + 1
    counts = _kernels.count_codes(codes, n_codes)
    atoms = dist.code_to_index(np.arange(n_codes))
    outside = np.stack([~lang.contains_many(atoms) for lang in languages], axis=1).astype(np.int64)
    errors = (counts @ outside) / n
    if mechanism == "pure":
        _, _, scores = scores_from_errors(errors, f)
        return _kernels.em_select(scores, em_scale(eps, score_sensitivity(f, n)), mech[:, 0]) + 1
    if mechanism == "approximate":
        margins = margins_from_errors(errors + sigma * mech)
    else:
        margins = margins_from_errors(errors)
        margins[:, 0] = np.inf
    passing = margins > 2.0 / f
    last = f - np.argmax(passing[:, ::-1], axis=1)
    return np.where(passing.any(axis=1), last, 1).astype(np.int64)


def run_id_trials(instance, cfg, n, trials, master_seed, grid_index=0, workers=1):
    """Selected indices (1-based) of ``trials`` independent runs, in trial order.

    Trial r uses the stream derived from (master_seed, grid_index, r): n
    uniforms for the sample, then one uniform (pure) or f normals
    (approximate). Results do not depend on ``workers``.
    """
    n = int(n)
    f = cfg.f_at(n)
    sigma = None
    if cfg.mechanism == "approximate":
        sigma = approx_noise_scale(f, n, cfg.privacy.epsilon, cfg.privacy.delta)
    languages = instance.collection.prefix(f)

    def job(start, stop):
        return (instance.distribution, languages, n, f, cfg.mechanism, cfg.privacy.epsilon, sigma,
                master_seed, grid_index, start, stop)

    return run_blocks(_id_block, job, trials, n, workers)


def id_preconditions(target, f):
    """Reasons the bound is not guaranteed at horizon f (empty when it is)."""
    reasons = []
    if f < target.i_star:
        reasons.append(f"f={f} < i*={target.i_star}")
    if target.i_star > 1 and f < 3.0 / target.c_gap:
        reasons.append(f"f={f} < 3/c_gap={3.0 / target.c_gap:.6g}")
    if target.truncated:
        reasons.append("population risks truncated")
    return reasons


def estimate_id_err(instance, cfg, n, trials, master_seed, grid_index=0, workers=1):
    """Monte Carlo estimate of the identification error.

    Args:
        instance: Instance supplying the collection and distribution.
        cfg: IdConfig.
        n: Sample size.
        trials: Number of independent trials.
        master_seed: Experiment seed.
        grid_index: Grid position used in stream derivation.
        workers: Worker processes (1 runs in-process).

    Returns:
        IdEstimate.
    """
    t0 = time.perf_counter()
    n = int(n)
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    f = cfg.f_at(n)
    target = instance.id_target(f)
    selected = run_id_trials(instance, cfg, n, trials, master_seed, grid_index, workers)
    counts = np.bincount(selected - 1, minlength=f)
    failures = int(trials - counts[target.i_star - 1])
    excess = target.errs - target.errs[target.i_star - 1]
    # an integer histogram keeps the mean independent of trial ordering
    iderr = math.fsum(float(c) * float(e) for c, e in zip(counts, excess)) / trials
    low, high = wilson_interval(failures, trials)
    reasons = id_preconditions(target, f)
    return IdEstimate(
        trials=trials,
        failures=failures,
        estimate=failures / trials,
        ci_low=low,
        ci_high=high,
        iderr=iderr,
        theoretical_bound=id_error_bound(n, f, cfg.privacy, cfg.mechanism),
        f=f,
        i_star=target.i_star,
        guaranteed=not reasons,
        notes=tuple(reasons),
        selection_counts=counts,
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
    )
