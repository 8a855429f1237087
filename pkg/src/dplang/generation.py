"""Private and non-private language generation.

Scores come from minimum prefix counts. For language i and threshold t,
``a_i(t)`` is the smallest multiplicity in the sample among members of L_i
with index at most t (n when there are none). With a public window W the
score is ``-(g - a_i(W))_+``; without one, each pair (i, t) in [f] x [h]
scores ``t - (h/g) (g - a_i(t))_+``. The emitted string is the j-th member of
the selected language past the selected threshold, with j drawn uniformly
below a cap after the private selection.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from dplang import _kernels
from dplang.errors import NotContained
from dplang.mechanisms import PrivacyParams, ScoreVector, em_scale, exp_mech_sample, gaussian_sigma
from dplang.montecarlo import run_blocks, trial_block_draws
from dplang.schedules import parse_schedule
from dplang.stats import wilson_interval

MODES = ("public", "joint", "approximate-joint", "nonprivate")
J_CAP_LOG2 = 62


def j_cap(n):
    """Upper end of the public index range, min(2^n, 2^62)."""
    return 1 << min(int(n), J_CAP_LOG2)


def draw_public_index(rng, n):
    """Uniform draw from {1, ..., j_cap(n)}."""
    return int(rng.integers(1, j_cap(n), endpoint=True))


@dataclass(frozen=True)
class GenConfig:
    """Generation algorithm settings.

    Attributes:
        f_schedule: Number of candidate languages.
        g_schedule: Coverage threshold (unused in non-private mode).
        privacy: Privacy parameters.
        mode: ``"public"``, ``"joint"``, ``"approximate-joint"`` or ``"nonprivate"``.
        witness_bound: Public window W (public mode).
        h_schedule: Threshold range h (joint modes).
    """

    f_schedule: object
    g_schedule: object
    privacy: PrivacyParams
    mode: str = "public"
    witness_bound: int | None = None
    h_schedule: object = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        object.__setattr__(self, "f_schedule", parse_schedule(self.f_schedule, "f"))
        if self.g_schedule is not None:
            object.__setattr__(self, "g_schedule", parse_schedule(self.g_schedule, "g"))
        elif self.mode != "nonprivate":
            raise ValueError("g_schedule is required")
        if self.h_schedule is not None:
            object.__setattr__(self, "h_schedule", parse_schedule(self.h_schedule, "h"))
        if self.mode == "public" and (self.witness_bound is None or int(self.witness_bound) < 1):
            raise ValueError("public mode needs witness_bound >= 1")
        if self.mode in ("joint", "approximate-joint") and self.h_schedule is None:
            raise ValueError(f"{self.mode} mode needs h_schedule")
        if self.mode == "approximate-joint" and not 0 < self.privacy.delta < 1:
            raise ValueError("approximate-joint mode needs delta in (0, 1)")

    def resolve(self, n):
        """Resolved integers ``{"f", "g", "h", "W"}`` at sample size n (absent ones None)."""
        return {
            "f": self.f_schedule(n),
            "g": self.g_schedule(n) if self.g_schedule is not None else None,
            "h": self.h_schedule(n) if self.h_schedule is not None else None,
            "W": int(self.witness_bound) if self.mode == "public" else None,
        }


@dataclass
class GenDiagnostics:
    """Intermediate quantities of one generation run.

    Attributes:
        mode: Generation mode.
        f: Number of candidate languages.
        g: Coverage threshold.
        horizon: W (public) or h (joint modes).
        counts: N_S(u_k) for k = 1..horizon.
        min_counts: a_i(t), shape (f, horizon).
        deficits: Deficits aligned with ``scores``.
        scores: q_W (shape (f,)) or q_pair (shape (f, h)).
        sensitivity: Declared sensitivity of the scores.
        sigma: Gaussian noise scale (approximate-joint only).
        noisy_scores: Perturbed pair scores (approximate-joint only).
        selected_language: 1-based î.
        threshold: W or the selected t̂.
        j_hat: Public index.
        output: Emitted universe index.
    """

    mode: str
    f: int
    g: int
    horizon: int
    counts: np.ndarray
    min_counts: np.ndarray
    deficits: np.ndarray
    scores: np.ndarray
    sensitivity: float
    sigma: float | None = None
    noisy_scores: np.ndarray | None = None
    selected_language: int | None = None
    threshold: int | None = None
    j_hat: int | None = None
    output: int | None = None


def membership_matrix(languages, horizon):
    """Boolean (len(languages), horizon) table of u_k in L_i for k = 1..horizon."""
    ks = np.arange(1, horizon + 1, dtype=np.int64)
    return np.stack([lang.contains_many(ks) for lang in languages])


def min_prefix_count(sample, lang, t):
    """min of N_S(u_k) over members k <= t of ``lang``; n if there are none."""
    members = lang.members_upto(t)
    if members.size == 0:
        return sample.n
    return int(sample.multiplicities(members).min())


def min_count_table(sample, languages, horizon):
    """a_i(t) for every language and t = 1..horizon, shape (f, horizon)."""
    counts = sample.multiplicities(np.arange(1, horizon + 1))
    member = membership_matrix(languages, horizon)
    return counts, _kernels.prefix_min_counts(counts[None, :], member, sample.n)[0]


def window_scores(min_counts_at_w, g):
    """q_W = -(g - a)_+ and the deficits."""
    deficits = np.maximum(float(g) - min_counts_at_w, 0.0)
    return deficits, -deficits


def pair_scores(min_counts, g, h):
    """q_pair(t) = t - (h/g) (g - a)_+ along the last axis (length h)."""
    deficits = np.maximum(float(g) - min_counts, 0.0)
    t = np.arange(1, h + 1, dtype=np.float64)
    return deficits, t - (h / g) * deficits


def pair_sigma(f, g, h, epsilon, delta):
    """Gaussian scale for the pair scores: Euclidean sensitivity (h/g) sqrt(f h)."""
    return gaussian_sigma((h / g) * math.sqrt(f * h), epsilon, delta)


def _resolve_geometry(cfg, n):
    r = cfg.resolve(n)
    if cfg.mode == "public":
        return r, r["W"]
    return r, r["h"]


def gen_scores(sample, collection, cfg, n=None):
    """Scores of the configured mode for one sample.

    Args:
        sample: The dataset.
        collection: Language collection.
        cfg: GenConfig in public, joint or approximate-joint mode.
        n: Sample size used for schedule resolution (defaults to len(sample)).

    Returns:
        GenDiagnostics with selection fields unset.
    """
    n = sample.n if n is None else int(n)
    r, horizon = _resolve_geometry(cfg, n)
    f, g = r["f"], r["g"]
    counts, table = min_count_table(sample, collection.prefix(f), horizon)
    if cfg.mode == "public":
        deficits, scores = window_scores(table[:, horizon - 1], g)
        sensitivity = 1.0
    else:
        deficits, scores = pair_scores(table, g, horizon)
        sensitivity = horizon / g
    return GenDiagnostics(cfg.mode, f, g, horizon, counts, table, deficits, scores, sensitivity)


def _emit(diag, collection, rng, n):
    diag.j_hat = draw_public_index(rng, n)
    lang = collection.language(diag.selected_language)
    diag.output = lang.kth_member_above(diag.threshold, diag.j_hat)
    return diag.output


def dp_generate(sample, collection, cfg, rng, return_diagnostics=False):
    """Exponential-mechanism generation (public window or joint pair search).

    Args:
        sample: The dataset.
        collection: Language collection.
        cfg: GenConfig in ``"public"`` or ``"joint"`` mode.
        rng: Generator; one uniform for the selection, then one integer for j.
        return_diagnostics: Also return the GenDiagnostics.

    Returns:
        Emitted universe index (and diagnostics if requested).
    """
    if cfg.mode not in ("public", "joint"):
        raise ValueError("dp_generate handles public and joint modes")
    diag = gen_scores(sample, collection, cfg)
    sv = ScoreVector(diag.scores.ravel(), diag.sensitivity)
    pick = exp_mech_sample(sv, cfg.privacy.epsilon, rng)
    if cfg.mode == "public":
        diag.selected_language, diag.threshold = pick + 1, diag.horizon
    else:
        diag.selected_language, diag.threshold = pick // diag.horizon + 1, pick % diag.horizon + 1
    out = _emit(diag, collection, rng, sample.n)
    return (out, diag) if return_diagnostics else out


def approx_dp_generate(sample, collection, cfg, rng, noise_override=None, return_diagnostics=False):
    """Gaussian-noise pair selection followed by the same emission step.

    Args:
        sample: The dataset.
        collection: Language collection.
        cfg: GenConfig in ``"approximate-joint"`` mode.
        rng: Generator; f*h normals (unless overridden), then one integer for j.
        noise_override: Optional fixed noise of shape (f, h) or (f*h,).
        return_diagnostics: Also return the GenDiagnostics.
    """
    if cfg.mode != "approximate-joint":
        raise ValueError("approx_dp_generate handles approximate-joint mode")
    diag = gen_scores(sample, collection, cfg)
    f, h = diag.f, diag.horizon
    diag.sigma = pair_sigma(f, diag.g, h, cfg.privacy.epsilon, cfg.privacy.delta)
    if noise_override is not None:
        noise = np.asarray(noise_override, dtype=np.float64).reshape(f, h)
    else:
        noise = (diag.sigma * rng.standard_normal(f * h)).reshape(f, h)
    diag.noisy_scores = diag.scores + noise
    # argmax returns the first maximum: the lexicographically smallest pair
    pick = int(np.argmax(diag.noisy_scores.ravel()))
    diag.selected_language, diag.threshold = pick // h + 1, pick % h + 1
    out = _emit(diag, collection, rng, sample.n)
    return (out, diag) if return_diagnostics else out


def _pointer(lang, seen):
    k = lang.kth_member_above(0, 1)
    while seen(k):
        k = lang.kth_member_above(k, 1)
    return k


def nonprivate_generate(sample, collection, f_n):
    """Pointer rule: the largest smallest-unseen member across the first f_n languages.

    Ties go to the smallest language index. The returned member is unseen, so
    it is always novel.
    """
    pointers = [_pointer(lang, sample.__contains__) for lang in collection.prefix(int(f_n))]
    return pointers[int(np.argmax(pointers))]


@dataclass(frozen=True)
class CoverageStats:
    """Members of the reference language in a window and their smallest mass.

    Attributes:
        indices: Member indices within the horizon.
        p_star: Smallest mass among them (1.0 when there are none).
        vacuous: True when the window holds no member.
    """

    indices: tuple
    p_star: float
    vacuous: bool

    @property
    def size(self):
        return len(self.indices)


def coverage_stats(dist, lang_star, horizon):
    """Window members of ``lang_star`` up to ``horizon`` and their minimum mass.

    Raises:
        NotContained: A member within the horizon lies outside supp(dist).
    """
    members = lang_star.members_upto(int(horizon))
    if members.size == 0:
        return CoverageStats((), 1.0, True)
    inside = dist.in_support_many(members)
    if not inside.all():
        bad = int(members[np.argmin(inside)])
        raise NotContained(f"u{bad} is in the reference language but outside the support")
    masses = [dist.mass(int(k)) for k in members]
    return CoverageStats(tuple(int(k) for k in members), float(min(masses)), False)


def gen_error_bound(n, f, g, coverage_size, p_star, privacy, mode, h=None):
    """Closed-form generation error bound, clamped to at most 1.

    Args:
        n: Sample size.
        f: Number of candidate languages.
        g: Coverage threshold (>= 1).
        coverage_size: |I*| for the relevant window.
        p_star: Smallest window mass.
        privacy: Privacy parameters.
        mode: ``"public"``, ``"joint"`` or ``"approximate-joint"``.
        h: Threshold range (joint modes).
    """
    if g is None or g < 1:
        raise ValueError("g must be >= 1")
    eps = privacy.epsilon
    coverage = coverage_size * math.exp(-n * p_star / 8)
    collision = math.exp(-n / 2)
    if mode == "public":
        priv = f * math.exp(-eps * g / 4)
    elif mode == "joint":
        priv = f * h * math.exp(-eps * g / 8)
    elif mode == "approximate-joint":
        priv = 2 * f * h * math.exp(-(eps * eps) * g * g / (256 * f * h * math.log(1.25 / privacy.delta)))
    elif mode == "nonprivate":
        priv = 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return min(1.0, coverage + priv + collision)


@dataclass
class GenTrials:
    """Per-trial generation outcomes in trial order.

    Attributes:
        outputs: Emitted indices (Python ints; they may exceed int64).
        invalid: Output outside supp(D).
        in_sample: Output appears in the sample.
        languages: Selected language per trial (0 for non-private runs).
    """

    outputs: list
    invalid: np.ndarray
    in_sample: np.ndarray
    languages: np.ndarray

    @property
    def failures(self):
        return self.invalid | self.in_sample


def _gen_block(job):
    dist, languages, n, mode, res, eps, sigma, seed, grid, start, stop = job
    f, g, h_or_w = res["f"], res["g"], res["W"] if mode == "public" else res["h"]
    if mode == "public" or mode == "joint":
        extra, kind = 1, "uniform"
    elif mode == "approximate-joint":
        extra, kind = f * h_or_w, "normal"
    else:
        extra, kind = 0, "uniform"
    cap = j_cap(n) if mode != "nonprivate" else None
    u, mech, jhat = trial_block_draws(seed, grid, start, stop, n, extra, kind, cap)
    codes = dist.codes_from_uniforms(u)
    n_codes = dist.atom_count or int(codes.max()) + 1
    counts = _kernels.count_codes(codes, n_codes)
    t_count = stop - start

    def seen(r, k):
        code = dist.index_to_code(k)
        return 0 <= code < n_codes and counts[r, code] > 0

    outputs = []
    sel_lang = np.zeros(t_count, dtype=np.int64)
    if mode == "nonprivate":
        for r in range(t_count):
            pointers = [_pointer(lang, lambda k, r=r: seen(r, k)) for lang in languages]
            outputs.append(pointers[int(np.argmax(pointers))])
    else:
        window = np.zeros((t_count, h_or_w), dtype=np.int64)
        for k in range(1, h_or_w + 1):
            code = dist.index_to_code(k)
            if 0 <= code < n_codes:
                window[:, k - 1] = counts[:, code]
        member = membership_matrix(languages, h_or_w)
        table = _kernels.prefix_min_counts(window, member, n)
        if mode == "public":
            _, scores = window_scores(table[:, :, h_or_w - 1], g)
            pick = _kernels.em_select(scores, em_scale(eps, 1.0), mech[:, 0])
            sel_lang = pick + 1
            thresholds = np.full(t_count, h_or_w, dtype=np.int64)
        else:
            _, scores = pair_scores(table, g, h_or_w)
            flat = scores.reshape(t_count, f * h_or_w)
            if mode == "joint":
                pick = _kernels.em_select(flat, em_scale(eps, h_or_w / g), mech[:, 0])
            else:
                pick = np.argmax(flat + sigma * mech, axis=1)
            sel_lang = pick // h_or_w + 1
            thresholds = pick % h_or_w + 1
        for r in range(t_count):
            lang = languages[sel_lang[r] - 1]
            outputs.append(lang.kth_member_above(int(thresholds[r]), int(jhat[r])))
    invalid = np.array([not dist.in_support(x) for x in outputs], dtype=bool)
    in_sample = np.array([seen(r, x) for r, x in enumerate(outputs)], dtype=bool)
    return outputs, invalid, in_sample, sel_lang


def run_gen_trials(instance, cfg, n, trials, master_seed, grid_index=0, workers=1):
    """Run ``trials`` generation trials and return their outcomes in order.

    Trial r consumes its stream as n uniforms, then one uniform (public,
    joint) or f*h normals (approximate-joint), then the public index j.
    """
    n = int(n)
    res = cfg.resolve(n)
    sigma = None
    if cfg.mode == "approximate-joint":
        sigma = pair_sigma(res["f"], res["g"], res["h"], cfg.privacy.epsilon, cfg.privacy.delta)
    languages = instance.collection.prefix(res["f"])

    def job(start, stop):
        return (instance.distribution, languages, n, cfg.mode, res, cfg.privacy.epsilon, sigma,
                master_seed, grid_index, start, stop)

    parts = run_blocks(_gen_block, job, trials, n, workers)
    outputs = [x for p in parts for x in p[0]]
    return GenTrials(
        outputs,
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        np.concatenate([p[3] for p in parts]),
    )


@dataclass
class GenEstimate:
    """Monte Carlo summary for generation.

    Attributes:
        trials: Number of trials.
        failures: Trials whose output was invalid or already in the sample.
        estimate: failures / trials.
        ci_low: Wilson 95% lower end.
        ci_high: Wilson 95% upper end.
        theoretical_bound: Closed-form bound (None in non-private mode).
        resolved: Resolved f, g, h, W.
        coverage: CoverageStats of the reference language on the window.
        guaranteed: Whether the bound's preconditions hold.
        notes: Reasons for a non-guaranteed bound.
        invalid: Count of outputs outside the support.
        in_sample: Count of outputs already in the sample.
        wall_time_ms: Elapsed time.
    """

    trials: int
    failures: int
    estimate: float
    ci_low: float
    ci_high: float
    theoretical_bound: float | None
    resolved: dict
    coverage: CoverageStats | None
    guaranteed: bool
    notes: tuple
    invalid: int
    in_sample: int
    wall_time_ms: float


def gen_preconditions(instance, cfg, n):
    """Coverage stats of the reference language and reasons the bound may not hold."""
    res = cfg.resolve(n)
    f = res["f"]
    reasons = []
    i_star = instance.reference_index(f)
    if i_star is None:
        return None, ("no language within the horizon is contained in the support",)
    horizon = res["W"] if cfg.mode == "public" else res["h"]
    coverage = None
    if horizon is not None:
        coverage = coverage_stats(instance.distribution, instance.collection.language(i_star), horizon)
    witness = instance.witness(f)
    if witness is None:
        reasons.append("witness index not determined within the scan limit")
    if cfg.mode == "public" and witness is not None and res["W"] < witness:
        reasons.append(f"W={res['W']} < i(C,D)={witness}")
    if cfg.mode in ("joint", "approximate-joint") and witness is not None and res["h"] < 2 * witness:
        reasons.append(f"h={res['h']} < 2 i(C,D)={2 * witness}")
    if coverage is not None and res["g"] is not None and res["g"] > n * coverage.p_star / 2:
        reasons.append(f"g={res['g']} > n p*/2={n * coverage.p_star / 2:.6g}")
    return coverage, tuple(reasons)


def estimate_gen_err(instance, cfg, n, trials, master_seed, grid_index=0, workers=1):
    """Monte Carlo estimate of the generation error.

    Args:
        instance: Instance supplying the collection and distribution.
        cfg: GenConfig.
        n: Sample size.
        trials: Number of trials.
        master_seed: Experiment seed.
        grid_index: Grid position used in stream derivation.
        workers: Worker processes.

    Returns:
        GenEstimate.
    """
    t0 = time.perf_counter()
    n = int(n)
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    res = cfg.resolve(n)
    coverage, reasons = gen_preconditions(instance, cfg, n)
    outcome = run_gen_trials(instance, cfg, n, trials, master_seed, grid_index, workers)
    failures = int(outcome.failures.sum())
    low, high = wilson_interval(failures, trials)
    bound = None
    if cfg.mode != "nonprivate" and coverage is not None:
        bound = gen_error_bound(n, res["f"], res["g"], coverage.size, coverage.p_star, cfg.privacy, cfg.mode, res["h"])
    return GenEstimate(
        trials=trials,
        failures=failures,
        estimate=failures / trials,
        ci_low=low,
        ci_high=high,
        theoretical_bound=bound,
        resolved=res,
        coverage=coverage,
        guaranteed=bound is not None and not reasons,
        notes=reasons,
        invalid=int(outcome.invalid.sum()),
        in_sample=int(outcome.in_sample.sum()),
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
    )
