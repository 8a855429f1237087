"""Direct checks of the privacy claims.

The exponential-mechanism audits compute exact output probabilities on
neighboring datasets, so a single violating pair is a definite failure. The
Gaussian mechanism is checked through its calibration formula, recomputed in
high precision.
"""

import math
from dataclasses import asdict, dataclass

import mpmath
import numpy as np

from dplang.distribution import draw_dataset
from dplang.generation import min_count_table, pair_scores, window_scores
from dplang.identification import approx_noise_scale, margin_and_score
from dplang.mechanisms import ScoreVector, exp_mech_log_probs, gaussian_sigma
from dplang.rng import trial_stream

RATIO_TOLERANCE = 1e-9
SENSITIVITY_TOLERANCE = 1e-12
SIGMA_RELATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class AuditReport:
    """Result of one audit.

    Attributes:
        check: Audit name.
        statistic: Worst observed value (log-ratio, score change, relative error).
        bound: The claimed limit.
        tolerance: Slack allowed on top of the bound.
        margin: ``bound - statistic``.
        passed: ``statistic <= bound + tolerance``.
        pairs: Number of neighboring pairs (or evaluations) probed.
        seed: Master seed used.
    """

    check: str
    statistic: float
    bound: float
    tolerance: float
    margin: float
    passed: bool
    pairs: int
    seed: int | None

    def to_dict(self):
        return asdict(self)


def _report(check, statistic, bound, tolerance, pairs, seed):
    statistic = float(statistic)
    bound = float(bound)
    return AuditReport(check, statistic, bound, tolerance, bound - statistic,
                       statistic <= bound + tolerance, int(pairs), seed)


class ScoreBuilder:
    """Maps a dataset to a per-coordinate ScoreVector for one score family.

    Args:
        family: ``"identification"``, ``"q_W"`` or ``"q_pair"``.
        collection: Language collection.
        f: Number of candidate languages.
        g: Coverage threshold (generation families).
        W: Window (``q_W``).
        h: Threshold range (``q_pair``).
    """

    FAMILIES = ("identification", "q_W", "q_pair")

    def __init__(self, family, collection, f, g=None, W=None, h=None):
        if family not in self.FAMILIES:
            raise ValueError(f"family must be one of {self.FAMILIES}")
        self.family = family
        self.collection = collection
        self.f = int(f)
        self.g = g
        self.W = W
        self.h = h
        self._languages = collection.prefix(self.f)

    @property
    def horizon(self):
        return {"identification": 0, "q_W": self.W, "q_pair": self.h}[self.family]

    def sensitivity(self, n):
        if self.family == "identification":
            return 2.0 * self.f * self.f / n
        if self.family == "q_W":
            return 1.0
        return self.h / self.g

    def __call__(self, sample):
        if self.family == "identification":
            diag = margin_and_score(sample, self.collection, self.f)
            return ScoreVector(diag.scores, diag.sensitivity)
        _, table = min_count_table(sample, self._languages, self.horizon)
        if self.family == "q_W":
            _, scores = window_scores(table[:, self.W - 1], self.g)
            return ScoreVector(scores, 1.0)
        _, scores = pair_scores(table, self.g, self.h)
        return ScoreVector(scores.ravel(), self.h / self.g)


def _random_neighbor(sample, dist, rng):
    pos = int(rng.integers(sample.n))
    fresh = int(dist.sample(rng, 1)[0])
    return sample.replace(pos, fresh)


def max_log_ratio(sv, sv_prime, epsilon):
    """max_i |ln p_i - ln p'_i| for the exponential mechanism on two score vectors."""
    lp = exp_mech_log_probs(sv, epsilon)
    lq = exp_mech_log_probs(ScoreVector(sv_prime.scores, sv.sensitivity), epsilon)
    return float(np.max(np.abs(lp - lq)))


def audit_exp_ratio(builder, dist, n, epsilon, pairs, master_seed, steps=1):
    """Worst exact log-probability ratio of the exponential mechanism over random neighbors.

    Args:
        builder: ScoreBuilder for the score family.
        dist: Distribution the base datasets are drawn from.
        n: Sample size.
        epsilon: Privacy parameter.
        pairs: Number of (S, S') probes.
        master_seed: Seed; probe r uses stream (master_seed, 0, r).
        steps: Number of successive single-entry replacements (k > 1 checks
            group privacy against the bound k * epsilon).
    """
    worst = 0.0
    for r in range(int(pairs)):
        rng = trial_stream(master_seed, 0, r)
        s = draw_dataset(dist, n, rng)
        sp = s
        for _ in range(int(steps)):
            sp = _random_neighbor(sp, dist, rng)
        worst = max(worst, max_log_ratio(builder(s), builder(sp), epsilon))
    name = f"exp_ratio[{builder.family}]" if steps == 1 else f"group_ratio[{builder.family},k={steps}]"
    return _report(name, worst, steps * epsilon, RATIO_TOLERANCE, pairs, master_seed)


def replacement_candidates(dist, builder, n_codes=8):
    """Values to try in adversarial replacements: support atoms plus every window index."""
    if dist.atom_count is not None:
        atoms = set(int(k) for k in dist.code_to_index(np.arange(dist.atom_count)))
    else:
        atoms = set(int(k) for k in dist.code_to_index(np.arange(n_codes)))
    window = set(range(1, max(builder.horizon, 4) + 1))
    return sorted(atoms | window)


def audit_sensitivity(builder, dist, n, pairs, master_seed):
    """Largest score change over adversarial single-entry replacements.

    Each probe draws S, picks a position, and replaces it with every
    candidate value from :func:`replacement_candidates`; probes continue until
    at least ``pairs`` replacements have been evaluated. The statistic is the
    maximum coordinate change over all of them.

    Args:
        builder: ScoreBuilder for the score family.
        dist: Distribution the base datasets are drawn from.
        n: Sample size.
        pairs: Minimum number of (S, S') replacements to evaluate.
        master_seed: Seed; probe r uses stream (master_seed, 0, r).
    """
    candidates = replacement_candidates(dist, builder)
    worst = 0.0
    evaluated = 0
    r = 0
    while evaluated < int(pairs):
        rng = trial_stream(master_seed, 0, r)
        r += 1
        s = draw_dataset(dist, n, rng)
        pos = int(rng.integers(n))
        base = builder(s).scores
        for v in candidates:
            if v == s.entries[pos]:
                continue
            delta = np.max(np.abs(builder(s.replace(pos, v)).scores - base))
            worst = max(worst, float(delta))
            evaluated += 1
    return _report(f"sensitivity[{builder.family}]", worst, builder.sensitivity(n),
                   SENSITIVITY_TOLERANCE, evaluated, master_seed)


def reference_sigma(delta2, epsilon, delta, digits=50):
    """(delta2 / epsilon) sqrt(2 ln(1.25 / delta)) evaluated with mpmath."""
    with mpmath.workdps(digits):
        d2, eps, dl = mpmath.mpf(delta2), mpmath.mpf(epsilon), mpmath.mpf(delta)
        return float(d2 / eps * mpmath.sqrt(2 * mpmath.log(mpmath.mpf("1.25") / dl)))


def audit_gaussian(delta2, epsilon, delta, f=None, n=None):
    """Compare the mechanism's sigma with a high-precision evaluation.

    With ``f`` and ``n`` the identification noise scale is also checked
    against Euclidean sensitivity sqrt(f) / n.

    Returns:
        AuditReport whose statistic is the largest relative error.

    Raises:
        InvalidDelta: delta outside (0, 1).
    """
    worst = abs(gaussian_sigma(delta2, epsilon, delta) / reference_sigma(delta2, epsilon, delta) - 1.0)
    checked = 1
    if f is not None and n is not None:
        with mpmath.workdps(50):
            d2 = mpmath.sqrt(mpmath.mpf(int(f))) / int(n)
        want = reference_sigma(d2, epsilon, delta)
        worst = max(worst, abs(approx_noise_scale(f, n, epsilon, delta) / want - 1.0))
        checked += 1
    return _report("gaussian_calibration", worst, 0.0, SIGMA_RELATIVE_TOLERANCE, checked, None)


def noise_moment_check(sigma, draws, rng):
    """Sample standard deviation of ``draws`` noise values divided by sigma."""
    z = sigma * rng.standard_normal(int(draws))
    return float(np.std(z, ddof=1) / sigma)


def audit_suite(instance_for, n_id=20, epsilons=(0.1, 0.5, 1.0, 2.0), pairs=200, master_seed=0):
    """Standard set of audits used by the ``audit`` subcommand.

    Args:
        instance_for: Mapping with ``"ipp"`` and ``"iidp"`` Instance objects.
        n_id: Sample size for the identification audits.
        epsilons: Privacy levels for the ratio audits.
        pairs: Probes per audit.
        master_seed: Seed.
    """
    ipp, iidp = instance_for["ipp"], instance_for["iidp"]
    id_builder = ScoreBuilder("identification", ipp.collection, 3)
    w_builder = ScoreBuilder("q_W", iidp.collection, 2, g=4, W=4)
    p_builder = ScoreBuilder("q_pair", iidp.collection, 2, g=4, h=8)
    reports = []
    for eps in epsilons:
        reports.append(audit_exp_ratio(id_builder, ipp.distribution, n_id, eps, pairs, master_seed))
    reports.append(audit_exp_ratio(w_builder, iidp.distribution, 24, 1.0, pairs, master_seed))
    reports.append(audit_exp_ratio(p_builder, iidp.distribution, 24, 1.0, pairs, master_seed))
    for k in (2, 3):
        reports.append(audit_exp_ratio(id_builder, ipp.distribution, n_id, 1.0, pairs, master_seed, steps=k))
    reports.append(audit_sensitivity(ScoreBuilder("identification", ipp.collection, 3), ipp.distribution, 12,
                                     pairs, master_seed))
    reports.append(audit_sensitivity(w_builder, iidp.distribution, 24, pairs, master_seed))
    reports.append(audit_sensitivity(p_builder, iidp.distribution, 24, pairs, master_seed))
    reports.append(audit_gaussian(math.sqrt(3) / 20, 0.5, 0.05, f=3, n=20))
    return reports
