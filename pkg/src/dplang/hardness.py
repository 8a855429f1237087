"""Hard instance pairs, the maximal coupling and empirical lower-bound checks.

Both built-in pairs share the anchor u_1 with mass 3/4 under D and D'. In the
finite pair the remaining 1/4 sits on s1 = u_3 (D) or s2 = u_4 (D'); in the
infinite pair it is spread as 2^-k / 4 over a_k = u_{3k} (D) or
b_k = u_{3k+1} (D'). D and D' assign atom codes in the same way, so feeding
the same uniforms to both yields the coordinate-wise maximal coupling.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from dplang.distribution import Dataset, named_distribution
from dplang.generation import GenConfig, run_gen_trials
from dplang.identification import IdConfig, run_id_trials
from dplang.instances import Instance
from dplang.montecarlo import block_ranges, trial_block_uniforms
from dplang.stats import wilson_lower, wilson_upper
from dplang.universe import mod3_collection

VARIANTS = ("IPP", "IIDP")
# prefix length over which "private element" conditions are verified
CHECK_PREFIX = 64
CHECK_FAMILY = 256


@dataclass(frozen=True)
class HardInstance:
    """A pair of distributions that a DP algorithm cannot tell apart well.

    Attributes:
        variant: ``"IPP"`` (finite private elements) or ``"IIDP"`` (infinite).
        collection: Collection whose first two languages are L and L'.
        s0: Shared anchor index.
        s1: Private element of L (IPP only).
        s2: Private element of L' (IPP only).
        family_a: ``(scale, shift)`` with a_k = scale * k + shift (IIDP only).
        family_b: Same for b_k (IIDP only).
        D: Distribution favoring L.
        Dprime: Distribution favoring L'.
    """

    variant: str
    collection: object
    s0: int
    D: object
    Dprime: object
    s1: int | None = None
    s2: int | None = None
    family_a: tuple | None = None
    family_b: tuple | None = None

    @property
    def L(self):
        return self.collection.language(1)

    @property
    def Lprime(self):
        return self.collection.language(2)

    def a(self, k):
        scale, shift = self.family_a
        return scale * int(k) + shift

    def b(self, k):
        scale, shift = self.family_b
        return scale * int(k) + shift

    def in_F(self, x):
        """True iff x is one of the elements favoring L (s1, or some a_k)."""
        if self.variant == "IPP":
            return int(x) == self.s1
        scale, shift = self.family_a
        d = int(x) - shift
        return d % scale == 0 and d >= scale

    def instance(self, prime=False):
        """The Instance (collection, D) or (collection, D')."""
        dist = self.Dprime if prime else self.D
        w = 4 if self.variant == "IIDP" else None
        return Instance(dist.name, self.collection, dist, witness_bound=w)


def _verify(inst):
    L, Lp = inst.L, inst.Lprime
    if not (L.contains(inst.s0) and Lp.contains(inst.s0)):
        raise AssertionError("s0 must lie in both languages")
    others = inst.collection.prefix(CHECK_PREFIX)
    if inst.variant == "IPP":
        if not L.contains(inst.s1) or any(lang.contains(inst.s1) for lang in others[1:]):
            raise AssertionError("s1 must belong to L only")
        if not Lp.contains(inst.s2) or any(lang.contains(inst.s2) for i, lang in enumerate(others) if i != 1):
            raise AssertionError("s2 must belong to L' only")
        if inst.D.mass(inst.s0) != 0.75 or inst.D.mass(inst.s1) != 0.25 or inst.Dprime.mass(inst.s2) != 0.25:
            raise AssertionError("hard distributions have the wrong masses")
    else:
        for k in range(1, CHECK_FAMILY + 1):
            a, b = inst.a(k), inst.b(k)
            if not (L.contains(a) and not Lp.contains(a) and Lp.contains(b) and not L.contains(b)):
                raise AssertionError(f"family condition fails at k={k}")
            if inst.D.mass(a) != math.ldexp(0.25, -k) or inst.Dprime.mass(b) != math.ldexp(0.25, -k):
                raise AssertionError(f"family masses wrong at k={k}")
    probe = np.linspace(0.0, 1.0, 4097)[:-1]
    if not np.array_equal(inst.D.codes_from_uniforms(probe), inst.Dprime.codes_from_uniforms(probe)):
        raise AssertionError("D and D' must share atom codes for the coupling")


def make_hard_instance(variant, padded=True):
    """Build and verify a built-in hard pair.

    Args:
        variant: ``"IPP"`` or ``"IIDP"`` (case-insensitive).
        padded: Use the padded infinite collection (needed for horizons above 2).
    """
    v = variant.upper()
    coll = mod3_collection(padded=padded)
    if v == "IPP":
        inst = HardInstance("IPP", coll, 1, named_distribution("ipp-d"), named_distribution("ipp-dprime"), s1=3, s2=4)
    elif v == "IIDP":
        inst = HardInstance(
            "IIDP", coll, 1, named_distribution("iidp-d"), named_distribution("iidp-dprime"),
            family_a=(3, 0), family_b=(3, 1),
        )
    else:
        raise ValueError(f"variant must be one of {VARIANTS}")
    _verify(inst)
    return inst


@dataclass(frozen=True)
class CoupledSample:
    """Samples from D^n and D'^n drawn through the maximal coupling.

    Attributes:
        S: Marginally D^n.
        Sprime: Marginally D'^n.
        hamming: Number of coordinates where they differ.
    """

    S: Dataset
    Sprime: Dataset
    hamming: int


def coupled_draw(inst, n, rng):
    """Draw (S, S') coordinate by coordinate from the maximal coupling.

    Consumes n uniforms; S equals ``draw_dataset(inst.D, n, rng)`` for the
    same stream state.
    """
    codes = inst.D.codes_from_uniforms(rng.random(int(n)))
    s = inst.D.code_to_index(codes)
    sp = inst.Dprime.code_to_index(codes)
    return CoupledSample(Dataset(s), Dataset(sp), int(np.count_nonzero(s != sp)))


def coupled_hamming_trials(inst, n, trials, master_seed, grid_index=0):
    """Hamming distances of ``trials`` independent coupled draws (one stream each)."""
    out = []
    for a, b in block_ranges(trials, n):
        u, _ = trial_block_uniforms(master_seed, grid_index, a, b, n)
        codes = inst.D.codes_from_uniforms(u)
        diff = inst.D.code_to_index(codes) != inst.Dprime.code_to_index(codes)
        out.append(diff.sum(axis=1))
    return np.concatenate(out)


def binomial_tail(n, p, k):
    """Exact P[Bin(n, p) > k] by rational summation."""
    p = Fraction(p)
    total = sum(math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(int(k) + 1, n + 1))
    return float(total)


def _inv_one_plus_exp(x):
    # 1 / (1 + e^x) without overflow
    return math.exp(-float(np.logaddexp(0.0, x)))


@dataclass(frozen=True)
class LowerBoundValue:
    """Lower-bound value; ``simplified`` is set for identification only."""

    value: float
    simplified: float | None = None


def lb_value(task, n, epsilon):
    """Lower bound on the worse of the two error probabilities.

    identify: ``(1 - e^{-n/12}) / (1 + e^{eps n/2})``, also giving the
    simplified ``e^{-eps n/2} / 30``; generate:
    ``(1 - 4^{-n} - e^{-n/12}) / (1 + e^{eps n/2})``.
    """
    n = int(n)
    if n < 2:
        raise ValueError("n must be >= 2")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    x = epsilon * n / 2
    if task == "identify":
        return LowerBoundValue((1 - math.exp(-n / 12)) * _inv_one_plus_exp(x), math.exp(-x) / 30)
    if task == "generate":
        return LowerBoundValue((1 - 4.0**-n - math.exp(-n / 12)) * _inv_one_plus_exp(x))
    raise ValueError("task must be 'identify' or 'generate'")


@dataclass
class LowerBoundCheck:
    """Outcome of an empirical lower-bound check.

    Attributes:
        task: ``"identify"`` or ``"generate"``.
        applicable: False when the algorithm is not pure epsilon-DP.
        trials: Trials per distribution.
        estimates: Point estimates by name.
        bounds: One-sided 95% Wilson bounds used in the checks, by name.
        lower_bound: lb_value at (n, epsilon).
        checks: Named pass/fail results.
        passed: All checks passed (True when not applicable).
        note: Explanation for skipped checks.
    """

    task: str
    applicable: bool
    trials: int
    estimates: dict
    bounds: dict
    lower_bound: LowerBoundValue | None
    checks: dict
    passed: bool
    note: str = ""


def _not_applicable(task, trials, note):
    return LowerBoundCheck(task, False, int(trials), {}, {}, None, {}, True, note)


def empirical_lb_check(task, cfg, n, epsilon, trials, master_seed, inst=None, workers=1, grid_index=0):
    """Estimate both error probabilities on a hard pair and test the lower-bound chain.

    Args:
        task: ``"identify"`` (IPP pair) or ``"generate"`` (IIDP pair).
        cfg: IdConfig or GenConfig of the algorithm under test.
        n: Sample size.
        epsilon: Privacy level the bound is evaluated at.
        trials: Trials per distribution.
        master_seed: Experiment seed.
        inst: Hard instance (defaults to the built-in pair for the task).
        workers: Worker processes.
        grid_index: Grid position g; D uses stream grid 2g and D' uses 2g + 1.
    """
    grid_d, grid_dp = 2 * int(grid_index), 2 * int(grid_index) + 1
    if task == "identify":
        if not isinstance(cfg, IdConfig) or cfg.mechanism != "pure":
            return _not_applicable(task, trials, "the bound holds only for pure epsilon-DP algorithms")
        inst = inst or make_hard_instance("IPP")
        sel_d = run_id_trials(inst.instance(False), cfg, n, trials, master_seed, grid_d, workers)
        sel_dp = run_id_trials(inst.instance(True), cfg, n, trials, master_seed, grid_dp, workers)
        miss_d = int(np.count_nonzero(sel_d != 1))
        miss_dp = int(np.count_nonzero(sel_dp != 2))
        lb = lb_value("identify", n, epsilon)
        up_d, up_dp = wilson_upper(miss_d, trials), wilson_upper(miss_dp, trials)
        worst = max(up_d, up_dp)
        estimates = {"p": 1 - miss_d / trials, "q": 1 - miss_dp / trials,
                     "max_miss": max(miss_d, miss_dp) / trials}
        bounds = {"miss_D_upper": up_d, "miss_Dprime_upper": up_dp}
        checks = {"max_miss_vs_simplified": worst >= lb.simplified, "max_miss_vs_exact": worst >= lb.value}
        return LowerBoundCheck(task, True, int(trials), estimates, bounds, lb, checks, all(checks.values()))
    if task == "generate":
        if not isinstance(cfg, GenConfig) or cfg.mode not in ("public", "joint"):
            return _not_applicable(task, trials, "the bound holds only for pure epsilon-DP algorithms")
        inst = inst or make_hard_instance("IIDP")
        out_d = run_gen_trials(inst.instance(False), cfg, n, trials, master_seed, grid_d, workers)
        out_dp = run_gen_trials(inst.instance(True), cfg, n, trials, master_seed, grid_dp, workers)
        fail_d, fail_dp = int(out_d.failures.sum()), int(out_dp.failures.sum())
        inf_d = sum(inst.in_F(x) for x in out_d.outputs)
        inf_dp = sum(inst.in_F(x) for x in out_dp.outputs)
        lb = lb_value("generate", n, epsilon)
        t = trials
        bounds = {
            "alpha_D_lower": wilson_lower(fail_d, t), "alpha_D_upper": wilson_upper(fail_d, t),
            "alpha_Dprime_lower": wilson_lower(fail_dp, t), "alpha_Dprime_upper": wilson_upper(fail_dp, t),
            "inF_D_upper": wilson_upper(inf_d, t), "inF_Dprime_lower": wilson_lower(inf_dp, t),
        }
        estimates = {"alpha_D": fail_d / t, "alpha_Dprime": fail_dp / t, "inF_D": inf_d / t, "inF_Dprime": inf_dp / t}
        checks = {
            "success_requires_F": bounds["inF_D_upper"] >= 1 - bounds["alpha_D_upper"] - 4.0**-n,
            "F_fails_under_Dprime": bounds["inF_Dprime_lower"] <= bounds["alpha_Dprime_upper"],
            "max_error_vs_bound": max(bounds["alpha_D_upper"], bounds["alpha_Dprime_upper"]) >= lb.value,
        }
        return LowerBoundCheck(task, True, int(trials), estimates, bounds, lb, checks, all(checks.values()))
    raise ValueError("task must be 'identify' or 'generate'")
