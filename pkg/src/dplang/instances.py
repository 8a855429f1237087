"""Named (collection, distribution) instances with ground-truth queries.

The estimators never look at ground truth while running an algorithm; they
use it only to score outcomes (exact population risks, support membership)
and to resolve default schedules.
"""

from dataclasses import dataclass, field

import numpy as np

from dplang.distribution import named_distribution
from dplang.errors import InstanceError, ScanLimitInconclusive
from dplang.universe import (
    DEFAULT_SCAN_LIMIT,
    ArithmeticLanguage,
    Collection,
    FiniteLanguage,
    mod3_collection,
    witness_index,
)

# absolute slack when comparing exact population risks
RISK_TIE = 1e-15


@dataclass(frozen=True)
class IdTarget:
    """Ground truth for identification over a collection prefix.

    Attributes:
        i_star: Smallest index attaining the minimum risk over the prefix.
        c_gap: Least risk gap to earlier indices (None when i_star == 1).
        errs: Exact population risks of the prefix languages.
        truncated: True if any risk needed a truncated tail sum.
    """

    i_star: int
    c_gap: float | None
    errs: np.ndarray
    truncated: bool

    def excess(self, i):
        """Excess risk of language i over the optimum."""
        return float(self.errs[i - 1] - self.errs[self.i_star - 1])


@dataclass(frozen=True)
class Instance:
    """A learning problem: an ordered collection and a data distribution.

    Attributes:
        name: Lookup name.
        collection: The language collection.
        distribution: The data distribution.
        witness_bound: Default public witness bound W for public-mode runs.
        notes: Free-form description.
    """

    name: str
    collection: Collection
    distribution: object
    witness_bound: int | None = None
    notes: str = ""
    _memo: dict = field(default_factory=dict, compare=False, repr=False)

    def population_errs(self, m):
        """Exact risks of the first m languages and a truncation flag."""
        key = ("errs", int(m))
        if key not in self._memo:
            values, flags = [], []
            for lang in self.collection.prefix(m):
                v, t = self.distribution.population_err_detail(lang)
                values.append(v)
                flags.append(t)
            self._memo[key] = (np.array(values, dtype=np.float64), any(flags))
        return self._memo[key]

    def id_target(self, m):
        """Identification ground truth over the first m languages."""
        errs, truncated = self.population_errs(m)
        best = errs.min()
        i_star = int(np.argmax(errs <= best + RISK_TIE)) + 1
        c_gap = None
        if i_star > 1:
            c_gap = float((errs[: i_star - 1] - errs[i_star - 1]).min())
        return IdTarget(i_star, c_gap, errs, truncated)

    def good_languages(self, m):
        """Boolean mask of prefix languages contained in the support (None if undecidable)."""
        return [self.distribution.contains_language(lang) for lang in self.collection.prefix(m)]

    def reference_index(self, m):
        """Smallest i <= m with L_i inside supp(D), or None."""
        for i, good in enumerate(self.good_languages(m), start=1):
            if good is True:
                return i
        return None

    def witness(self, m, scan_limit=DEFAULT_SCAN_LIMIT):
        """Witness index of the first m languages, or None if inconclusive."""
        try:
            return witness_index(self.collection.prefix(m), self.distribution, scan_limit)
        except ScanLimitInconclusive:
            return None


def _language_from_config(spec):
    kind = spec.get("kind", "ap")
    label = spec.get("label")
    if kind in ("ap", "arithmetic", "arithmetic-progression"):
        return ArithmeticLanguage(
            spec.get("offset", 0), spec["step"], extras=spec.get("extras", ()), start=spec.get("start", 1), label=label
        )
    if kind in ("finite", "finite-set"):
        return FiniteLanguage(spec["indices"], label=label)
    raise InstanceError(f"unknown language kind {kind!r}")


def collection_from_config(spec):
    """Build a collection from a config value.

    Args:
        spec: ``"mod3"`` (padded built-in), ``"mod3-pair"`` or a list of
            language dicts such as ``{"kind": "ap", "offset": 0, "step": 3,
            "extras": [1]}`` or ``{"kind": "finite", "indices": [1, 2]}``.
    """
    if spec is None or spec == "mod3":
        return mod3_collection(padded=True)
    if spec == "mod3-pair":
        return mod3_collection(padded=False)
    if isinstance(spec, (list, tuple)):
        try:
            return Collection([_language_from_config(dict(s)) for s in spec], name="custom")
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"bad collection entry: {exc}") from None
    raise InstanceError(f"unknown collection {spec!r}")


_ALIASES = {"ipp": "ipp-d", "iidp": "iidp-d"}


def named_instance(name, collection=None, witness_bound=None):
    """Resolve an instance name.

    Args:
        name: ``ipp``/``ipp-d``, ``ipp-dprime``, ``iidp``/``iidp-d``,
            ``iidp-dprime``, ``point:<k>`` or ``atoms:<list>``.
        collection: Optional collection config (see :func:`collection_from_config`).
        witness_bound: Optional override of the default public witness bound.
    """
    key = _ALIASES.get(name.strip().lower(), name.strip())
    dist = named_distribution(key)
    coll = collection_from_config(collection)
    w = witness_bound
    if w is None and key.lower().startswith("iidp"):
        # covers both sides of the hard pair: witness indices 4 and 3
        w = 4
    return Instance(key, coll, dist, witness_bound=w)
