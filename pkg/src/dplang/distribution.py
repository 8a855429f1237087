"""Distributions over universe indices, datasets, and risk functionals.

Two kinds of distribution are supported. :class:`FiniteDistribution` lists
its atoms. :class:`GeometricDistribution` puts mass 3/4 on an anchor index
and mass 2^-k / 4 on the k-th family member ``scale * k + shift``.

Sampling always consumes exactly one uniform per draw, so a dataset of size
n uses ``rng.random(n)`` and nothing else.
"""

import math
from functools import cached_property

import numpy as np

from dplang import _kernels
from dplang.errors import InstanceError
from dplang.universe import ArithmeticLanguage, FiniteLanguage, check_index

MASS_TOLERANCE = 1e-12
TAIL_TOLERANCE = 1e-12
# family members beyond this code carry mass below TAIL_TOLERANCE
_TAIL_CODES = int(math.ceil(-math.log2(4 * TAIL_TOLERANCE)))


class Distribution:
    """Interface shared by all distributions.

    Atoms are addressed by an integer code: positions 0..A-1 for finite
    distributions, 0 for the anchor and k >= 1 for family members of
    geometric ones.
    """

    atom_count = None

    def in_support(self, k):
        return bool(self.in_support_many(np.array([check_index(k)]))[0])

    def in_support_many(self, ks):
        raise NotImplementedError

    def mass(self, k):
        raise NotImplementedError

    def codes_from_uniforms(self, u):
        raise NotImplementedError

    def code_to_index(self, codes):
        raise NotImplementedError

    def index_to_code(self, k):
        raise NotImplementedError

    def code_mass(self, codes):
        raise NotImplementedError

    def sample(self, rng, n):
        """Draw n i.i.d. indices using n uniforms from ``rng``."""
        return self.code_to_index(self.codes_from_uniforms(rng.random(int(n))))

    def population_err_detail(self, lang):
        raise NotImplementedError

    def contains_language(self, lang):
        raise NotImplementedError


class FiniteDistribution(Distribution):
    """A distribution with finitely many atoms.

    Args:
        atoms: Mapping or iterable of ``(index, mass)`` pairs. Zero-mass atoms
            are dropped; the rest must sum to 1 within 1e-12.
        name: Display name.
    """

    def __init__(self, atoms, name=None):
        items = atoms.items() if hasattr(atoms, "items") else atoms
        merged = {}
        for k, m in items:
            m = float(m)
            if not m >= 0 or not math.isfinite(m):
                raise ValueError(f"invalid mass {m} for atom {k}")
            k = check_index(k)
            merged[k] = merged.get(k, 0.0) + m
        total = math.fsum(merged.values())
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"atom masses sum to {total!r}, not 1")
        keep = sorted(k for k, m in merged.items() if m > 0)
        self.indices = np.array(keep, dtype=np.int64)
        self.masses = np.array([merged[k] for k in keep], dtype=np.float64)
        cdf = np.cumsum(self.masses)
        cdf[-1] = 1.0
        self.cdf = cdf
        self.atom_count = len(keep)
        self.name = name or "atoms:" + ",".join(f"{k}={merged[k]!r}" for k in keep)

    def in_support(self, k):
        return self.index_to_code(check_index(k)) >= 0

    def in_support_many(self, ks):
        return np.isin(np.asarray(ks, dtype=np.int64), self.indices)

    def mass(self, k):
        code = self.index_to_code(check_index(k))
        return float(self.masses[code]) if code >= 0 else 0.0

    def codes_from_uniforms(self, u):
        return _kernels.cdf_codes(u, self.cdf)

    def code_to_index(self, codes):
        return self.indices[np.asarray(codes, dtype=np.int64)]

    def index_to_code(self, k):
        k = int(k)
        if k > self.indices[-1]:
            return -1
        pos = int(np.searchsorted(self.indices, k))
        if pos < self.atom_count and self.indices[pos] == k:
            return pos
        return -1

    def code_mass(self, codes):
        return self.masses[np.asarray(codes, dtype=np.int64)]

    def population_err_detail(self, lang):
        inside = lang.contains_many(self.indices)
        return math.fsum(self.masses[~inside]), False

    def contains_language(self, lang):
        if lang.is_finite:
            members = lang.members_upto(max(lang.indices, default=1))
            return bool(self.in_support_many(members).all())
        if isinstance(lang, ArithmeticLanguage):
            return False
        return None

    def __repr__(self):
        return f"FiniteDistribution({self.name!r})"


class GeometricDistribution(Distribution):
    """Mass 3/4 on ``anchor`` and 2^-k / 4 on ``scale * k + shift`` for k >= 1.

    Args:
        anchor: Index of the anchor atom.
        scale: Positive family step.
        shift: Family offset; ``scale + shift`` must be a valid index.
        name: Display name.
    """

    def __init__(self, anchor, scale, shift, name=None):
        self.anchor = check_index(anchor)
        self.scale = int(scale)
        self.shift = int(shift)
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        check_index(self.scale + self.shift)
        if self._family_code(self.anchor) > 0:
            raise ValueError("anchor must not coincide with a family member")
        self.name = name or f"geometric:anchor={self.anchor},family={self.scale}k{self.shift:+d}"

    def _family_code(self, k):
        d = int(k) - self.shift
        if d % self.scale == 0 and d // self.scale >= 1:
            return d // self.scale
        return 0

    def family_index(self, k):
        """Index of family member k (k >= 1)."""
        return self.scale * int(k) + self.shift

    def in_family_many(self, ks):
        d = np.asarray(ks, dtype=np.int64) - self.shift
        return (d % self.scale == 0) & (d >= self.scale)

    def in_support(self, k):
        k = check_index(k)
        return k == self.anchor or self._family_code(k) > 0

    def in_support_many(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        return (ks == self.anchor) | self.in_family_many(ks)

    def mass(self, k):
        k = check_index(k)
        if k == self.anchor:
            return 0.75
        code = self._family_code(k)
        return math.ldexp(0.25, -code) if code > 0 else 0.0

    def codes_from_uniforms(self, u):
        return _kernels.geometric_codes(u)

    def code_to_index(self, codes):
        codes = np.asarray(codes, dtype=np.int64)
        return np.where(codes == 0, self.anchor, self.scale * codes + self.shift)

    def index_to_code(self, k):
        if int(k) == self.anchor:
            return 0
        code = self._family_code(k)
        return code if code > 0 else -1

    def code_mass(self, codes):
        codes = np.asarray(codes, dtype=np.int64)
        return np.where(codes == 0, 0.75, np.ldexp(0.25, -codes))

    def population_err_detail(self, lang):
        outside_anchor = 0.0 if lang.contains(self.anchor) else 0.75
        if isinstance(lang, FiniteLanguage):
            inside = lang.contains_many(lang._arr) & self.in_family_many(lang._arr)
            codes = (lang._arr[inside] - self.shift) // self.scale
            inside_family = math.fsum(math.ldexp(0.25, -int(c)) for c in codes)
            return outside_anchor + (0.25 - inside_family), False
        if isinstance(lang, ArithmeticLanguage):
            return outside_anchor + self._family_outside_ap(lang), False
        codes = np.arange(1, _TAIL_CODES + 1, dtype=np.int64)
        outside = ~lang.contains_many(self.code_to_index(codes))
        value = math.fsum(np.ldexp(0.25, -codes[outside]))
        return outside_anchor + value, True

    def _family_outside_ap(self, lang):
        # membership of family member k in the language is periodic in k once
        # past the extras and the progression start
        period = lang.step // math.gcd(lang.step, self.scale)
        settle = 1
        for x in (*lang.extras, lang.first_term):
            settle = max(settle, (x - self.shift) // self.scale + 1)
        head = np.arange(1, settle + 1, dtype=np.int64)
        head_out = ~lang.contains_many(self.code_to_index(head))
        total = math.fsum(np.ldexp(0.25, -head[head_out]))
        cycle = np.arange(settle + 1, settle + period + 1, dtype=np.int64)
        cycle_out = ~lang.contains_many(self.code_to_index(cycle))
        # sum_{r >= 0} 2^{-k - r*period} / 4 over the outside residues k
        tail = math.fsum(np.ldexp(0.25, -cycle[cycle_out]))
        return total + tail / (1.0 - math.ldexp(1.0, -period))

    def contains_language(self, lang):
        if lang.is_finite:
            return bool(self.in_support_many(lang._arr).all())
        if isinstance(lang, ArithmeticLanguage):
            if not self.in_support_many(lang._extra_arr).all():
                return False
            terms = lang.first_term + lang.step * np.arange(self.scale + 3, dtype=np.int64)
            return bool(self.in_support_many(terms).all()) and lang.step % self.scale == 0
        return None

    def __repr__(self):
        return f"GeometricDistribution({self.name!r})"


class Dataset:
    """An ordered sample of universe indices with a cached multiplicity table.

    Args:
        entries: The sample, as indices >= 1.
    """

    def __init__(self, entries):
        arr = np.array(entries, dtype=np.int64).ravel()
        if arr.size and arr.min() < 1:
            raise ValueError("dataset entries must be universe indices >= 1")
        arr.setflags(write=False)
        self.entries = arr

    @property
    def n(self):
        return int(self.entries.size)

    def __len__(self):
        return self.n

    @cached_property
    def _table(self):
        values, counts = np.unique(self.entries, return_counts=True)
        return values, counts.astype(np.int64)

    @property
    def distinct(self):
        """Sorted distinct indices in the sample."""
        return self._table[0]

    @property
    def distinct_counts(self):
        """Counts aligned with :attr:`distinct`."""
        return self._table[1]

    def multiplicity(self, k):
        """Number of entries equal to k."""
        values, counts = self._table
        pos = int(np.searchsorted(values, int(k)))
        if pos < values.size and values[pos] == k:
            return int(counts[pos])
        return 0

    def multiplicities(self, ks):
        """Vectorized :meth:`multiplicity`."""
        values, counts = self._table
        ks = np.asarray(ks, dtype=np.int64)
        if values.size == 0:
            return np.zeros(ks.shape, dtype=np.int64)
        pos = np.minimum(np.searchsorted(values, ks), values.size - 1)
        return np.where(values[pos] == ks, counts[pos], 0)

    def table(self):
        """Multiplicity map as a plain dict."""
        return {int(k): int(c) for k, c in zip(*self._table)}

    def __contains__(self, k):
        return self.multiplicity(k) > 0

    def replace(self, position, value):
        """A neighboring dataset with entry ``position`` set to ``value``."""
        entries = self.entries.copy()
        entries[int(position)] = check_index(value)
        return Dataset(entries)

    def __eq__(self, other):
        return isinstance(other, Dataset) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        head = ", ".join(map(str, self.entries[:8]))
        return f"Dataset(n={self.n}, [{head}{', ...' if self.n > 8 else ''}])"


def draw_dataset(dist, n, rng):
    """Draw an i.i.d. sample of size n from ``dist``.

    Args:
        dist: Distribution to sample.
        n: Sample size, at least 1.
        rng: ``numpy.random.Generator``; exactly n uniforms are consumed.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    return Dataset(dist.sample(rng, n))


def population_err(dist, lang):
    """Probability mass of ``dist`` outside ``lang``."""
    return dist.population_err_detail(lang)[0]


def population_err_detail(dist, lang):
    """Population risk together with a flag saying whether a tail was truncated."""
    return dist.population_err_detail(lang)


def empirical_err(sample, lang):
    """Fraction of sample entries outside ``lang``."""
    return outside_count(sample, lang) / sample.n


def outside_count(sample, lang):
    """Number of sample entries outside ``lang``."""
    inside = lang.contains_many(sample.distinct)
    return int(sample.distinct_counts[~inside].sum())


def multiplicity(sample, k):
    """N_S(u_k), the number of entries equal to k."""
    return sample.multiplicity(k)


def point_mass(k):
    """Distribution with all mass on index k."""
    return FiniteDistribution({check_index(k): 1.0}, name=f"point:{k}")


def _parse_atoms(spec):
    atoms = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        if not sep:
            raise InstanceError(f"atom {part!r} must look like index=mass")
        try:
            atoms.append((int(key), float(value)))
        except ValueError as exc:
            raise InstanceError(f"bad atom {part!r}: {exc}") from None
    if not atoms:
        raise InstanceError("atoms: list is empty")
    return atoms


def named_distribution(name):
    """Build a distribution from its config name.

    Recognized names are ``ipp-d``, ``ipp-dprime``, ``iidp-d``,
    ``iidp-dprime``, ``point:<k>`` and ``atoms:<k>=<mass>,...``.
    """
    key = name.strip().lower()
    if key == "ipp-d":
        return FiniteDistribution({1: 0.75, 3: 0.25}, name="ipp-d")
    if key == "ipp-dprime":
        return FiniteDistribution({1: 0.75, 4: 0.25}, name="ipp-dprime")
    if key == "iidp-d":
        return GeometricDistribution(1, 3, 0, name="iidp-d")
    if key == "iidp-dprime":
        return GeometricDistribution(1, 3, 1, name="iidp-dprime")
    if key.startswith("point:"):
        try:
            return point_mass(int(key[6:]))
        except ValueError as exc:
            raise InstanceError(f"bad point distribution {name!r}: {exc}") from None
    if key.startswith("atoms:"):
        try:
            return FiniteDistribution(_parse_atoms(name.strip()[6:]), name=name.strip())
        except ValueError as exc:
            raise InstanceError(f"bad atom list {name!r}: {exc}") from None
    raise InstanceError(f"unknown distribution {name!r}")
