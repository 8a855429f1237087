"""Universe indices, languages, collections and the witness index.

The universe is the fixed enumeration u_1, u_2, ... and every object here
works with the positive integer index k of u_k. Strings are only used for
display via :func:`render`.
"""

import bisect

import numpy as np

from dplang.errors import EnumerationExhausted, ScanLimitInconclusive

DEFAULT_ENUMERATION_CAP = 10**6
DEFAULT_SCAN_LIMIT = 10**4


def check_index(k):
    """Validate a universe index and return it as a Python int."""
    k = int(k)
    if k < 1:
        raise ValueError(f"universe index must be >= 1, got {k}")
    return k


def render(k):
    """Display form of u_k."""
    return f"u{check_index(k)}"


def parse_rendered(text):
    """Inverse of :func:`render`."""
    if not text.startswith("u"):
        raise ValueError(f"not a rendered universe element: {text!r}")
    return check_index(text[1:])


class Language:
    """Base class for index-set languages.

    Subclasses implement :meth:`contains`, :meth:`kth_member_above` and
    :meth:`members_upto`; the vectorized membership test defaults to a loop.
    """

    label = "L"
    is_finite = False

    def contains(self, k):
        raise NotImplementedError

    def contains_many(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        out = np.fromiter((self.contains(int(k)) for k in ks.ravel()), dtype=bool, count=ks.size)
        return out.reshape(ks.shape)

    def kth_member_above(self, t, j):
        raise NotImplementedError

    def members_upto(self, t):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r})"


class ArithmeticLanguage(Language):
    """Members ``extras`` together with ``offset + step * k`` for ``k >= start``.

    Args:
        offset: Progression offset.
        step: Positive progression step.
        extras: Finite set of additional member indices.
        start: First progression multiplier (default 1).
        label: Display label.
    """

    def __init__(self, offset, step, extras=(), start=1, label=None):
        self.offset = int(offset)
        self.step = int(step)
        self.start = int(start)
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.offset + self.step * self.start < 1:
            raise ValueError("progression must start at an index >= 1")
        self.first_term = self.offset + self.step * self.start
        self.extras = tuple(sorted({check_index(e) for e in extras}))
        # extras that the progression does not already cover
        self._extra_only = tuple(e for e in self.extras if not self._in_progression(e))
        self._extra_arr = np.array(self._extra_only, dtype=np.int64)
        if label is None:
            head = "{" + ",".join(map(str, self.extras)) + "} ∪ " if self.extras else ""
            label = f"{head}{{{self.step}k{self.offset:+d} : k>={self.start}}}"
        self.label = label

    def _in_progression(self, k):
        return k >= self.first_term and (k - self.offset) % self.step == 0

    def contains(self, k):
        k = check_index(k)
        return self._in_progression(k) or k in self._extra_only

    def contains_many(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        out = (ks >= self.first_term) & ((ks - self.offset) % self.step == 0)
        if self._extra_arr.size:
            out |= np.isin(ks, self._extra_arr)
        return out

    def _term(self, r):
        return self.offset + self.step * r

    def kth_member_above(self, t, j):
        t = int(t)
        j = int(j)
        if j < 1:
            raise ValueError("j must be >= 1")
        # first progression multiplier whose term exceeds t
        k0 = max(self.start, (t - self.offset) // self.step + 1)
        above = self._extra_only[bisect.bisect_right(self._extra_only, t):]
        # merged rank of each extra = extras before it + progression terms below it
        taken = 0
        for i, e in enumerate(above):
            rank = i + 1 + max(0, -((self.offset - e) // self.step) - k0)
            if rank == j:
                return e
            if rank > j:
                break
            taken = i + 1
        return self._term(k0 + j - 1 - taken)

    def members_upto(self, t):
        t = int(t)
        if t < self.first_term:
            prog = np.empty(0, dtype=np.int64)
        else:
            last = (t - self.offset) // self.step
            prog = self.offset + self.step * np.arange(self.start, last + 1, dtype=np.int64)
        extra = self._extra_arr[self._extra_arr <= t]
        return np.sort(np.concatenate([prog, extra]))


class FiniteLanguage(Language):
    """A finite set of universe indices."""

    is_finite = True

    def __init__(self, indices, label=None):
        self.indices = tuple(sorted({check_index(k) for k in indices}))
        self._arr = np.array(self.indices, dtype=np.int64)
        self.label = label or "{" + ",".join(map(str, self.indices)) + "}"

    def contains(self, k):
        k = check_index(k)
        pos = bisect.bisect_left(self.indices, k)
        return pos < len(self.indices) and self.indices[pos] == k

    def contains_many(self, ks):
        return np.isin(np.asarray(ks, dtype=np.int64), self._arr)

    def kth_member_above(self, t, j):
        pos = bisect.bisect_right(self.indices, int(t)) + int(j) - 1
        if pos >= len(self.indices):
            raise EnumerationExhausted(f"{self.label} has fewer than {j} members above {t}")
        return self.indices[pos]

    def members_upto(self, t):
        return self._arr[self._arr <= int(t)].copy()


class PredicateLanguage(Language):
    """A language given by a membership callable, enumerated by scanning.

    Args:
        predicate: Callable mapping a positive int to a truthy value.
        cap: Largest index any enumeration will examine.
        label: Display label.
    """

    def __init__(self, predicate, cap=DEFAULT_ENUMERATION_CAP, label="predicate"):
        self.predicate = predicate
        self.cap = int(cap)
        self.label = label

    def contains(self, k):
        return bool(self.predicate(check_index(k)))

    def kth_member_above(self, t, j):
        found = 0
        for k in range(max(int(t) + 1, 1), self.cap + 1):
            if self.predicate(k):
                found += 1
                if found == j:
                    return k
        raise EnumerationExhausted(f"{self.label}: cap {self.cap} reached after {found} of {j} members")

    def members_upto(self, t):
        stop = min(int(t), self.cap)
        return np.array([k for k in range(1, stop + 1) if self.predicate(k)], dtype=np.int64)


def language_contains(lang, k):
    """True iff u_k is a member of ``lang``."""
    return lang.contains(k)


def kth_member_above(lang, t, j):
    """The j-th smallest member index of ``lang`` strictly greater than t."""
    return lang.kth_member_above(t, j)


class Collection:
    """An ordered, possibly infinite sequence of languages.

    Args:
        languages: The leading languages, in order.
        tail: Optional callable ``m -> Language`` producing language m for
            every m past the explicit list (1-based). Without it the
            collection is finite.
        name: Display name.
    """

    def __init__(self, languages, tail=None, name="collection"):
        self._head = tuple(languages)
        self._tail = tail
        self._cache = {}
        self.name = name
        if not self._head and tail is None:
            raise ValueError("collection must contain at least one language")

    @property
    def is_finite(self):
        return self._tail is None

    def __len__(self):
        if self._tail is not None:
            raise TypeError("infinite collection has no length")
        return len(self._head)

    def language(self, i):
        """Language number i (1-based)."""
        i = int(i)
        if i < 1:
            raise IndexError("language indices start at 1")
        if i <= len(self._head):
            return self._head[i - 1]
        if self._tail is None:
            raise IndexError(f"{self.name} has only {len(self._head)} languages")
        if i not in self._cache:
            self._cache[i] = self._tail(i)
        return self._cache[i]

    def prefix(self, m):
        """The first m languages as a list."""
        return [self.language(i) for i in range(1, int(m) + 1)]


def _padding_language(m):
    return ArithmeticLanguage(2, 3, extras=(1, 2), start=m, label=f"{{1,2}} ∪ {{3k+2 : k>={m}}}")


def mod3_pair():
    """The two languages {1} ∪ {3k} and {1} ∪ {3k+1} (k >= 1)."""
    lang = ArithmeticLanguage(0, 3, extras=(1,), label="{1} ∪ {3k : k>=1}")
    lang_prime = ArithmeticLanguage(1, 3, extras=(1,), label="{1} ∪ {3k+1 : k>=1}")
    return [lang, lang_prime]


def mod3_collection(padded=True):
    """The built-in collection used by the hard instances.

    The first two languages are :func:`mod3_pair`. When ``padded`` the
    collection continues with ``{1, 2} ∪ {3k+2 : k >= m}`` for m = 3, 4, ...,
    which contain neither 3 nor 4 nor any multiple of 3 past 1, so every
    hard-instance element keeps its membership pattern and index 2 is a
    witness for each padding language.
    """
    if padded:
        return Collection(mod3_pair(), tail=_padding_language, name="mod3")
    return Collection(mod3_pair(), name="mod3-pair")


def first_witness(lang, dist, scan_limit=DEFAULT_SCAN_LIMIT):
    """Smallest member index of ``lang`` up to ``scan_limit`` outside supp(dist), or None."""
    members = lang.members_upto(scan_limit)
    if members.size == 0:
        return None
    outside = ~dist.in_support_many(members)
    if not outside.any():
        return None
    return int(members[np.argmax(outside)])


def witness_index(languages, dist, scan_limit=DEFAULT_SCAN_LIMIT):
    """Smallest i such that every language not inside supp(dist) has a witness at index <= i.

    Args:
        languages: The collection prefix to examine.
        dist: Distribution with exact ``in_support_many`` and
            ``contains_language`` queries.
        scan_limit: Largest index scanned for witnesses.

    Returns:
        The witness index as a positive int.

    Raises:
        ScanLimitInconclusive: Some language has no witness within the scan
            limit and containment in the support could not be established.
    """
    scan_limit = int(scan_limit)
    if scan_limit < 1:
        raise ValueError("scan_limit must be >= 1")
    best = 1
    unresolved = []
    for pos, lang in enumerate(languages):
        w = first_witness(lang, dist, scan_limit)
        if w is not None:
            best = max(best, w)
        elif dist.contains_language(lang) is not True:
            unresolved.append(pos)
    if unresolved:
        raise ScanLimitInconclusive(best, unresolved)
    return best

