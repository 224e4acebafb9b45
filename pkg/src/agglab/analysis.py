"""Aggregation-coefficient matrices and multiset distinguishing strength.

An aggregation coefficient matrix M (shape s x n) turns a size-n multiset
of d-vectors into the fixed-width vector vec(M X), where X stacks the
elements in canonical order. The rank of M certifies how much the
aggregation can distinguish: full column rank means injective on size-n
multisets, and stacking extra rows strictly helps iff it raises the rank.

Everything here is a pure function over immutable inputs. Certificates
(rank conditions) are exact up to the numerical tolerance; refutations are
witness pairs found by exhaustive search over small grids.
"""

import itertools

import numpy as np

__all__ = [
    "MultisetSample", "BasicAggregator", "MatrixAggregator", "FunctionAggregator",
    "combined", "compose", "premap", "numerical_rank", "apply_agg",
    "strictly_stronger_by_stack", "is_injective_for_size",
    "ranges_disjoint_certificate", "enumerate_multisets", "collision_oracle",
    "compare_strength", "check_equivariance", "rank_preservation_report",
    "multiset_distance_under", "multiset_distance_under2", "kernel_collision",
    "cross_kernel_collision", "separation_set",
]

COLLISION_TOL = 1e-9
MAX_ORACLE_SIZE = 5


class MultisetSample:
    """Unordered collection of equal-width vectors.

    Elements are stored in canonical (lexicographic) order so two samples
    with the same content compare equal regardless of construction order.
    Scalars are promoted to width-1 vectors.
    """

    def __init__(self, elements):
        arr = np.asarray(elements, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError(f"need a nonempty 2-D element array, got shape {arr.shape}")
        order = sorted(range(arr.shape[0]), key=lambda i: tuple(arr[i]))
        self.elements = arr[order]

    @property
    def size(self):
        return self.elements.shape[0]

    @property
    def width(self):
        return self.elements.shape[1]

    def key(self):
        return tuple(map(tuple, self.elements))

    def is_all_zero(self):
        return bool(np.all(self.elements == 0.0))

    def __eq__(self, other):
        if not isinstance(other, MultisetSample):
            return NotImplemented
        return self.elements.shape == other.elements.shape and np.array_equal(
            self.elements, other.elements)

    def __repr__(self):
        if self.width == 1:
            inner = ", ".join(repr(float(x)) for x in self.elements[:, 0])
        else:
            inner = ", ".join(repr(tuple(row)) for row in self.elements)
        return "{{" + inner + "}}"


class Aggregator:
    """Callable from a MultisetSample (or raw element array) to a 1-D vector.

    arity is None for size-insensitive aggregators, or the fixed multiset
    size for matrix-backed ones.
    """

    arity = None
    name = "aggregator"

    def __call__(self, x):
        raise NotImplementedError

    @staticmethod
    def _elements(x):
        if isinstance(x, MultisetSample):
            return x.elements
        arr = np.asarray(x, dtype=np.float64)
        return arr[:, None] if arr.ndim == 1 else arr

    def __repr__(self):
        return self.name


_BASIC_KINDS = ("SUM", "MEAN", "NMEAN", "MAX", "MIN", "STD")


class BasicAggregator(Aggregator):
    """SUM / MEAN / NMEAN / MAX / MIN / STD over element coordinates.

    NMEAN uses the uniform 1/sqrt(n) weights a bare multiset supports;
    degree-aware normalization belongs to the graph layers. STD is the
    population standard deviation.
    """

    def __init__(self, kind):
        kind = kind.upper()
        if kind not in _BASIC_KINDS:
            raise ValueError(f"unknown aggregator kind {kind!r}")
        self.kind = kind
        self.name = kind

    def __call__(self, x):
        e = self._elements(x)
        n = e.shape[0]
        if self.kind == "SUM":
            return e.sum(axis=0)
        if self.kind == "MEAN":
            return e.mean(axis=0)
        if self.kind == "NMEAN":
            return (e / np.sqrt(n)).sum(axis=0) / np.sqrt(n)
        if self.kind == "MAX":
            return e.max(axis=0)
        if self.kind == "MIN":
            return e.min(axis=0)
        return e.std(axis=0)  # STD, ddof=0


class FunctionAggregator(Aggregator):
    def __init__(self, fn, arity=None, name="custom"):
        self._fn = fn
        self.arity = arity
        self.name = name

    def __call__(self, x):
        return np.asarray(self._fn(self._elements(x)), dtype=np.float64).ravel()


def combined(*aggs):
    """Concatenate aggregator outputs: the strength-preserving combination."""
    arities = {a.arity for a in aggs if a.arity is not None}
    if len(arities) > 1:
        raise ValueError("combined aggregators must agree on arity")
    arity = arities.pop() if arities else None
    name = "(" + "||".join(a.name for a in aggs) + ")"
    return FunctionAggregator(
        lambda e: np.concatenate([a(e) for a in aggs]), arity=arity, name=name)


def compose(fn, agg, name=None):
    """Post-compose a plain function with an aggregator: x -> fn(agg(x))."""
    return FunctionAggregator(
        lambda e: np.asarray(fn(agg(e)), dtype=np.float64).ravel(),
        arity=agg.arity, name=name or f"g∘{agg.name}")


def premap(agg, T):
    """Pre-multiply every element by T before aggregating."""
    T = np.asarray(T, dtype=np.float64)
    return FunctionAggregator(
        lambda e: agg(e @ T.T), arity=agg.arity, name=f"{agg.name}∘T")


class MatrixAggregator(Aggregator):
    """f_M: the aggregator a coefficient matrix induces on size-n multisets."""

    def __init__(self, M):
        self.M = np.asarray(M, dtype=np.float64)
        if self.M.ndim != 2:
            raise ValueError(f"coefficient matrix must be 2-D, got shape {self.M.shape}")
        self.arity = self.M.shape[1]
        self.name = f"f_M[{self.M.shape[0]}x{self.M.shape[1]}]"

    def __call__(self, x):
        e = self._elements(x)
        if e.shape[0] != self.arity:
            raise ValueError(f"multiset size {e.shape[0]} != coefficient columns {self.arity}")
        return (self.M @ e).reshape(-1, order="F")


def numerical_rank(M, tol=None):
    """Singular values above tol; default tol = 1e-9 * max(s, n) * sigma_max."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if tol is None:
        tol = 1e-9 * max(M.shape) * (sv[0] if sv.size else 0.0)
    if tol <= 0.0:
        tol = 0.0
    return int(np.sum(sv > tol))


def apply_agg(M, x, perm):
    """vec(M_pi X_pi) for a multiset presented in order perm.

    The permutation matrix restores canonical element order before the
    product, which is why the result is bitwise independent of perm: the
    columns of M permute together with the elements, so M_pi X_pi reduces
    to M times the canonically ordered element matrix.
    """
    M = np.asarray(M, dtype=np.float64)
    if not isinstance(x, MultisetSample):
        x = MultisetSample(x)
    perm = list(perm)
    if sorted(perm) != list(range(x.size)):
        raise ValueError(f"perm must be a permutation of range({x.size})")
    if M.shape[1] != x.size:
        raise ValueError(f"coefficient columns {M.shape[1]} != multiset size {x.size}")
    return (M @ x.elements).reshape(-1, order="F")


def strictly_stronger_by_stack(M, M_extra):
    """True iff stacking M_extra under M strictly raises the rank."""
    M = np.asarray(M, dtype=np.float64)
    M_extra = np.asarray(M_extra, dtype=np.float64)
    if M.shape[1] != M_extra.shape[1]:
        raise ValueError(f"column counts differ: {M.shape} vs {M_extra.shape}")
    return numerical_rank(np.vstack([M, M_extra])) > numerical_rank(M)


def is_injective_for_size(M):
    """True iff f_M distinguishes every size-n multiset: rank(M) == n."""
    M = np.asarray(M, dtype=np.float64)
    return numerical_rank(M) == M.shape[1]


def ranges_disjoint_certificate(M1, M2):
    """rank([M1 M2]) == n1 + n2: both injective and (for nonzero inputs)
    their output ranges cannot intersect."""
    M1 = np.asarray(M1, dtype=np.float64)
    M2 = np.asarray(M2, dtype=np.float64)
    if M1.shape[0] != M2.shape[0]:
        raise ValueError(f"row counts differ: {M1.shape} vs {M2.shape}")
    return numerical_rank(np.hstack([M1, M2])) == M1.shape[1] + M2.shape[1]


def enumerate_multisets(grid, size, width=1):
    """All multisets of `size` elements drawn from grid^width, in
    lexicographic order."""
    if width == 1:
        pool = [(float(g),) for g in grid]
    else:
        pool = [tuple(float(c) for c in combo)
                for combo in itertools.product(grid, repeat=width)]
    for combo in itertools.combinations_with_replacement(pool, size):
        yield MultisetSample(np.array(combo))


def _size_options(agg, max_size):
    if agg.arity is not None:
        return [agg.arity]
    return list(range(1, max_size + 1))


def _size_pairs(sizes1, sizes2):
    # Same-size pairs first, then widening gaps: the equal-size regime is
    # where single-aggregator injectivity questions live.
    pairs = {(k1, k2) for k1 in sizes1 for k2 in sizes2}
    return sorted(pairs, key=lambda p: (max(p), abs(p[0] - p[1]), p))


def collision_oracle(agg1, agg2, grid, max_size=3, width=1, tol=COLLISION_TOL):
    """First pair of distinct multisets with (near-)equal images, or None.

    Exhaustive over multisets with elements from grid^width up to
    max_size elements. All-zero multisets are skipped: every weighted
    aggregator maps them to zero, so they say nothing about injectivity
    or range overlap (see ranges_disjoint_certificate).
    """
    if max_size > MAX_ORACLE_SIZE:
        raise ValueError(f"max_size {max_size} > {MAX_ORACLE_SIZE} (explosion guard)")
    if len(grid) == 0:
        raise ValueError("grid must be nonempty")
    same = agg1 is agg2
    cache = {}

    def candidates(size):
        if size not in cache:
            cache[size] = [m for m in enumerate_multisets(grid, size, width)
                           if not m.is_all_zero()]
        return cache[size]

    for k1, k2 in _size_pairs(_size_options(agg1, max_size), _size_options(agg2, max_size)):
        ms1, ms2 = candidates(k1), candidates(k2)
        for i, x1 in enumerate(ms1):
            out1 = agg1(x1)
            start = i + 1 if (same and k1 == k2) else 0
            for x2 in ms2[start:]:
                if k1 == k2 and x1 == x2:
                    continue
                out2 = agg2(x2)
                if out1.shape == out2.shape and np.linalg.norm(out1 - out2) < tol:
                    return x1, x2
    return None


def separation_set(agg, multisets, tol=COLLISION_TOL):
    """Index pairs (i, j) the aggregator separates, over a fixed candidate list."""
    outs = [agg(m) for m in multisets]
    separated = set()
    for i in range(len(outs)):
        for j in range(i + 1, len(outs)):
            if outs[i].shape != outs[j].shape or np.linalg.norm(outs[i] - outs[j]) >= tol:
                separated.add((i, j))
    return separated


def compare_strength(agg1, agg2, grid, max_size=3, width=1, tol=COLLISION_TOL):
    """Classify the grid-restricted distinguishing-strength order.

    Returns a dict with 'verdict' in {stronger, weaker, equal,
    incomparable} plus a witness pair for each one-sided separation
    ('only_first' where agg1 separates and agg2 does not, and
    'only_second' for the reverse).
    """
    if max_size > MAX_ORACLE_SIZE:
        raise ValueError(f"max_size {max_size} > {MAX_ORACLE_SIZE} (explosion guard)")
    sizes = sorted(set(_size_options(agg1, max_size)) & set(_size_options(agg2, max_size)))
    if not sizes:
        return {"verdict": "incomparable", "only_first": None, "only_second": None}
    multisets = [m for k in sizes for m in enumerate_multisets(grid, k, width)]
    outs1 = [agg1(m) for m in multisets]
    outs2 = [agg2(m) for m in multisets]

    def sep(outs, i, j):
        return outs[i].shape != outs[j].shape or np.linalg.norm(outs[i] - outs[j]) >= tol

    only_first = only_second = None
    for i in range(len(multisets)):
        for j in range(i + 1, len(multisets)):
            s1, s2 = sep(outs1, i, j), sep(outs2, i, j)
            if s1 and not s2 and only_first is None:
                only_first = (multisets[i], multisets[j])
            elif s2 and not s1 and only_second is None:
                only_second = (multisets[i], multisets[j])
        if only_first and only_second:
            break
    if only_first and only_second:
        verdict = "incomparable"
    elif only_first:
        verdict = "stronger"
    elif only_second:
        verdict = "weaker"
    else:
        verdict = "equal"
    return {"verdict": verdict, "only_first": only_first, "only_second": only_second}


def check_equivariance(agg, T, x, tol=COLLISION_TOL):
    """True iff agg({{T x_i}}) equals T agg({{x_i}}) within tol."""
    T = np.asarray(T, dtype=np.float64)
    if not isinstance(x, MultisetSample):
        x = MultisetSample(x)
    if T.shape[1] != x.width:
        raise ValueError(f"T has {T.shape[1]} columns but elements have width {x.width}")
    lhs = agg(x.elements @ T.T)
    rhs = T @ agg(x)
    return lhs.shape == rhs.shape and np.linalg.norm(lhs - rhs) < tol


def rank_preservation_report(M, H):
    """(rank M, rank H, rank M H): the product never exceeds the min."""
    M = np.asarray(M, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if M.shape[1] != H.shape[0]:
        raise ValueError(f"shape mismatch {M.shape} vs {H.shape}")
    return numerical_rank(M), numerical_rank(H), numerical_rank(M @ H)


def multiset_distance_under(agg, x1, x2):
    o1, o2 = agg(x1), agg(x2)
    if o1.shape != o2.shape:
        return float("inf")
    return float(np.linalg.norm(o1 - o2))


def _null_space(M, rtol=1e-9):
    M = np.asarray(M, dtype=np.float64)
    u, sv, vh = np.linalg.svd(M)
    tol = rtol * max(M.shape) * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    return vh[rank:].T  # columns span the kernel


def kernel_collision(M):
    """A colliding multiset pair built from ker(M), or None if injective.

    f_M applies M to the canonically sorted element vector, so the kernel
    vector z is laid over a strictly increasing base b with spacing wide
    enough that b - z stays sorted. Then f_M({{b}}) == f_M({{b - z}})
    while the two multisets differ.
    """
    M = np.asarray(M, dtype=np.float64)
    ker = _null_space(M)
    if ker.shape[1] == 0:
        return None
    z = ker[:, 0]
    z = z / np.max(np.abs(z))
    n = M.shape[1]
    base = 3.0 * np.arange(n, dtype=np.float64)  # spacing 3 > max possible z step
    return MultisetSample(base), MultisetSample(base - z)


def _is_sorted(v):
    return bool(np.all(np.diff(v) >= 0.0))


def cross_kernel_collision(M1, M2, tol=COLLISION_TOL):
    """Multisets x1 != x2 with f_M1(x1) == f_M2(x2), from ker([M1 -M2]).

    Returns None when the stacked system has a trivial kernel (the
    disjoint-ranges certificate holds). A kernel vector yields a valid
    witness only when both of its pieces are already sorted (multiset
    aggregation reads elements in canonical order), so the kernel basis
    and its negations are scanned for sorted pieces and the collision is
    verified before returning.
    """
    M1 = np.asarray(M1, dtype=np.float64)
    M2 = np.asarray(M2, dtype=np.float64)
    n1 = M1.shape[1]
    ker = _null_space(np.hstack([M1, -M2]))
    if ker.shape[1] == 0:
        return None
    candidates = []
    for i in range(ker.shape[1]):
        candidates.extend([ker[:, i], -ker[:, i]])
    if ker.shape[1] >= 2:
        mix = ker[:, 0] + 0.5 * ker[:, 1]
        candidates.extend([mix, -mix])
    f1, f2 = MatrixAggregator(M1), MatrixAggregator(M2)
    for z in candidates:
        if np.linalg.norm(z) < 1e-12 or not (_is_sorted(z[:n1]) and _is_sorted(z[n1:])):
            continue
        x1 = MultisetSample(z[:n1])
        x2 = MultisetSample(z[n1:])
        if (x1.size != x2.size or x1 != x2) and multiset_distance_under2(f1, f2, x1, x2) < tol:
            return x1, x2
    return None


def multiset_distance_under2(agg1, agg2, x1, x2):
    """Distance between images under two (possibly different) aggregators."""
    o1, o2 = agg1(x1), agg2(x2)
    if o1.shape != o2.shape:
        return float("inf")
    return float(np.linalg.norm(o1 - o2))
