"""Anyon fusion algebra: quantum dimensions, fusion probabilities, fixed points.

All numerics are in nats.  Structural identities are checked to 1e-12,
spectral quantities to 1e-10 (double precision with at most a few dozen
labels).  Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    ConditionOneViolated,
    DegenerateDistribution,
    InvalidCategory,
    MalformedInput,
    NonConvergence,
)

STRUCT_TOL = 1e-12
SPECTRAL_TOL = 1e-10
ITERATION_CAP = 100_000
FIXED_POINT_STEP_TOL = 1e-14


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class FusionCategory:
    """A fusion ring: ordered labels, a distinguished unit, duals, and the
    multiplicity tensor N[a, b, c] = number of ways a x b fuses to c."""

    labels: tuple[str, ...]
    unit: str
    dual: dict[str, str]
    N: np.ndarray  # shape (n, n, n), non-negative integers
    name: str = "category"

    def __post_init__(self):
        self.N.setflags(write=False)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise MalformedInput(f"unknown label {label!r}") from None

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def dual_index(self, i: int) -> int:
        return self.labels.index(self.dual[self.labels[i]])


@dataclass(frozen=True)
class QuantumDims:
    """Per-label quantum dimensions d_a and the total dimension D = sqrt(sum d_a^2)."""

    labels: tuple[str, ...]
    d: np.ndarray
    total: float

    def __post_init__(self):
        self.d.setflags(write=False)

    def of(self, label: str) -> float:
        return float(self.d[self.labels.index(label)])


@dataclass(frozen=True)
class FusionProbabilities:
    """p[s, a, b] = probability that independently created s and a fuse to b."""

    labels: tuple[str, ...]
    p: np.ndarray  # shape (n, n, n); rows over b sum to 1
    row_sum_residual: float = 0.0
    associativity_residual: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        n = len(self.labels)
        if p.shape != (n, n, n):
            raise MalformedInput(f"probability tensor shape {p.shape}, expected {(n, n, n)}")
        if float(np.abs(p.sum(axis=2) - 1.0).max()) > 1e-9:
            raise MalformedInput("fusion probability rows must sum to 1")
        p.setflags(write=False)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def prob(self, s: str, a: str, b: str) -> float:
        i = self.index
        return float(self.p[i(s), i(a), i(b)])


@dataclass(frozen=True)
class AnyonDistribution:
    """A probability distribution over anyon labels (normalized to 1e-12)."""

    labels: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.shape != (len(self.labels),):
            raise MalformedInput("distribution length does not match labels")
        if probs.min() < -STRUCT_TOL:
            raise MalformedInput(f"negative probability {probs.min():g}")
        if abs(probs.sum() - 1.0) > STRUCT_TOL:
            raise MalformedInput(f"distribution sums to {probs.sum()!r}, not 1")
        probs.setflags(write=False)

    def of(self, label: str) -> float:
        return float(self.probs[self.labels.index(label)])

    def entropy(self) -> float:
        """Shannon entropy in nats."""
        q = self.probs[self.probs > 0]
        return float(-(q * np.log(q)).sum())

    @staticmethod
    def uniform(labels) -> "AnyonDistribution":
        n = len(labels)
        return AnyonDistribution(tuple(labels), np.full(n, 1.0 / n))

    @staticmethod
    def point_mass(labels, a: str) -> "AnyonDistribution":
        probs = np.zeros(len(labels))
        probs[list(labels).index(a)] = 1.0
        return AnyonDistribution(tuple(labels), probs)


@dataclass(frozen=True)
class FixedPoint:
    """Result of the iterative fixed-point solve."""

    distribution: AnyonDistribution
    p_min: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class ResidualReport:
    """Max deviation of sum_s p[s,a,b] q_s from q_b, with the worst (a, b) pair."""

    residual: float
    worst_pair: tuple[str, str]


@dataclass
class DefectFusionSystem:
    """Fusion data for a point defect: strings labeled by S act on sectors labeled by A.

    p[s, b, a] = probability that string s applied to sector b yields sector a;
    rows over a are normalized.  q_star lives on S, p_star on A, and the two
    are tied by sum_s p[s, b, a] q*_s = p*_a for every b.
    """

    string_labels: tuple[str, ...]
    sector_labels: tuple[str, ...]
    p: np.ndarray  # shape (|S|, |A|, |A|), indexed (s, b, a)
    q_star: np.ndarray | None = None
    p_star: np.ndarray | None = None
    residual: float | None = None
    iterations: int = 0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        expect = (len(self.string_labels), len(self.sector_labels), len(self.sector_labels))
        if self.p.shape != expect:
            raise MalformedInput(f"defect table shape {self.p.shape}, expected {expect}")
        rows = self.p.sum(axis=2)
        if np.abs(rows - 1.0).max() > STRUCT_TOL:
            raise MalformedInput("defect fusion rows are not normalized over sectors")


# ---------------------------------------------------------------------------
# loading and validation


def _as_document(document) -> Mapping:
    if isinstance(document, Mapping):
        return document
    if isinstance(document, Path):
        try:
            return json.loads(document.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedInput(f"cannot read category file {document}: {exc}") from exc
    if isinstance(document, str):
        text = document.strip()
        if text.startswith("{"):
            try:
                return json.loads(text)
            except json.JSONDecodeError as exc:
                raise MalformedInput(f"invalid JSON: {exc}") from exc
        return _as_document(Path(document))
    raise MalformedInput(f"unsupported document type {type(document).__name__}")


def load_category(document) -> FusionCategory:
    """Load and fully validate a fusion category from a JSON document.

    The document carries `labels` (array of strings), an optional `dual`
    map, and `N`, a nested map label -> label -> label -> multiplicity with
    absent entries meaning 0.  The unit is inferred from the multiplicity
    table; if `dual` is absent it is inferred from the unit channel.
    """
    doc = _as_document(document)
    if "labels" not in doc or "N" not in doc:
        raise MalformedInput("category document needs 'labels' and 'N' fields")
    labels = tuple(str(x) for x in doc["labels"])
    if len(set(labels)) != len(labels):
        raise MalformedInput("duplicate labels")
    if not labels:
        raise MalformedInput("empty label set")
    n = len(labels)
    idx = {lab: i for i, lab in enumerate(labels)}

    N = np.zeros((n, n, n), dtype=np.int64)
    table = doc["N"]
    if not isinstance(table, Mapping):
        raise MalformedInput("'N' must be a nested map")
    for a, row in table.items():
        if a not in idx:
            raise MalformedInput(f"unknown label {a!r} in N")
        for b, col in row.items():
            if b not in idx:
                raise MalformedInput(f"unknown label {b!r} in N[{a}]")
            for c, mult in col.items():
                if c not in idx:
                    raise MalformedInput(f"unknown label {c!r} in N[{a}][{b}]")
                if not isinstance(mult, int) or mult < 0:
                    raise MalformedInput(f"N[{a}][{b}][{c}] = {mult!r} is not a non-negative integer")
                N[idx[a], idx[b], idx[c]] = mult

    dual_doc = doc.get("dual")
    dual = None
    if dual_doc is not None:
        if not isinstance(dual_doc, Mapping) or set(dual_doc) != set(labels):
            raise MalformedInput("'dual' must map every label")
        dual = {str(a): str(b) for a, b in dual_doc.items()}
        for b in dual.values():
            if b not in idx:
                raise MalformedInput(f"dual maps to unknown label {b!r}")

    name = str(doc.get("name", "category"))
    return _validate_category(labels, N, dual, name)


def _validate_category(labels, N, dual, name) -> FusionCategory:
    n = len(labels)
    idx = {lab: i for i, lab in enumerate(labels)}
    delta = np.eye(n, dtype=np.int64)

    # unit label: N[u, a, b] = N[a, u, b] = delta_{ab}
    unit = None
    for u in range(n):
        if np.array_equal(N[u], delta) and np.array_equal(N[:, u, :], delta):
            unit = u
            break
    if unit is None:
        raise InvalidCategory("no unit label: no u with N[u,a,b] = N[a,u,b] = delta_ab")

    # dual: forced by the unit channel N[a, b, unit]
    unit_channel = N[:, :, unit]
    inferred = {}
    for a in range(n):
        partners = np.nonzero(unit_channel[a] == 1)[0]
        if len(partners) != 1 or unit_channel[a].sum() != 1:
            raise InvalidCategory(
                f"dual of {labels[a]!r} not determined: N[{labels[a]},b,{labels[unit]}] "
                f"row is {unit_channel[a].tolist()}, expected a single 1"
            )
        inferred[labels[a]] = labels[int(partners[0])]
    if dual is None:
        dual = inferred
    elif dual != inferred:
        bad = next(a for a in labels if dual[a] != inferred[a])
        raise InvalidCategory(
            f"declared dual {bad!r} -> {dual[bad]!r} contradicts unit channel "
            f"(N forces {bad!r} -> {inferred[bad]!r})"
        )
    for a in labels:
        if dual[dual[a]] != a:
            raise InvalidCategory(f"dual is not an involution at {a!r}")
    if dual[labels[unit]] != labels[unit]:
        raise InvalidCategory("dual of the unit is not the unit")

    # associativity: sum_e N[a,b,e] N[e,c,d] = sum_f N[b,c,f] N[a,f,d]
    lhs = np.einsum("abe,ecd->abcd", N, N)
    rhs = np.einsum("bcf,afd->abcd", N, N)
    if not np.array_equal(lhs, rhs):
        a, b, c, d = np.argwhere(lhs != rhs)[0]
        raise InvalidCategory(
            "associativity fails at "
            f"({labels[a]},{labels[b]},{labels[c]},{labels[d]}): "
            f"sum_e N[{labels[a]},{labels[b]},e] N[e,{labels[c]},{labels[d]}] = {lhs[a, b, c, d]} "
            f"but sum_f N[{labels[b]},{labels[c]},f] N[{labels[a]},f,{labels[d]}] = {rhs[a, b, c, d]}"
        )

    return FusionCategory(labels=labels, unit=labels[unit], dual=dual, N=N, name=name)


def group_category(labels, multiply, name="group") -> FusionCategory:
    """Fusion category of a finite group: N[a,b,c] = 1 iff a*b = c."""
    labels = tuple(labels)
    n = len(labels)
    idx = {lab: i for i, lab in enumerate(labels)}
    N = np.zeros((n, n, n), dtype=np.int64)
    for a in labels:
        for b in labels:
            N[idx[a], idx[b], idx[multiply(a, b)]] = 1
    return _validate_category(labels, N, None, name)


def zn_category(n: int) -> FusionCategory:
    """Cyclic group Z_n with labels '0'..'n-1'."""
    labels = tuple(str(k) for k in range(n))
    return group_category(labels, lambda a, b: str((int(a) + int(b)) % n), name=f"z{n}")


def double_zn_category(p: int) -> FusionCategory:
    """Z_p x Z_p with labels 'cf' (charge digit, flux digit); p <= 9."""
    if p > 9:
        raise MalformedInput("two-digit labels only support p <= 9")
    labels = tuple(f"{c}{f}" for c in range(p) for f in range(p))

    def mul(a, b):
        return f"{(int(a[0]) + int(b[0])) % p}{(int(a[1]) + int(b[1])) % p}"

    return group_category(labels, mul, name=f"double_z{p}")


_DATA_PACKAGE = "teelab.data.categories"


def bundled_category_names() -> list[str]:
    """Names of the categories shipped with the package."""
    files = resources.files(_DATA_PACKAGE)
    return sorted(f.name[:-5] for f in files.iterdir() if f.name.endswith(".json"))


def bundled_category(name: str) -> FusionCategory:
    """Load one of the bundled category data files by name."""
    try:
        text = resources.files(_DATA_PACKAGE).joinpath(f"{name}.json").read_text()
    except (FileNotFoundError, OSError):
        raise MalformedInput(
            f"no bundled category {name!r}; available: {', '.join(bundled_category_names())}"
        ) from None
    return load_category(json.loads(text))


# ---------------------------------------------------------------------------
# quantum dimensions


def _perron_radius(mat: np.ndarray) -> tuple[float, int]:
    """Spectral radius of a non-negative integer matrix by shifted power iteration.

    Iterates with (mat + I), whose dominant eigenvalue r+1 is strictly
    separated in modulus from the rest of the spectrum, so the Rayleigh
    quotient converges even when mat itself has several eigenvalues on the
    spectral circle (permutation matrices).
    """
    n = mat.shape[0]
    shifted = mat.astype(float) + np.eye(n)
    v = np.full(n, 1.0 / math.sqrt(n))
    prev = 0.0
    for it in range(1, ITERATION_CAP + 1):
        w = shifted @ v
        norm = float(np.linalg.norm(w))
        v = w / norm
        rayleigh = float(v @ shifted @ v)
        if abs(rayleigh - prev) < FIXED_POINT_STEP_TOL:
            return rayleigh - 1.0, it
        prev = rayleigh
    raise NonConvergence(f"power iteration did not converge within {ITERATION_CAP} iterations")


def quantum_dimensions(cat: FusionCategory) -> QuantumDims:
    """Quantum dimension d_a = spectral radius of the fusion matrix (N_a)_{bc} = N[a,b,c].

    Validates sum_c N[a,b,c] d_c = d_a d_b to 1e-10 and d_a = d_{dual a}.
    """
    n = cat.n_labels
    d = np.empty(n)
    for a in range(n):
        d[a], _ = _perron_radius(cat.N[a])
    check = np.einsum("abc,c->ab", cat.N, d)
    residual = float(np.abs(check - np.outer(d, d)).max())
    if residual > SPECTRAL_TOL:
        raise InvalidCategory(f"dimension identity sum_c N[a,b,c] d_c = d_a d_b fails by {residual:g}")
    for a in range(n):
        if abs(d[a] - d[cat.dual_index(a)]) > SPECTRAL_TOL:
            raise InvalidCategory(f"d_a != d_dual(a) at {cat.labels[a]!r}")
    total = float(math.sqrt(float((d * d).sum())))
    return QuantumDims(labels=cat.labels, d=d, total=total)


def fusion_probabilities(cat: FusionCategory, dims: QuantumDims) -> FusionProbabilities:
    """p[s,a,b] = d_b N[s,a,b] / (d_s d_a); rows normalized and associative to 1e-12."""
    d = dims.d
    p = cat.N * d[None, None, :] / (d[:, None, None] * d[None, :, None])
    row_residual = float(np.abs(p.sum(axis=2) - 1.0).max())
    lhs = np.einsum("stu,uac->stac", p, p)
    rhs = np.einsum("tab,sbc->stac", p, p)
    assoc_residual = float(np.abs(lhs - rhs).max())
    if row_residual > STRUCT_TOL:
        raise InvalidCategory(f"fusion probability rows sum to 1 +- {row_residual:g}")
    if assoc_residual > STRUCT_TOL:
        raise InvalidCategory(f"fusion probabilities violate associativity by {assoc_residual:g}")
    return FusionProbabilities(
        labels=cat.labels, p=p, row_sum_residual=row_residual, associativity_residual=assoc_residual
    )


# ---------------------------------------------------------------------------
# the star convolution and its fixed point


def star(p: AnyonDistribution, q: AnyonDistribution, fp: FusionProbabilities) -> AnyonDistribution:
    """Fusion convolution: (p * q)_b = sum_{s,a} fp[s,a,b] p_s q_a."""
    if p.labels != fp.labels or q.labels != fp.labels:
        raise MalformedInput("distribution labels do not match fusion probabilities")
    out = np.einsum("sab,s,a->b", fp.p, p.probs, q.probs)
    return AnyonDistribution(fp.labels, out)


def fixed_point_iterative(fp: FusionProbabilities) -> FixedPoint:
    """Unique distribution q with  p_uniform * q = q, by iterating the convolution.

    Requires every entry of M[a,b] = mean_s fp[s,a,b] to be strictly
    positive; then the Perron-Frobenius theorem guarantees existence and
    uniqueness of q, and q is strictly positive.
    """
    n = fp.n_labels
    M = fp.p.mean(axis=0)  # M[a, b]
    zeros = np.argwhere(M <= 0.0)
    if len(zeros):
        a, b = zeros[0]
        raise ConditionOneViolated(
            f"averaged fusion matrix entry M[{fp.labels[a]},{fp.labels[b]}] = 0: "
            "no string label connects these sectors"
        )
    q = np.full(n, 1.0 / n)
    for it in range(1, ITERATION_CAP + 1):
        nxt = q @ M  # (p_uniform * q)_b = sum_a M[a,b] q_a
        nxt = nxt / nxt.sum()
        step = float(np.abs(nxt - q).max())
        q = nxt
        if step < FIXED_POINT_STEP_TOL:
            break
    else:
        raise NonConvergence(f"fixed-point iteration did not converge in {ITERATION_CAP} steps")
    residual = float(np.abs(np.einsum("sab,s->ab", fp.p, q) - q[None, :]).max())
    return FixedPoint(
        distribution=AnyonDistribution(fp.labels, q),
        p_min=float(q.min()),
        iterations=it,
        residual=residual,
    )


def closed_form_fixed_point(dims: QuantumDims) -> AnyonDistribution:
    """The closed-form fixed point p*_a = d_a^2 / D^2."""
    return AnyonDistribution(dims.labels, dims.d**2 / dims.total**2)


def verify_fixed_point_identity(fp: FusionProbabilities, p_star: AnyonDistribution) -> ResidualReport:
    """Max over (a, b) of |sum_s fp[s,a,b] p*_s - p*_b|, with the worst pair."""
    if p_star.labels != fp.labels:
        raise MalformedInput("distribution labels do not match fusion probabilities")
    defect = np.abs(np.einsum("sab,s->ab", fp.p, p_star.probs) - p_star.probs[None, :])
    a, b = np.unravel_index(int(defect.argmax()), defect.shape)
    return ResidualReport(residual=float(defect[a, b]), worst_pair=(fp.labels[a], fp.labels[b]))


# ---------------------------------------------------------------------------
# bound constants


def bound_constant(p_star: AnyonDistribution, set_size: int | None = None) -> float:
    """Finite-size constant K = 1 + (2/pmin^2) log(n_labels / pmin), natural log."""
    if set_size is None:
        set_size = len(p_star.labels)
    pmin = float(p_star.probs.min())
    if pmin <= 0.0:
        raise DegenerateDistribution("fixed-point distribution has a zero entry")
    return 1.0 + (2.0 / pmin**2) * math.log(set_size / pmin)


def tee_lower_bound(a0: str, p_star: AnyonDistribution, n: int, K: float) -> float:
    """Lower bound log(1/p*_{a0}) - K/sqrt(n) on the conditional mutual information.

    Strictly increasing in n; its n -> infinity limit is 2 log(D/d_{a0})
    when p* is the closed form d_a^2/D^2.
    """
    if n < 1:
        raise MalformedInput("n must be a positive integer")
    pa = p_star.of(a0)
    if pa <= 0.0:
        raise DegenerateDistribution(f"p*_{a0} = 0")
    return math.log(1.0 / pa) - K / math.sqrt(n)


def defect_fixed_point(sys: DefectFusionSystem) -> DefectFusionSystem:
    """Fill in the sector fixed point of a defect fusion system.

    With q* on the string labels (given, or uniform), the induced sector map
    M[b, a] = sum_s p[s, b, a] q*_s is row stochastic; p* is its unique
    stationary distribution, found by power iteration.  The recorded residual
    is max_{b,a} |M[b,a] - p*_a|, i.e. the defect of the identity
    sum_s p[s,b,a] q*_s = p*_a.
    """
    nS = len(sys.string_labels)
    q = np.asarray(sys.q_star, dtype=float) if sys.q_star is not None else np.full(nS, 1.0 / nS)
    if q.shape != (nS,) or abs(q.sum() - 1.0) > STRUCT_TOL or q.min() < -STRUCT_TOL:
        raise MalformedInput("q_star is not a distribution on the string labels")
    M = np.einsum("sba,s->ba", sys.p, q)
    zeros = np.argwhere(M <= 0.0)
    if len(zeros):
        b, a = zeros[0]
        raise ConditionOneViolated(
            f"induced sector matrix entry M[{sys.sector_labels[b]},{sys.sector_labels[a]}] = 0"
        )
    nA = len(sys.sector_labels)
    pi = np.full(nA, 1.0 / nA)
    for it in range(1, ITERATION_CAP + 1):
        nxt = pi @ M
        nxt = nxt / nxt.sum()
        step = float(np.abs(nxt - pi).max())
        pi = nxt
        if step < FIXED_POINT_STEP_TOL:
            break
    else:
        raise NonConvergence(f"defect fixed point did not converge in {ITERATION_CAP} steps")
    residual = float(np.abs(M - pi[None, :]).max())
    return DefectFusionSystem(
        string_labels=sys.string_labels,
        sector_labels=sys.sector_labels,
        p=sys.p,
        q_star=q,
        p_star=pi,
        residual=residual,
        iterations=it,
    )
