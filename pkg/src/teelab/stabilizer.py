"""Exact TEE computation on qudit (prime p) toric codes via stabilizer ranks.

Geometry.  A width x height lattice of plaquettes with one Z_p qudit per
edge, smooth boundaries on all four sides.  Positions are tracked in doubled
integer coordinates: vertex (x,y) sits at (2x, 2y), a horizontal edge at
(2x+1, 2y), a vertical edge at (2x, 2y+1), a plaquette center at
(2x+1, 2y+1).  Regions are half-open boxes in these coordinates and own the
edges whose midpoints they contain, so region membership is exact integer
arithmetic and a partition of the plane has no gaps or double counting.

States.  A pure stabilizer state is a full-rank list of generators over F_p
in symplectic (X-part | Z-part) layout plus a phase exponent per generator.
Anyon sectors are produced by conjugating the ground state with open string
operators anchored at the origin: a Z-type string along lattice edges for
electric charge and an X-type string on dual edges for magnetic flux.  The
antiparticle is parked on the (east) lattice boundary.  Orientation
conventions: edges point +x / +y; a vertex operator uses X^{+1} on outgoing
and X^{-1} on incoming edges; a plaquette operator takes Z around its
boundary counterclockwise.

Every region entropy is (|R| - g_R) log p with g_R the rank of the subgroup
of stabilizers supported inside R: an exact integer multiple of log p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from itertools import product as iproduct

import numpy as np

from .dense import DensityOperator, FactorSpace
from .errors import (
    DimensionCap,
    InsufficientWidth,
    InvalidGeometry,
    MalformedInput,
    PathBlocked,
    RankDeficiency,
)
from .fusion import closed_form_fixed_point, double_zn_category, fusion_probabilities, quantum_dimensions
from . import audit
from .gfp import (
    combine_rows,
    left_nullspace_mod_p,
    pauli_mul,
    pauli_pow,
    phased_rref,
    rank_mod_p,
)

SectorLabel = tuple[int, int]  # (electric charge, magnetic flux) in Z_p x Z_p

_PRIMES = {2, 3, 5, 7, 11, 13}


def _check_prime(p: int) -> None:
    if p in _PRIMES:
        return
    if p < 2:
        raise MalformedInput(f"{p} is not prime")
    for d in range(2, int(math.isqrt(p)) + 1):
        if p % d == 0:
            raise MalformedInput(f"{p} is not prime")


@dataclass(frozen=True)
class Lattice:
    """Plaquette grid with Z_p qudits on edges and smooth boundaries."""

    width: int
    height: int
    prime: int

    def __post_init__(self):
        if self.width < 4 or self.height < 4:
            raise MalformedInput("lattice must be at least 4 x 4 plaquettes")
        _check_prime(self.prime)

    @property
    def n_h_edges(self) -> int:
        return self.width * (self.height + 1)

    @property
    def n_edges(self) -> int:
        return self.n_h_edges + (self.width + 1) * self.height

    def h_edge(self, x: int, y: int) -> int:
        if not (0 <= x < self.width and 0 <= y <= self.height):
            raise MalformedInput(f"no horizontal edge at ({x},{y})")
        return y * self.width + x

    def v_edge(self, x: int, y: int) -> int:
        if not (0 <= x <= self.width and 0 <= y < self.height):
            raise MalformedInput(f"no vertical edge at ({x},{y})")
        return self.n_h_edges + y * (self.width + 1) + x

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        """Doubled coordinates of every edge midpoint, shape (n_edges, 2)."""
        mids = np.empty((self.n_edges, 2), dtype=np.int64)
        for y in range(self.height + 1):
            for x in range(self.width):
                mids[self.h_edge(x, y)] = (2 * x + 1, 2 * y)
        for y in range(self.height):
            for x in range(self.width + 1):
                mids[self.v_edge(x, y)] = (2 * x, 2 * y + 1)
        return mids

    def edges_in_box(self, box: tuple[int, int, int, int]) -> tuple[int, ...]:
        """Edges whose midpoints lie in the half-open doubled box (x0, y0, x1, y1)."""
        x0, y0, x1, y1 = box
        m = self.edge_midpoints
        mask = (m[:, 0] >= x0) & (m[:, 0] < x1) & (m[:, 1] >= y0) & (m[:, 1] < y1)
        return tuple(int(i) for i in np.nonzero(mask)[0])

    def vertex_star(self, x: int, y: int) -> list[tuple[int, int]]:
        """(edge, orientation sign) pairs of the vertex operator at (x, y)."""
        star = []
        if x < self.width:
            star.append((self.h_edge(x, y), +1))
        if x > 0:
            star.append((self.h_edge(x - 1, y), -1))
        if y < self.height:
            star.append((self.v_edge(x, y), +1))
        if y > 0:
            star.append((self.v_edge(x, y - 1), -1))
        return star

    def plaquette_boundary(self, x: int, y: int) -> list[tuple[int, int]]:
        """(edge, sign) pairs of the plaquette operator at (x, y), counterclockwise."""
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise MalformedInput(f"no plaquette at ({x},{y})")
        return [
            (self.h_edge(x, y), +1),
            (self.v_edge(x + 1, y), +1),
            (self.h_edge(x, y + 1), -1),
            (self.v_edge(x, y), -1),
        ]


@dataclass(frozen=True)
class StringPath:
    """An oriented chain of edges with per-edge signs."""

    edges: tuple[tuple[int, int], ...]  # (edge index, sign)
    kind: str  # "open" or "closed"

    def __post_init__(self):
        if self.kind not in ("open", "closed"):
            raise MalformedInput("path kind must be 'open' or 'closed'")
        if not self.edges:
            raise MalformedInput("empty path")
        for _, sign in self.edges:
            if sign not in (-1, +1):
                raise MalformedInput("path signs must be +-1")


@dataclass(frozen=True)
class StabilizerState:
    """Full-rank phased stabilizer generators over F_p."""

    lattice: Lattice
    gens: np.ndarray  # (n_edges, 2 n_edges) mod p
    phases: np.ndarray  # (n_edges,) mod p
    row_labels: tuple[tuple, ...]

    def __post_init__(self):
        self.gens.setflags(write=False)
        self.phases.setflags(write=False)

    @property
    def n(self) -> int:
        return self.lattice.n_edges

    def with_phases(self, phases: np.ndarray) -> "StabilizerState":
        return replace(self, phases=np.asarray(phases, dtype=np.int64) % self.lattice.prime)


def build_ground_state(lat: Lattice) -> StabilizerState:
    """Ground state: all plaquette operators plus all vertex operators but one.

    The product of all vertex operators is the identity (each edge enters
    twice with opposite signs), so one vertex generator is redundant and the
    remaining V - 1 + P generators are exactly n_edges independent rows.
    """
    p = lat.prime
    E = lat.n_edges
    rows = []
    labels = []
    for y in range(lat.height):
        for x in range(lat.width):
            vec = np.zeros(2 * E, dtype=np.int64)
            for e, sign in lat.plaquette_boundary(x, y):
                vec[E + e] = sign % p
            rows.append(vec)
            labels.append(("plaquette", x, y))
    for y in range(lat.height + 1):
        for x in range(lat.width + 1):
            if (x, y) == (0, 0):
                continue  # the one redundant vertex generator
            vec = np.zeros(2 * E, dtype=np.int64)
            for e, sign in lat.vertex_star(x, y):
                vec[e] = sign % p
            rows.append(vec)
            labels.append(("vertex", x, y))
    gens = np.array(rows, dtype=np.int64)
    if gens.shape[0] != E:
        raise RankDeficiency(f"{gens.shape[0]} generators for {E} edges")
    gx, gz = gens[:, :E], gens[:, E:]
    gram = (gx @ gz.T - gz @ gx.T) % p
    if gram.any():
        raise RankDeficiency("generators do not commute")
    if rank_mod_p(gens, p) != E:
        raise RankDeficiency("generator matrix is not full rank")
    return StabilizerState(
        lattice=lat, gens=gens, phases=np.zeros(E, dtype=np.int64), row_labels=tuple(labels)
    )


# ---------------------------------------------------------------------------
# annulus partitions


@dataclass(frozen=True)
class AnnulusPartition:
    """Rectangular annulus around an origin plaquette, split A | B1 | C | B2.

    The hole is a half-open plaquette box; the four bars have `width`
    plaquette columns.  B1 (top) and B2 (bottom) span the full annulus width
    and own the corners; A (west) and C (east) span only the hole's rows, so
    thinning A keeps the ring connected.  `thin_steps` removes one
    edge-column from each side of A per step.
    """

    lattice: Lattice
    origin: tuple[int, int]
    hole: tuple[int, int, int, int]  # plaquette box (x0, y0, x1, y1)
    width: int
    thin_steps: int = 0
    a_width: int | None = None  # region A may be wider to host nested thinnings
    ell: int = 1  # minimum bar width / origin clearance, in plaquette units

    def __post_init__(self):
        if self.a_width is None:
            object.__setattr__(self, "a_width", self.width)
        hx0, hy0, hx1, hy1 = self.hole
        if not (hx0 < hx1 and hy0 < hy1):
            raise InvalidGeometry("empty hole")
        if min(self.width, self.a_width) < self.ell:
            raise InvalidGeometry(f"bar width below the configured minimum {self.ell}")
        ox, oy = self.origin
        if not (hx0 <= ox < hx1 and hy0 <= oy < hy1):
            raise InvalidGeometry("origin plaquette must lie inside the hole")
        gap = min(ox - hx0, hx1 - 1 - ox, oy - hy0, hy1 - 1 - oy) + 1
        if gap < self.ell:
            raise InvalidGeometry(f"origin is {gap} plaquettes from the annulus, needs >= {self.ell}")
        w = self.width
        lat = self.lattice
        # one plaquette of clearance keeps the annulus in the bulk: flux
        # condenses on the smooth lattice boundary, so a boundary-touching
        # annulus measures a smaller effective anyon set (and the sector
        # strings park their far anyons on that boundary)
        if (
            hx0 - self.a_width < 1
            or hy0 - w < 1
            or hx1 + w > lat.width - 1
            or hy1 + w > lat.height - 1
        ):
            raise InvalidGeometry("annulus must keep one plaquette of clearance from the lattice boundary")
        if self.thin_steps < 0 or self.thin_steps > self.a_width - 1:
            raise InsufficientWidth(
                f"{self.thin_steps} thinning steps exceed what a width-{self.a_width} bar allows"
            )

    # doubled-coordinate boxes -------------------------------------------------

    @property
    def hole_box(self) -> tuple[int, int, int, int]:
        hx0, hy0, hx1, hy1 = self.hole
        return (2 * hx0, 2 * hy0, 2 * hx1, 2 * hy1)

    def bar_boxes(self) -> dict[str, tuple[int, int, int, int]]:
        hx0, hy0, hx1, hy1 = self.hole
        w = self.width
        aw = self.a_width
        k = self.thin_steps
        return {
            "A": (2 * (hx0 - aw) + k, 2 * hy0, 2 * hx0 - k, 2 * hy1),
            "C": (2 * hx1, 2 * hy0, 2 * (hx1 + w), 2 * hy1),
            "B1": (2 * (hx0 - aw), 2 * hy1, 2 * (hx1 + w), 2 * (hy1 + w)),
            "B2": (2 * (hx0 - aw), 2 * (hy0 - w), 2 * (hx1 + w), 2 * hy0),
        }

    def thin(self, steps: int = 1) -> "AnnulusPartition":
        return replace(self, thin_steps=self.thin_steps + steps)

    def region_edges(self, spec: str) -> tuple[int, ...]:
        """Edges of a region: any combination of the letters A, B, C."""
        boxes = self.bar_boxes()
        out: set[int] = set()
        for ch in spec:
            if ch == "A":
                out.update(self.lattice.edges_in_box(boxes["A"]))
            elif ch == "B":
                out.update(self.lattice.edges_in_box(boxes["B1"]))
                out.update(self.lattice.edges_in_box(boxes["B2"]))
            elif ch == "C":
                out.update(self.lattice.edges_in_box(boxes["C"]))
            else:
                raise MalformedInput(f"unknown region letter {ch!r}")
        return tuple(sorted(out))


def centered_annulus(
    lat: Lattice, width: int, hole_size: int = 3, thin_steps: int = 0, a_width: int | None = None
) -> AnnulusPartition:
    """An annulus of the given bar width with a centered hole and centered origin."""
    aw = width if a_width is None else a_width
    hx0 = (lat.width - hole_size + (aw - width)) // 2
    hy0 = (lat.height - hole_size) // 2
    hole = (hx0, hy0, hx0 + hole_size, hy0 + hole_size)
    origin = (hx0 + hole_size // 2, hy0 + hole_size // 2)
    return AnnulusPartition(
        lattice=lat, origin=origin, hole=hole, width=width, thin_steps=thin_steps, a_width=aw
    )


# ---------------------------------------------------------------------------
# string operators


def _string_vector(lat: Lattice, path: StringPath, coeff: int, kind: str) -> np.ndarray:
    """Symplectic vector of Z^coeff (kind 'z') or X^coeff (kind 'x') along a path."""
    p = lat.prime
    E = lat.n_edges
    t = np.zeros(2 * E, dtype=np.int64)
    off = E if kind == "z" else 0
    for e, sign in path.edges:
        t[off + e] = (t[off + e] + sign * coeff) % p
    return t


def charge_path_east(lat: Lattice, vx: int, vy: int, detour_column: int | None = None) -> StringPath:
    """Lattice path from vertex (vx, vy) to the boundary: east, optionally
    turning south at `detour_column` (an L-shaped route)."""
    edges = []
    stop = detour_column if detour_column is not None else lat.width
    if not (vx < stop <= lat.width):
        raise PathBlocked(f"detour column {stop} not east of vertex {vx}")
    for x in range(vx, stop):
        edges.append((lat.h_edge(x, vy), +1))
    if detour_column is not None:
        for y in range(vy - 1, -1, -1):
            edges.append((lat.v_edge(detour_column, y), -1))
    return StringPath(edges=tuple(edges), kind="open")


def flux_path_east(lat: Lattice, px: int, py: int, detour_column: int | None = None) -> StringPath:
    """Dual path from plaquette (px, py) out of the lattice: east, optionally
    turning south at plaquette column `detour_column`.  Lists the crossed
    primal edges; eastward crossings get +1, southward -1."""
    edges = []
    stop = detour_column if detour_column is not None else lat.width
    if not (px <= stop <= lat.width):
        raise PathBlocked(f"detour column {stop} not east of plaquette {px}")
    for x in range(px + 1, stop + 1):
        edges.append((lat.v_edge(x, py), +1))
    if detour_column is not None and stop < lat.width:
        for y in range(py, -1, -1):
            edges.append((lat.h_edge(stop, y), -1))
    return StringPath(edges=tuple(edges), kind="open")


def conjugate_by_string(state: StabilizerState, t: np.ndarray) -> StabilizerState:
    """Conjugate the state by the Pauli string with symplectic vector t."""
    p = state.lattice.prime
    E = state.n
    tx, tz = t[:E], t[E:]
    gx, gz = state.gens[:, :E], state.gens[:, E:]
    shift = (gx @ tz - gz @ tx) % p
    return state.with_phases(state.phases + shift)


def create_sector(
    state: StabilizerState,
    sector: SectorLabel,
    origin: tuple[int, int] | None = None,
    detour_column: int | None = None,
    avoid: AnnulusPartition | None = None,
) -> StabilizerState:
    """Apply the origin-anchored open strings for the sector (charge, flux).

    The charge string is Z-type along lattice edges from the origin vertex
    to the east boundary; the flux string is X-type on the dual path from
    the origin plaquette out through the east boundary (where flux
    condenses, so no far-end excitation remains).  With `avoid` given, the
    route must cross that annulus only through its A or C bars; a route
    touching B raises PathBlocked.
    """
    lat = state.lattice
    p = lat.prime
    c, f = sector
    if not (0 <= c < p and 0 <= f < p):
        raise MalformedInput(f"sector {sector} outside Z_{p} x Z_{p}")
    if origin is None:
        origin = avoid.origin if avoid is not None else (lat.width // 2, lat.height // 2)
    ox, oy = origin
    t_total = np.zeros(2 * state.n, dtype=np.int64)
    paths = []
    if c:
        path = charge_path_east(lat, ox, oy, detour_column)
        t_total = (t_total + _string_vector(lat, path, c, "z")) % p
        paths.append(path)
    if f:
        path = flux_path_east(lat, ox, oy, detour_column)
        t_total = (t_total + _string_vector(lat, path, f, "x")) % p
        paths.append(path)
    if avoid is not None and paths:
        b_edges = set(avoid.region_edges("B"))
        for path in paths:
            touched = {e for e, _ in path.edges} & b_edges
            if touched:
                raise PathBlocked(
                    f"string route crosses region B at edges {sorted(touched)[:4]}; "
                    "choose a different detour column"
                )
    if not paths:
        return state
    return conjugate_by_string(state, t_total)


def sector_family(
    state: StabilizerState,
    part: AnnulusPartition,
    origin: tuple[int, int] | None = None,
    detour_column: int | None = None,
) -> dict[SectorLabel, StabilizerState]:
    """All p^2 sector states, anchored at the partition's origin by default."""
    p = state.lattice.prime
    return {
        (c, f): create_sector(state, (c, f), origin=origin, detour_column=detour_column, avoid=part)
        for c in range(p)
        for f in range(p)
    }


# ---------------------------------------------------------------------------
# entropies


def _outside_columns(state: StabilizerState, region: tuple[int, ...]) -> np.ndarray:
    E = state.n
    outside = np.setdiff1d(np.arange(E), np.asarray(region, dtype=np.int64))
    return np.concatenate([outside, outside + E])


def region_rank(state: StabilizerState, region: tuple[int, ...]) -> int:
    """g_R: rank of the subgroup of stabilizers supported inside the region."""
    cols = _outside_columns(state, region)
    return state.gens.shape[0] - rank_mod_p(state.gens[:, cols], state.lattice.prime)


def region_entropy(state: StabilizerState, region) -> float:
    """S(rho_R) = (|R| - g_R) log p, exactly."""
    region = tuple(sorted(set(int(e) for e in region)))
    for e in region:
        if not 0 <= e < state.n:
            raise MalformedInput(f"edge {e} outside the lattice")
    if not region:
        return 0.0
    g = region_rank(state, region)
    return (len(region) - g) * math.log(state.lattice.prime)


@dataclass(frozen=True)
class CmiCertificate:
    """Integer rank data behind one conditional mutual information value."""

    sizes: dict[str, int]
    ranks: dict[str, int]
    coefficient: int  # I / log p


def annulus_cmi_certificate(state: StabilizerState, part: AnnulusPartition) -> tuple[float, CmiCertificate]:
    """I(A:C|B) with the integer rank certificate behind it."""
    regions = {name: part.region_edges(name) for name in ("AB", "BC", "B", "ABC")}
    sizes = {k: len(v) for k, v in regions.items()}
    ranks = {k: region_rank(state, v) for k, v in regions.items()}
    coeff = ranks["B"] + ranks["ABC"] - ranks["AB"] - ranks["BC"]
    size_check = sizes["AB"] + sizes["BC"] - sizes["B"] - sizes["ABC"]
    if size_check != 0:
        raise InvalidGeometry("region sizes are inconsistent (partition overlap?)")
    return coeff * math.log(state.lattice.prime), CmiCertificate(sizes=sizes, ranks=ranks, coefficient=coeff)


def annulus_cmi(state: StabilizerState, part: AnnulusPartition) -> float:
    """I(A:C|B) on the annulus, an exact integer multiple of log p."""
    value, _ = annulus_cmi_certificate(state, part)
    return value


# ---------------------------------------------------------------------------
# reductions: canonical forms, comparisons, dense export


def restricted_canonical(state: StabilizerState, region: tuple[int, ...]):
    """Canonical phased basis of the stabilizer subgroup supported in a region."""
    p = state.lattice.prime
    cols = _outside_columns(state, region)
    coeffs = left_nullspace_mod_p(state.gens[:, cols], p)
    elements = [combine_rows(state.gens, state.phases, c, state.n, p) for c in coeffs]
    return phased_rref(elements, state.n, p)


def pauli_repr(state: StabilizerState, vec: np.ndarray) -> str:
    """Human-readable form of a Pauli vector, e.g. 'X[h(2,3)]^1 Z[v(4,1)]^2'."""
    lat = state.lattice
    E = state.n
    parts = []
    for e in range(E):
        labels = []
        if vec[e]:
            labels.append(f"X^{int(vec[e])}")
        if vec[E + e]:
            labels.append(f"Z^{int(vec[E + e])}")
        if labels:
            mx, my = lat.edge_midpoints[e]
            kind = "h" if my % 2 == 0 else "v"
            parts.append(f"{'.'.join(labels)}[{kind}({mx},{my})]")
    return " ".join(parts) if parts else "I"


def reduction_relation(
    state1: StabilizerState, state2: StabilizerState, region: tuple[int, ...]
) -> tuple[str, str | None]:
    """Relation between two reductions on a region: 'equal', 'orthogonal', or 'overlap'.

    Reductions of stabilizer states with the same restricted group are equal
    iff the phase assignments agree on a basis, and orthogonal otherwise
    (the phase difference is a character of the group, so the cross trace
    sums to zero).  With different restricted groups the decision happens on
    the intersection.  The witness is the first group element whose phases
    disagree.
    """
    k1 = restricted_canonical(state1, region)
    k2 = restricted_canonical(state2, region)
    p = state1.lattice.prime
    n = state1.n
    if len(k1) == len(k2) and all(np.array_equal(a[0], b[0]) for a, b in zip(k1, k2)):
        for (vec, f1), (_, f2) in zip(k1, k2):
            if f1 != f2:
                return "orthogonal", pauli_repr(state1, vec)
        return "equal", None
    # different restricted groups: compare phases on the intersection
    if not k1 or not k2:
        return "overlap", None
    v1 = np.array([v for v, _ in k1], dtype=np.int64)
    v2 = np.array([v for v, _ in k2], dtype=np.int64)
    stacked = np.vstack([v1, v2])
    combos = left_nullspace_mod_p(stacked, p)
    ph1 = np.array([f for _, f in k1], dtype=np.int64)
    ph2 = np.array([f for _, f in k2], dtype=np.int64)
    for combo in combos:
        c, d = combo[: len(k1)], combo[len(k1):]
        vec_a, f_a = combine_rows(v1, ph1, c, n, p)
        _, f_b = combine_rows(v2, ph2, (-d) % p, n, p)
        if f_a != f_b:
            return "orthogonal", pauli_repr(state1, vec_a)
    return "overlap", None


DENSE_GROUP_CAP = 2**16


def region_density(state: StabilizerState, region) -> DensityOperator:
    """Dense export of a reduction: rho_R = p^{-|R|} sum over the restricted group.

    Only regions with p^|R| within the dense operator cap are allowed.
    """
    region = tuple(sorted(set(int(e) for e in region)))
    p = state.lattice.prime
    dim = p ** len(region)
    if dim > 2**14:
        raise DimensionCap(f"p^|R| = {dim} exceeds the dense operator cap")
    basis = restricted_canonical(state, region)
    if p ** len(basis) > DENSE_GROUP_CAP:
        raise DimensionCap("restricted group too large to enumerate")
    E = state.n
    omega = np.exp(2j * np.pi / p)
    xmat = np.zeros((p, p), dtype=complex)
    for j in range(p):
        xmat[(j + 1) % p, j] = 1.0
    zmat = np.diag(omega ** np.arange(p))

    def embed(vec, phase):
        op = np.array([[omega**phase]])
        for e in region:
            local = np.linalg.matrix_power(xmat, int(vec[e])) @ np.linalg.matrix_power(
                zmat, int(vec[E + e])
            )
            op = np.kron(op, local)
        return op

    total = np.zeros((dim, dim), dtype=complex)
    for exps in iproduct(range(p), repeat=len(basis)):
        vec = np.zeros(2 * E, dtype=np.int64)
        phase = 0
        for i, e in enumerate(exps):
            if e:
                v, f = basis[i]
                pv, pf = pauli_pow(v, f, e, E, p)
                vec, phase = pauli_mul(vec, phase, pv, pf, E, p)
        total += embed(vec, phase)
    total /= dim
    space = FactorSpace(tuple((e, p) for e in region))
    return DensityOperator(space, total)


# ---------------------------------------------------------------------------
# sector detectors


def _combine_label_rows(state: StabilizerState, wanted: set) -> tuple[np.ndarray, int]:
    idx = [i for i, lab in enumerate(state.row_labels) if lab in wanted]
    if len(idx) != len(wanted):
        missing = wanted - {state.row_labels[i] for i in idx}
        raise MalformedInput(f"rows not present: {sorted(missing)[:3]}")
    coeffs = np.zeros(len(state.row_labels), dtype=np.int64)
    coeffs[idx] = 1
    return combine_rows(state.gens, state.phases, coeffs, state.n, state.lattice.prime)


def charge_detector(state: StabilizerState, part: AnnulusPartition) -> tuple[np.ndarray, int]:
    """Product of vertex operators over the closed hole: the X-type loop in the
    annulus whose phase reads out the enclosed electric charge."""
    hx0, hy0, hx1, hy1 = part.hole
    wanted = {("vertex", x, y) for x in range(hx0, hx1 + 1) for y in range(hy0, hy1 + 1)}
    if ("vertex", 0, 0) in wanted:
        raise InvalidGeometry("hole touches the dropped corner generator")
    return _combine_label_rows(state, wanted)


def flux_detector(state: StabilizerState, part: AnnulusPartition) -> tuple[np.ndarray, int]:
    """Product of plaquette operators over the hole plus one ring to the
    south-west: the Z-type loop whose phase reads out the enclosed flux.

    The extra ring keeps the loop's support inside the annulus edge set:
    under the half-open box convention the hole owns its own south and west
    perimeter edges.
    """
    hx0, hy0, hx1, hy1 = part.hole
    wanted = {("plaquette", x, y) for x in range(hx0 - 1, hx1) for y in range(hy0 - 1, hy1)}
    return _combine_label_rows(state, wanted)


def sector_witness_phases(state: StabilizerState, part: AnnulusPartition) -> dict[str, int]:
    """Phase exponents of the two enclosing loop operators in this state."""
    abc = set(part.region_edges("ABC"))
    out = {}
    for name, builder in (("charge", charge_detector), ("flux", flux_detector)):
        vec, phase = builder(state, part)
        E = state.n
        support = {e for e in range(E) if vec[e] or vec[E + e]}
        if not support <= abc:
            raise InvalidGeometry(f"{name} detector leaks outside the annulus")
        out[name] = int(phase)
    return out


# ---------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class FusionStringRule:
    """Where property-3 fusion strings run and where their endpoints sit."""

    endpoint: str = "strips"  # or "inside_a_prime"
    vertex_row: int | None = None
    plaquette_row: int | None = None

    def __post_init__(self):
        if self.endpoint not in ("strips", "inside_a_prime"):
            raise MalformedInput("endpoint must be 'strips' or 'inside_a_prime'")


def fusion_string(
    state: StabilizerState, part: AnnulusPartition, s: SectorLabel, rule: FusionStringRule
) -> np.ndarray:
    """Open string for property 3: crosses A radially with both endpoints in
    the removed strips (or, in the documented negative mode, stopping inside
    the retained A')."""
    lat = state.lattice
    p = lat.prime
    hx0, hy0, hx1, hy1 = part.hole
    x_w = hx0 - part.width  # west boundary vertex column of A
    y = rule.vertex_row if rule.vertex_row is not None else (hy0 + hy1) // 2
    py = rule.plaquette_row if rule.plaquette_row is not None else y
    if not (hy0 <= y < hy1 and hy0 <= py < hy1):
        raise InvalidGeometry("fusion string row outside A's vertical extent")
    c, f = s
    t = np.zeros(2 * state.n, dtype=np.int64)
    if rule.endpoint == "strips":
        x_end_v = hx0  # vertex on the hole's west boundary line
        x_end_p = hx0  # first hole plaquette column
    else:
        x_end_v = x_w + 1  # vertex strictly inside A'
        x_end_p = x_w + 1
    # The anyon s must sit at the hole-side end of the string; sector strings
    # carry their anyon at the path start, so this eastward path runs with
    # inverted coefficients to deposit s (not its antiparticle) in the hole.
    if c:
        path = StringPath(tuple((lat.h_edge(x, y), +1) for x in range(x_w, x_end_v)), kind="open")
        t = (t + _string_vector(lat, path, (-c) % p, "z")) % p
    if f:
        path = StringPath(tuple((lat.v_edge(x, py), +1) for x in range(x_w, x_end_p + 1)), kind="open")
        t = (t + _string_vector(lat, path, (-f) % p, "x")) % p
    return t


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    violations: tuple


@dataclass(frozen=True)
class AssumptionsReport:
    distinguishability: PropertyResult
    indistinguishability: PropertyResult
    fusion: PropertyResult

    @property
    def passed(self) -> bool:
        return (
            self.distinguishability.passed
            and self.indistinguishability.passed
            and self.fusion.passed
        )


def verify_assumptions(
    states: dict[SectorLabel, StabilizerState],
    part: AnnulusPartition,
    rule: FusionStringRule | None = None,
) -> AssumptionsReport:
    """Check the three sector-family properties exactly on the annulus.

    1. Global distinguishability: reductions on ABC are pairwise orthogonal.
    2. Local indistinguishability: reductions on AB and on BC are pairwise equal.
    3. Fusion: conjugating sector a by the string for s and reducing to A'BC
       (one thinning step) equals the reduction of sector s x a.
    Violations carry the mismatching group element as a witness.
    """
    p = next(iter(states.values())).lattice.prime
    expected = {(c, f) for c in range(p) for f in range(p)}
    if set(states) != expected:
        raise MalformedInput(f"need all {p * p} sectors, got {len(states)}")
    rule = rule or FusionStringRule()
    order = sorted(states)

    abc = part.region_edges("ABC")
    viol1 = []
    for i, a in enumerate(order):
        for b in order[i + 1:]:
            relation, witness = reduction_relation(states[a], states[b], abc)
            if relation != "orthogonal":
                viol1.append((a, b, relation, witness))
    prop1 = PropertyResult("global_distinguishability", not viol1, tuple(viol1))

    viol2 = []
    for name in ("AB", "BC"):
        region = part.region_edges(name)
        for i, a in enumerate(order):
            for b in order[i + 1:]:
                relation, witness = reduction_relation(states[a], states[b], region)
                if relation != "equal":
                    viol2.append((name, a, b, relation, witness))
    prop2 = PropertyResult("local_indistinguishability", not viol2, tuple(viol2))

    thin = part.thin(1)
    apbc = thin.region_edges("ABC")
    viol3 = []
    for s in order:
        if s == (0, 0):
            continue
        for a in order:
            target = ((s[0] + a[0]) % p, (s[1] + a[1]) % p)
            t = fusion_string(states[a], part, s, rule)
            conjugated = conjugate_by_string(states[a], t)
            relation, witness = reduction_relation(conjugated, states[target], apbc)
            if relation != "equal":
                viol3.append((s, a, relation, witness))
    prop3 = PropertyResult("fusion", not viol3, tuple(viol3))

    return AssumptionsReport(prop1, prop2, prop3)


# ---------------------------------------------------------------------------
# audit trace


def nested_annulus_table(
    states: dict[SectorLabel, StabilizerState], part: AnnulusPartition, n: int
) -> audit.AuditTrace:
    """Table I_i^(a) over nested annuli A_0 BC c ... c A_{n+1} BC = ABC.

    Level i uses the partition thinned n+1-i times (one edge-column per
    side per step); the full partition must be wide enough for n+1 steps.
    """
    if n < 1:
        raise MalformedInput("need n >= 1 intermediate levels")
    if part.a_width - 1 < n + 1:
        raise InsufficientWidth(
            f"A width {part.a_width} allows {part.a_width - 1} thinnings, need {n + 1}"
        )
    base = next(iter(states.values()))
    p = base.lattice.prime
    order = [(c, f) for c in range(p) for f in range(p)]
    if set(states) != set(order):
        raise MalformedInput(f"need all {p * p} sectors")
    table = np.empty((p * p, n + 2))
    for i in range(n + 2):
        level_part = part.thin(n + 1 - i) if i < n + 1 else part
        for row, sec in enumerate(order):
            table[row, i] = annulus_cmi(states[sec], level_part)
    cat = double_zn_category(p)
    dims = quantum_dimensions(cat)
    fp = fusion_probabilities(cat, dims)
    return audit.AuditTrace(
        labels=cat.labels,
        table=table,
        fp=fp,
        p_star=closed_form_fixed_point(dims),
        a0="00",
        provenance="stabilizer_tee",
    )
