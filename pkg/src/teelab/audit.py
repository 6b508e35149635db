"""Replay of the finite-size lower-bound derivation as checkable arithmetic.

An AuditTrace is a table I_i^(a) of conditional mutual informations over
nested annuli (levels i = 0..n+1, labels a), together with the fusion
probabilities and the fixed-point distribution of the underlying anyon
algebra.  Each lemma of the derivation is a separate named check so a
failure localizes the broken premise; assemble_bound replays the whole
chain down to the final inequality

    I_{n+1}^(a0)  >=  log(1/p*_{a0}) - K/sqrt(n),
    K = 1 + (2/pmin^2) log(n_labels/pmin).

Margins below -1e-9 fail; margins in [-1e-9, 0) pass with a
"numerical-floor" annotation.  All arithmetic is in nats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    DegenerateDistribution,
    EpsilonOutOfRange,
    MalformedInput,
    PremiseViolated,
)
from .fusion import AnyonDistribution, FusionProbabilities, bound_constant

MARGIN_TOL = 1e-9

TRACE_SCHEMA = "teelab-trace/v1"


@dataclass(frozen=True)
class AuditTrace:
    """The numeric table consumed by the proof replay."""

    labels: tuple[str, ...]
    table: np.ndarray  # shape (n_labels, n_levels), nats
    fp: FusionProbabilities
    p_star: AnyonDistribution
    a0: str
    provenance: str = "synthetic"

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        object.__setattr__(self, "table", table)
        if table.ndim != 2 or table.shape[0] != len(self.labels):
            raise MalformedInput(f"table shape {table.shape} does not match {len(self.labels)} labels")
        if table.shape[1] < 3:
            raise MalformedInput("need at least 3 levels (n >= 1)")
        if float(table.min()) < -MARGIN_TOL:
            raise MalformedInput(f"negative conditional mutual information {table.min():g} in table")
        if tuple(self.fp.labels) != tuple(self.labels) or tuple(self.p_star.labels) != tuple(self.labels):
            raise MalformedInput("fusion probabilities / fixed point labels do not match the trace")
        if self.a0 not in self.labels:
            raise MalformedInput(f"base label {self.a0!r} not in trace labels")
        if float(self.p_star.probs.min()) <= 0.0:
            raise DegenerateDistribution("trace fixed point must be strictly positive")
        table.setflags(write=False)

    @property
    def n_levels(self) -> int:
        return int(self.table.shape[1])

    @property
    def n(self) -> int:
        """Number of intermediate levels: levels = n + 2."""
        return self.n_levels - 2

    @property
    def p_min(self) -> float:
        return float(self.p_star.probs.min())

    def level(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n_levels:
            raise MalformedInput(f"level {i} outside 0..{self.n_levels - 1}")
        return self.table[:, i]


def _annotate(margin: float) -> tuple[bool, str]:
    if margin >= 0.0:
        return True, "ok"
    if margin >= -MARGIN_TOL:
        return True, "numerical-floor"
    return False, "violated"


# ---------------------------------------------------------------------------
# individual lemma checks


def check_mixture_entropy_bound(trace: AuditTrace, level: int, p: AnyonDistribution) -> float:
    """Margin of  sum_a p_a I_i^(a) >= H(p)  at one level."""
    if tuple(p.labels) != trace.labels:
        raise MalformedInput("distribution labels do not match the trace")
    return float(p.probs @ trace.level(level) - p.entropy())


def mixed_step_distribution(trace: AuditTrace, p: AnyonDistribution, s: str) -> AnyonDistribution:
    """p_{a,s} = sum_b p_b fp[s,b,a]: distribution after fusing a p-sample with s."""
    si = trace.fp.index(s)
    out = np.einsum("b,ba->a", p.probs, trace.fp.p[si])
    return AnyonDistribution(trace.labels, out / out.sum())


def check_fusion_step(trace: AuditTrace, level: int, p: AnyonDistribution, s: str) -> float:
    """Margin of the step inequality between levels i and i+1:

    sum_a p_a I_{i+1}^(a) - H(p)  >=  sum_a p_{a,s} I_i^(a) - H(p_{a,s}).
    """
    if level + 1 >= trace.n_levels:
        raise MalformedInput(f"no level pair {level} -> {level + 1}")
    p_as = mixed_step_distribution(trace, p, s)
    lhs = float(p.probs @ trace.level(level + 1) - p.entropy())
    rhs = float(p_as.probs @ trace.level(level) - p_as.entropy())
    return lhs - rhs


def check_monotonicity(trace: AuditTrace) -> float:
    """Worst margin of  I_{i+1}^(a) >= I_i^(a)  over all labels and level pairs."""
    diffs = trace.table[:, 1:] - trace.table[:, :-1]
    return float(diffs.min())


def check_average_level_bound(trace: AuditTrace, level: int, b: str) -> float:
    """Margin of  I_{i+1}^(b) >= sum_a p*_a I_i^(a) - log n_labels."""
    if level + 1 >= trace.n_levels:
        raise MalformedInput(f"no level pair {level} -> {level + 1}")
    bi = trace.labels.index(b)
    rhs = float(trace.p_star.probs @ trace.level(level)) - math.log(len(trace.labels))
    return float(trace.table[bi, level + 1]) - rhs


def check_perturbed_step_bound(trace: AuditTrace, level: int, b: str, c: str, eps: float) -> float:
    """Margin of the two-label perturbation bound at one level:

    sum_a p*_a (I_{i+1}^(a) - I_i^(a))
        >=  eps pmin [I_i^(c) - I_i^(b) + log(p*_c/p*_b)] - 2 eps^2,

    valid for |eps| <= pmin/2.
    """
    pmin = trace.p_min
    if abs(eps) > pmin / 2 + 1e-15:
        raise EpsilonOutOfRange(f"|eps| = {abs(eps):g} exceeds pmin/2 = {pmin / 2:g}")
    if level + 1 >= trace.n_levels:
        raise MalformedInput(f"no level pair {level} -> {level + 1}")
    bi, ci = trace.labels.index(b), trace.labels.index(c)
    lhs = float(trace.p_star.probs @ (trace.level(level + 1) - trace.level(level)))
    bracket = (
        float(trace.table[ci, level] - trace.table[bi, level])
        + math.log(trace.p_star.probs[ci] / trace.p_star.probs[bi])
    )
    rhs = eps * pmin * bracket - 2.0 * eps**2
    return lhs - rhs


def _delta(trace: AuditTrace, level: int, b: str) -> float:
    """delta_i^(b) = sum_a p*_a [I_i^(a) - I_i^(b) + log(p*_a/p*_b)]."""
    bi = trace.labels.index(b)
    ps = trace.p_star.probs
    return float(
        ps @ (trace.level(level) - trace.table[bi, level] + np.log(ps) - math.log(ps[bi]))
    )


# ---------------------------------------------------------------------------
# full chain replay


@dataclass
class AuditReport:
    """Per-lemma margins plus the assembled final inequality."""

    provenance: str
    labels: tuple[str, ...]
    n: int
    b: str
    eps: float
    alpha: float
    K: float
    p_min: float
    checks: dict = field(default_factory=dict)
    not_evaluated: list = field(default_factory=list)
    passed: bool = False

    def record(self, name: str, margin: float, extra: Mapping | None = None) -> bool:
        ok, note = _annotate(margin)
        entry = {"margin": margin, "passed": ok, "note": note}
        if extra:
            entry.update(extra)
        self.checks[name] = entry
        return ok

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "labels": list(self.labels),
            "n": self.n,
            "base_label": self.b,
            "eps": self.eps,
            "alpha": self.alpha,
            "K": self.K,
            "p_min": self.p_min,
            "checks": self.checks,
            "not_evaluated": list(self.not_evaluated),
            "passed": self.passed,
        }


_CHAIN_NAMES = (
    "average_step_bounds",
    "chain_sum",
    "chain_into_average_bound",
    "level_floor_bounds",
    "alpha_combination",
    "final_bound",
)


def assemble_bound(
    trace: AuditTrace,
    b: str | None = None,
    eps: float | None = None,
    alpha: float | None = None,
) -> AuditReport:
    """Replay the whole derivation on a trace and report every margin.

    Premise lemmas (monotonicity, the per-level mixture-entropy bound at the
    fixed point, the averaged level bound, and the perturbed step bound on
    the full label grid) are checked first; the first failure raises
    PremiseViolated carrying the partial report.  The chain is then summed
    into the final inequality I_{n+1}^(b) >= log(1/p*_b) - K/sqrt(n).

    eps defaults to pmin/(2 sqrt(n)) and alpha to 1/(n pmin eps + 1); both
    can be overridden to explore tightness.
    """
    n = trace.n
    if n < 1:
        raise MalformedInput("trace needs n >= 1 intermediate levels")
    b = trace.a0 if b is None else b
    if b not in trace.labels:
        raise MalformedInput(f"label {b!r} not in trace")
    pmin = trace.p_min
    if eps is None:
        eps = pmin / (2.0 * math.sqrt(n))
    if abs(eps) > pmin / 2 + 1e-15:
        raise EpsilonOutOfRange(f"|eps| = {abs(eps):g} exceeds pmin/2 = {pmin / 2:g}")
    if alpha is None:
        alpha = 1.0 / (n * pmin * eps + 1.0)
    K = bound_constant(trace.p_star)
    report = AuditReport(
        provenance=trace.provenance,
        labels=trace.labels,
        n=n,
        b=b,
        eps=eps,
        alpha=alpha,
        K=K,
        p_min=pmin,
    )

    def premise(name: str, margin: float, extra=None):
        if not report.record(name, margin, extra):
            report.not_evaluated = [k for k in _CHAIN_NAMES if k not in report.checks]
            raise PremiseViolated(f"premise {name} fails with margin {margin:g}", report=report)

    premise("monotonicity", check_monotonicity(trace))

    mixture_margins = [check_mixture_entropy_bound(trace, i, trace.p_star) for i in range(trace.n_levels)]
    premise("mixture_entropy_bound", min(mixture_margins), {"per_level": mixture_margins})

    avg_margins = {
        f"{i}->{i + 1}:{lab}": check_average_level_bound(trace, i, lab)
        for i in range(trace.n_levels - 1)
        for lab in trace.labels
    }
    premise("average_level_bound", min(avg_margins.values()), {"worst_case": min(avg_margins, key=avg_margins.get)})

    perturbed = {
        f"{i}:{lb}->{lc}": check_perturbed_step_bound(trace, i, lb, lc, eps)
        for i in range(n)
        for lb in trace.labels
        for lc in trace.labels
    }
    premise("perturbed_step_bound", min(perturbed.values()), {"worst_case": min(perturbed, key=perturbed.get)})

    # chain arithmetic
    ps = trace.p_star.probs
    bi = trace.labels.index(b)
    deltas = [_delta(trace, i, b) for i in range(n)]

    # averaged steps: sum_a p*_a (I_{i+1} - I_i) >= eps pmin delta_i - 2 eps^2
    step_margins = [
        float(ps @ (trace.level(i + 1) - trace.level(i))) - (eps * pmin * deltas[i] - 2.0 * eps**2)
        for i in range(n)
    ]
    report.record("average_step_bounds", min(step_margins), {"per_level": step_margins})

    # summed chain: sum_a p*_a I_n^(a) >= sum_i (eps pmin delta_i - 2 eps^2)
    chain_rhs = sum(eps * pmin * d - 2.0 * eps**2 for d in deltas)
    chain_margin = float(ps @ trace.level(n)) - chain_rhs
    report.record("chain_sum", chain_margin, {"rhs": chain_rhs})

    # substitute into the averaged level bound at i = n:
    # I_{n+1}^(b) >= chain_rhs - log n_labels
    sub_margin = float(trace.table[bi, n + 1]) - (chain_rhs - math.log(len(trace.labels)))
    report.record("chain_into_average_bound", sub_margin)

    # per-level floors: I_{n+1}^(b) >= log(1/p*_b) - delta_i
    floor_margins = [
        float(trace.table[bi, n + 1]) - (math.log(1.0 / ps[bi]) - deltas[i]) for i in range(n)
    ]
    report.record("level_floor_bounds", min(floor_margins), {"per_level": floor_margins})

    # alpha combination: I_{n+1}^(b) >= log(1/p*_b) - alpha [2 n eps^2 + log(n_labels/p*_b)]
    combo_rhs = math.log(1.0 / ps[bi]) - alpha * (2.0 * n * eps**2 + math.log(len(trace.labels) / ps[bi]))
    report.record("alpha_combination", float(trace.table[bi, n + 1]) - combo_rhs, {"rhs": combo_rhs})

    # final: I_{n+1}^(b) >= log(1/p*_b) - K/sqrt(n)
    final_rhs = math.log(1.0 / ps[bi]) - K / math.sqrt(n)
    report.record("final_bound", float(trace.table[bi, n + 1]) - final_rhs, {"rhs": final_rhs})

    report.passed = all(entry["passed"] for entry in report.checks.values())
    return report


# ---------------------------------------------------------------------------
# Taylor / concavity sweep


@dataclass(frozen=True)
class TaylorSweepReport:
    """Worst margins of the entropy perturbation bounds over a grid."""

    worst_taylor: float
    worst_concavity: float
    worst_combined: float
    evaluations: int
    passed: bool
    worst_case: tuple[str, str, float]


def taylor_bound_sweep(
    p_star: AnyonDistribution,
    fp: FusionProbabilities,
    trials: int = 0,
    eps_points: int = 41,
    seed: int = 0,
) -> TaylorSweepReport:
    """Sweep the first-order entropy bounds over all label pairs and an eps grid.

    For p = p* + eps(delta_b - delta_c) with |eps| <= pmin/2, checks

      Taylor:     H(p) >= H(p*) + eps log(p*_c/p*_b) - 2 eps^2 / pmin
      concavity:  sum_s p*_s H(p_{.,s}) <= H(p*)
      combined:   H(p) - sum_s p*_s H(p_{.,s}) >= eps log(p*_c/p*_b) - 2 eps^2 / pmin

    where p_{a,s} = sum_b p_b fp[s,b,a].  `trials` adds seeded random eps
    values per pair on top of the uniform grid.
    """
    if tuple(p_star.labels) != tuple(fp.labels):
        raise MalformedInput("labels do not match")
    probs = p_star.probs
    if float(probs.min()) <= 0.0:
        raise DegenerateDistribution("sweep needs a strictly positive fixed point")
    pmin = float(probs.min())
    h_star = p_star.entropy()
    grid = list(np.linspace(-pmin / 2, pmin / 2, eps_points))
    if trials:
        rng = np.random.default_rng(seed)
        grid += list(rng.uniform(-pmin / 2, pmin / 2, size=trials))

    def shannon(v: np.ndarray) -> float:
        w = v[v > 0]
        return float(-(w * np.log(w)).sum())

    worst_taylor = worst_conc = worst_comb = math.inf
    worst_case = ("", "", 0.0)
    count = 0
    labels = fp.labels
    for bi, lb in enumerate(labels):
        for ci, lc in enumerate(labels):
            base_log = math.log(probs[ci] / probs[bi])
            for eps in grid:
                p = probs.copy()
                p[bi] += eps
                p[ci] -= eps
                h_p = shannon(p)
                # p_{a,s} for every s at once: mixed[s, a] = sum_b p_b fp[s, b, a]
                mixed = np.einsum("b,sba->sa", p, fp.p)
                h_mixed = float(sum(probs[s] * shannon(mixed[s]) for s in range(len(labels))))
                taylor = h_p - (h_star + eps * base_log - 2.0 * eps**2 / pmin)
                conc = h_star - h_mixed
                comb = (h_p - h_mixed) - (eps * base_log - 2.0 * eps**2 / pmin)
                count += 1
                if min(taylor, conc, comb) < min(worst_taylor, worst_conc, worst_comb):
                    worst_case = (lb, lc, float(eps))
                worst_taylor = min(worst_taylor, taylor)
                worst_conc = min(worst_conc, conc)
                worst_comb = min(worst_comb, comb)
    passed = min(worst_taylor, worst_conc, worst_comb) >= -MARGIN_TOL
    return TaylorSweepReport(
        worst_taylor=worst_taylor,
        worst_concavity=worst_conc,
        worst_combined=worst_comb,
        evaluations=count,
        passed=passed,
        worst_case=worst_case,
    )


# ---------------------------------------------------------------------------
# trace persistence


def save_trace(trace: AuditTrace, path) -> None:
    """Write a trace as versioned JSON."""
    doc = {
        "schema": TRACE_SCHEMA,
        "labels": list(trace.labels),
        "a0": trace.a0,
        "provenance": trace.provenance,
        "I": trace.table.tolist(),
        "fusion_probabilities": trace.fp.p.tolist(),
        "p_star": trace.p_star.probs.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_trace(source) -> AuditTrace:
    """Read a trace from a JSON file path or a parsed document."""
    if isinstance(source, Mapping):
        doc = source
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedInput(f"cannot read trace {path}: {exc}") from exc
    required = {"labels", "a0", "I", "fusion_probabilities", "p_star"}
    missing = required - set(doc)
    if missing:
        raise MalformedInput(f"trace document misses fields {sorted(missing)}")
    labels = tuple(str(x) for x in doc["labels"])
    p = np.asarray(doc["fusion_probabilities"], dtype=float)
    n = len(labels)
    if p.shape != (n, n, n):
        raise MalformedInput(f"fusion probability shape {p.shape}, expected {(n, n, n)}")
    rows = float(np.abs(p.sum(axis=2) - 1.0).max())
    if rows > 1e-9:
        raise MalformedInput(f"trace fusion probabilities not normalized (off by {rows:g})")
    fp = FusionProbabilities(labels=labels, p=p, row_sum_residual=rows)
    return AuditTrace(
        labels=labels,
        table=np.asarray(doc["I"], dtype=float),
        fp=fp,
        p_star=AnyonDistribution(labels, np.asarray(doc["p_star"], dtype=float)),
        a0=str(doc["a0"]),
        provenance=str(doc.get("provenance", "synthetic")),
    )
