"""Charts, tensor fields as expression grids, and structure-axiom validation.

A chart is a single coordinate patch: ordered coordinate names, optional
strict-inequality domain constraints, and optionally a distinguished
coordinate ``t`` for which the structure form is ``scale * dt``.  Tensor
fields store one expression per component; all evaluation is pointwise and
pure, so fields are safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .expressions import (
    FUNCTIONS,
    BinOp,
    EvaluationDomainError,
    ExpressionNode,
    Num,
    Var,
    evaluate,
    evaluate_jet2,
    free_variables,
    parse_expression,
    rename_variables,
    to_source,
)

SPD_EIGENVALUE_FLOOR = 1e-10


class ChartError(ValueError):
    """Inconsistent chart or tensor declaration."""


class SamplingError(RuntimeError):
    """Rejection sampling failed to hit the declared domain."""


class SlotKindError(ValueError):
    """Index operation applied to a slot of the wrong variance."""


class SampleEvaluationError(RuntimeError):
    """Evaluation failed at a specific sample; carries the sample."""

    def __init__(self, sample: "PointSample", cause: Exception):
        super().__init__(f"evaluation failed at sample {sample.coords}: {cause}")
        self.sample = sample
        self.cause = cause


# ---------------------------------------------------------------------------
# Charts and domain constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    """A strict inequality on the chart, stored as ``positive > 0``."""

    positive: ExpressionNode

    @classmethod
    def from_source(cls, src: str, coords: Sequence[str]) -> "Constraint":
        """Parse ``"a > b"``, ``"a < b"`` or a bare positive expression."""
        if ">" in src:
            lhs, rhs = src.split(">", 1)
            return cls(_difference(lhs, rhs, coords))
        if "<" in src:
            lhs, rhs = src.split("<", 1)
            return cls(_difference(rhs, lhs, coords))
        return cls(parse_expression(src, coords))

    def source(self) -> str:
        return f"{to_source(self.positive)} > 0"

    def holds(self, point, index) -> bool:
        try:
            return evaluate(self.positive, point, index) > 0.0
        except EvaluationDomainError:
            return False


def _difference(lhs: str, rhs: str, coords: Sequence[str]) -> ExpressionNode:
    left = parse_expression(lhs, coords)
    right = parse_expression(rhs, coords)
    if right == Num(0.0):
        return left
    return BinOp("-", left, right)


@dataclass(frozen=True)
class Chart:
    coords: tuple[str, ...]
    constraints: tuple[Constraint, ...] = ()
    adapted_index: int | None = None

    def __post_init__(self) -> None:
        if len(set(self.coords)) != len(self.coords):
            raise ChartError(f"duplicate coordinate names in {self.coords}")
        for name in self.coords:
            if name in FUNCTIONS:
                raise ChartError(f"coordinate name {name!r} shadows a function")
        if self.adapted_index is not None and not 0 <= self.adapted_index < len(self.coords):
            raise ChartError(f"adapted index {self.adapted_index} out of range")
        for c in self.constraints:
            unknown = free_variables(c.positive) - set(self.coords)
            if unknown:
                raise ChartError(f"constraint uses unknown coordinates {sorted(unknown)}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @cached_property
    def coord_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.coords)}

    @property
    def adapted_name(self) -> str | None:
        return None if self.adapted_index is None else self.coords[self.adapted_index]

    def index_of(self, name: str) -> int:
        try:
            return self.coord_index[name]
        except KeyError as exc:
            raise ChartError(f"no coordinate {name!r} in chart {self.coords}") from exc

    def satisfies(self, point) -> bool:
        return all(c.holds(point, self.coord_index) for c in self.constraints)


# ---------------------------------------------------------------------------
# Tensor fields
# ---------------------------------------------------------------------------

def _freeze_grid(grid, rank: int):
    if rank == 0:
        return grid
    return tuple(_freeze_grid(entry, rank - 1) for entry in grid)


@dataclass(frozen=True)
class TensorField:
    """A tensor field given componentwise by expressions over one chart.

    Component axes are ordered contravariant slots first, covariant slots
    last; e.g. an affinor ``A`` is stored as ``A[i][j] = A^i_j``.
    """

    chart: Chart
    upper: int
    lower: int
    components: tuple

    @property
    def rank(self) -> int:
        return self.upper + self.lower

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.chart.dim,) * self.rank

    @classmethod
    def build(cls, chart: Chart, upper: int, lower: int, grid) -> "TensorField":
        """Build from a nested sequence of expression trees or source strings."""
        rank = upper + lower
        parsed = _parse_grid(grid, rank, chart)
        tf = cls(chart, upper, lower, _freeze_grid(parsed, rank))
        tf._check_shape()
        return tf

    def _check_shape(self) -> None:
        n = self.chart.dim

        def walk(grid, depth):
            if depth == 0:
                for name in free_variables(grid):
                    if name not in self.chart.coord_index:
                        raise ChartError(f"component references unknown coordinate {name!r}")
                return
            if len(grid) != n:
                raise ChartError(f"component grid has length {len(grid)}, expected {n}")
            for entry in grid:
                walk(entry, depth - 1)

        walk(self.components, self.rank)

    def component(self, idx: tuple[int, ...]) -> ExpressionNode:
        node = self.components
        for i in idx:
            node = node[i]
        return node

    def evaluate(self, point) -> np.ndarray:
        out = np.empty(self.shape)
        index = self.chart.coord_index
        for idx in np.ndindex(*self.shape):
            out[idx] = evaluate(self.component(idx), point, index)
        return out

    def evaluate_with_grads(self, point):
        n = self.chart.dim
        vals = np.empty(self.shape)
        grads = np.empty(self.shape + (n,))
        index = self.chart.coord_index
        for idx in np.ndindex(*self.shape):
            jet = evaluate_jet2(self.component(idx), point, index)
            vals[idx] = jet.value
            grads[idx] = jet.grad
        return vals, grads

    def evaluate_with_jets(self, point):
        n = self.chart.dim
        vals = np.empty(self.shape)
        grads = np.empty(self.shape + (n,))
        hesses = np.empty(self.shape + (n, n))
        index = self.chart.coord_index
        for idx in np.ndindex(*self.shape):
            jet = evaluate_jet2(self.component(idx), point, index)
            vals[idx] = jet.value
            grads[idx] = jet.grad
            hesses[idx] = jet.hess
        return vals, grads, hesses

    def renamed_grid(self, mapping: dict[str, str]):
        """The component grid with variables renamed (for lifting into blocks)."""

        def walk(grid, depth):
            if depth == 0:
                return rename_variables(grid, mapping)
            return tuple(walk(entry, depth - 1) for entry in grid)

        return walk(self.components, self.rank)


def _parse_grid(grid, rank: int, chart: Chart):
    if rank == 0:
        if isinstance(grid, str):
            return parse_expression(grid, chart.coords)
        if isinstance(grid, (int, float)):
            return Num(float(grid))
        return grid
    return [_parse_grid(entry, rank - 1, chart) for entry in grid]


def column_field(affinor: TensorField, j: int) -> TensorField:
    """The vector field ``affinor(e_j)`` (the j-th column) as a (1,0) field."""
    if (affinor.upper, affinor.lower) != (1, 1):
        raise ChartError("column_field takes a (1,1) affinor")
    return TensorField(affinor.chart, 1, 0, tuple(row[j] for row in affinor.components))


# ---------------------------------------------------------------------------
# Structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContactStructure:
    """A chart together with the four structure tensors (g, phi, xi, eta)."""

    name: str
    chart: Chart
    metric: TensorField
    phi: TensorField
    xi: TensorField
    eta: TensorField

    def __post_init__(self) -> None:
        expected = {
            "metric": (0, 2),
            "phi": (1, 1),
            "xi": (1, 0),
            "eta": (0, 1),
        }
        for attr, (up, low) in expected.items():
            tf: TensorField = getattr(self, attr)
            if (tf.upper, tf.lower) != (up, low):
                raise ChartError(f"{attr} must have valence {(up, low)}")
            if tf.chart != self.chart:
                raise ChartError(f"{attr} is defined over a different chart")

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def eta_scale(self) -> float:
        """Expected constant in ``eta = scale * dt`` on an adapted chart."""
        return 1.0

    def values_at(self, point):
        """Evaluate (g, phi, xi, eta) at a point."""
        return (
            self.metric.evaluate(point),
            self.phi.evaluate(point),
            self.xi.evaluate(point),
            self.eta.evaluate(point),
        )


@dataclass(frozen=True)
class CellDefinition(ContactStructure):
    """A 3-dimensional almost contact metric chart: the sewing building block."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.chart.dim != 3:
            raise ChartError(f"a cell is 3-dimensional, got dimension {self.chart.dim}")


# ---------------------------------------------------------------------------
# Seeded point sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointSample:
    coords: tuple[float, ...]
    seed: int
    draw: int

    def array(self) -> np.ndarray:
        return np.asarray(self.coords)


DEFAULT_BOX = (-1.0, 1.0)
POSITIVE_BOX = (0.1, 2.1)
_MAX_REJECTIONS = 10_000


def sampling_box(chart: Chart, overrides: dict[str, tuple[float, float]] | None = None) -> list[tuple[float, float]]:
    """Per-coordinate sampling intervals.

    Defaults to [-1, 1]; a coordinate constrained by a bare ``name > 0``
    constraint is shifted to (0.1, 2.1).  ``overrides`` wins for its keys.
    """
    box = {name: DEFAULT_BOX for name in chart.coords}
    for c in chart.constraints:
        if isinstance(c.positive, Var):
            box[c.positive.name] = POSITIVE_BOX
    if overrides:
        for name, interval in overrides.items():
            if name not in box:
                raise ChartError(f"box override for unknown coordinate {name!r}")
            box[name] = interval
    return [box[name] for name in chart.coords]


def sample_points(
    chart: Chart,
    count: int,
    seed: int,
    box: dict[str, tuple[float, float]] | None = None,
) -> list[PointSample]:
    """Draw ``count`` in-domain points, deterministically for a fixed seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    intervals = sampling_box(chart, box)
    rng = np.random.default_rng(seed)
    samples: list[PointSample] = []
    draw = 0
    for _ in range(count):
        for _ in range(_MAX_REJECTIONS):
            point = tuple(float(rng.uniform(lo, hi)) for lo, hi in intervals)
            draw += 1
            if chart.satisfies(point):
                samples.append(PointSample(point, seed, draw - 1))
                break
        else:
            raise SamplingError(
                f"no in-domain point after {_MAX_REJECTIONS} draws; tighten the sampling box"
            )
    return samples


def sample_points_grouped(
    chart: Chart,
    groups: int,
    per_group: int,
    seed: int,
    box: dict[str, tuple[float, float]] | None = None,
) -> list[PointSample]:
    """Samples organised into groups sharing the adapted-coordinate value.

    Members of a group differ only in the non-adapted coordinates, which is
    what alignment checks along the structure form need.
    """
    if chart.adapted_index is None:
        raise ChartError("grouped sampling needs an adapted chart")
    if groups < 1 or per_group < 1:
        raise ValueError("groups and per_group must be >= 1")
    t_axis = chart.adapted_index
    intervals = sampling_box(chart, box)
    rng = np.random.default_rng(seed)
    samples: list[PointSample] = []
    draw = 0
    for _ in range(groups):
        t_value: float | None = None
        for _ in range(per_group):
            for _ in range(_MAX_REJECTIONS):
                point = [float(rng.uniform(lo, hi)) for lo, hi in intervals]
                draw += 1
                if t_value is not None:
                    point[t_axis] = t_value
                if chart.satisfies(point):
                    if t_value is None:
                        t_value = point[t_axis]
                    samples.append(PointSample(tuple(point), seed, draw - 1))
                    break
            else:
                raise SamplingError(
                    f"no in-domain point after {_MAX_REJECTIONS} draws; tighten the sampling box"
                )
    return samples


# ---------------------------------------------------------------------------
# Axiom validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        note = f"  ({self.note})" if self.note else ""
        return f"{status}  {self.name:<36} residual {self.residual:11.3e}  tol {self.tolerance:8.1e}{note}"


@dataclass(frozen=True)
class ValidationReport:
    subject: str
    sample_count: int
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def format_table(self) -> str:
        header = f"{self.subject}  ({self.sample_count} samples)"
        return "\n".join([header] + [c.line() for c in self.checks])


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def validate_structure(struct: ContactStructure, samples: Sequence[PointSample], tol: float) -> ValidationReport:
    """Check the structure axioms at every sample.

    Residuals reported (max over samples): ``phi^2 + Id - xi (x) eta``,
    ``|eta(xi) - 1|``, the metric compatibility defect
    ``phi^T g phi - g + eta (x) eta``, positive definiteness of g, and
    ``d eta``.  On an adapted chart, eta is additionally required to equal
    ``scale * dt`` componentwise.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    n = struct.dim
    r_phi2 = r_eta_xi = r_compat = r_deta = r_adapted = 0.0
    min_eig = math.inf
    cholesky_ok = True
    scale = struct.eta_scale
    t_axis = struct.chart.adapted_index
    for sample in samples:
        point = sample.array()
        try:
            g = struct.metric.evaluate(point)
            p = struct.phi.evaluate(point)
            xi = struct.xi.evaluate(point)
            eta_vals, eta_grads = struct.eta.evaluate_with_grads(point)
        except EvaluationDomainError as exc:
            raise SampleEvaluationError(sample, exc) from exc
        r_phi2 = max(r_phi2, _max_abs(p @ p + np.eye(n) - np.outer(xi, eta_vals)))
        r_eta_xi = max(r_eta_xi, abs(float(eta_vals @ xi) - 1.0))
        r_compat = max(r_compat, _max_abs(p.T @ g @ p - g + np.outer(eta_vals, eta_vals)))
        d_eta = eta_grads.T - eta_grads  # (d eta)_{ij} = d_i eta_j - d_j eta_i
        r_deta = max(r_deta, _max_abs(d_eta))
        eigs = np.linalg.eigvalsh(g)
        min_eig = min(min_eig, float(eigs[0]))
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            cholesky_ok = False
        if t_axis is not None:
            expected = np.zeros(n)
            expected[t_axis] = scale
            r_adapted = max(r_adapted, _max_abs(eta_vals - expected))

    spd_ok = cholesky_ok and min_eig >= SPD_EIGENVALUE_FLOOR
    checks = [
        CheckResult("metric_positive_definite", max(0.0, SPD_EIGENVALUE_FLOOR - min_eig), 0.0, spd_ok,
                    note=f"min eigenvalue {min_eig:.3e}"),
        CheckResult("phi_square_identity", r_phi2, tol, r_phi2 <= tol),
        CheckResult("eta_of_xi", r_eta_xi, tol, r_eta_xi <= tol),
        CheckResult("metric_compatibility", r_compat, tol, r_compat <= tol),
        CheckResult("eta_closed", r_deta, tol, r_deta <= tol),
    ]
    if t_axis is not None:
        checks.append(
            CheckResult("eta_adapted_component", r_adapted, tol, r_adapted <= tol,
                        note=f"eta = {scale:g} * d{struct.chart.coords[t_axis]}")
        )
    return ValidationReport(struct.name, len(samples), tuple(checks))


validate_cell = validate_structure


def fundamental_form(struct: ContactStructure, point) -> np.ndarray:
    """The 2-form ``Phi_ij = g_ik phi^k_j`` at a point (antisymmetric)."""
    g = struct.metric.evaluate(point)
    p = struct.phi.evaluate(point)
    return g @ p


# ---------------------------------------------------------------------------
# Pointwise index gymnastics
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PointTensor:
    """Numeric tensor values at one point with per-slot variance kinds."""

    values: np.ndarray
    kinds: tuple[str, ...]  # 'u' (contravariant) or 'l' (covariant) per axis

    def __post_init__(self) -> None:
        if self.values.ndim != len(self.kinds):
            raise SlotKindError("kinds must match the array rank")
        for kind in self.kinds:
            if kind not in ("u", "l"):
                raise SlotKindError(f"unknown slot kind {kind!r}")


def tensor_product(a: PointTensor, b: PointTensor) -> PointTensor:
    return PointTensor(np.multiply.outer(a.values, b.values), a.kinds + b.kinds)


def lower_index(t: PointTensor, slot: int, metric_values: np.ndarray) -> PointTensor:
    if t.kinds[slot] != "u":
        raise SlotKindError(f"slot {slot} is not contravariant")
    values = np.moveaxis(np.tensordot(metric_values, t.values, axes=(1, slot)), 0, slot)
    kinds = t.kinds[:slot] + ("l",) + t.kinds[slot + 1:]
    return PointTensor(values, kinds)


def raise_index(t: PointTensor, slot: int, metric_inverse: np.ndarray) -> PointTensor:
    if t.kinds[slot] != "l":
        raise SlotKindError(f"slot {slot} is not covariant")
    values = np.moveaxis(np.tensordot(metric_inverse, t.values, axes=(1, slot)), 0, slot)
    kinds = t.kinds[:slot] + ("u",) + t.kinds[slot + 1:]
    return PointTensor(values, kinds)


def contract(t: PointTensor, upper_slot: int, lower_slot: int) -> PointTensor:
    if t.kinds[upper_slot] != "u":
        raise SlotKindError(f"slot {upper_slot} is not contravariant")
    if t.kinds[lower_slot] != "l":
        raise SlotKindError(f"slot {lower_slot} is not covariant")
    values = np.trace(t.values, axis1=upper_slot, axis2=lower_slot)
    kinds = tuple(kind for i, kind in enumerate(t.kinds) if i not in (upper_slot, lower_slot))
    return PointTensor(values, kinds)
