"""Products of cells, the induced diagonal submanifold, and its verification.

``build_product`` lifts k adapted 3-dimensional cells onto one 3k-dimensional
chart: block-diagonal metric and affinor, one lifted Reeb field and one
pulled-back structure form per factor.  ``sew`` constructs the
(2k+1)-dimensional diagonal submanifold (all distinguished coordinates equal
to a single coordinate ``s``) together with its induced structure tensors,
built symbolically by the substitution ``t_i := s``:

* metric: restriction of the block metric through the linear embedding;
* affinor: block pass-through (the distinguished row of each cell affinor
  vanishes on an adapted chart, so images of embedded fields pull back
  exactly);
* Reeb field: the median ``(xi_1 + ... + xi_k)/sqrt(k)`` expressed in the
  diagonal chart;
* structure form: ``sqrt(k) ds``.

The verifiers sweep seeded sample points and report max residuals:
``verify_f_structure`` (the product affinor axioms), ``verify_lift_laws``
(covariant derivatives and curvature respect the block splitting, and the
distribution spanned by the affinor image and the median is involutive),
``extrinsic_report`` (flat normal connection, Weingarten operators kill the
Reeb field, ambient curvature of the Reeb field restricts to the intrinsic
one), and ``verify_sewing_theorems`` (classification and nullity transfer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .charts import (
    CheckResult,
    Chart,
    Constraint,
    ContactStructure,
    PointSample,
    TensorField,
    ValidationReport,
    column_field,
    sample_points,
    sample_points_grouped,
)
from .expressions import BinOp, ExpressionNode, Num, rename_variables
from .geometry import (
    ALMOST_ALPHA_KENMOTSU,
    ALMOST_COSYMPLECTIC,
    Classification,
    christoffel,
    classify,
    exterior_derivative,
    lie_bracket,
    numeric_rank,
    riemann,
)
from .nullity import (
    RAW,
    Convention,
    GeneralizedNullityReport,
    NullityFit,
    check_generalized,
    fit_nullity,
    kenmotsu_convention,
)

_ADAPTED_PROBE_TOL = 1e-12
_TANGENCY_TOL = 1e-10


class SewingError(ValueError):
    """Cells that cannot be lifted or sewn (non-adapted, wrong dimension, ...)."""


# ---------------------------------------------------------------------------
# Expression plumbing
# ---------------------------------------------------------------------------

def _scaled(node: ExpressionNode, factor: float) -> ExpressionNode:
    if node == Num(0.0) or factor == 1.0:
        return node
    return BinOp("*", Num(factor), node)


def _sum_nodes(nodes: Sequence[ExpressionNode]) -> ExpressionNode:
    return reduce(lambda a, b: BinOp("+", a, b), nodes)


def _suffix_map(cell: ContactStructure, i: int) -> dict[str, str]:
    return {name: f"{name}{i + 1}" for name in cell.chart.coords}


def _diagonal_map(cell: ContactStructure, i: int) -> dict[str, str]:
    mapping = _suffix_map(cell, i)
    mapping[cell.chart.coords[cell.chart.adapted_index]] = "s"
    return mapping


def _require_sewable(cells: Sequence[ContactStructure]) -> None:
    if len(cells) < 2:
        raise SewingError(f"need at least 2 cells, got {len(cells)}")
    for cell in cells:
        if cell.dim != 3:
            raise SewingError(f"cell {cell.name!r} has dimension {cell.dim}, expected 3")
        if cell.chart.adapted_index is None:
            raise SewingError(f"cell {cell.name!r} has no adapted coordinate")
        _probe_adapted_unit(cell)


def _probe_points(chart: Chart, count: int = 3):
    return [s.array() for s in sample_points(chart, count, seed=0)]


def _probe_adapted_unit(cell: ContactStructure) -> None:
    """The structure form must be exactly d(t) for the adapted coordinate."""
    t_axis = cell.chart.adapted_index
    expected = np.zeros(cell.dim)
    expected[t_axis] = 1.0
    for point in _probe_points(cell.chart):
        eta = cell.eta.evaluate(point)
        if float(np.max(np.abs(eta - expected))) > _ADAPTED_PROBE_TOL:
            raise SewingError(
                f"cell {cell.name!r} is not adapted: eta != d{cell.chart.coords[t_axis]}"
            )


# ---------------------------------------------------------------------------
# The cell product
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductDefinition:
    """k lifted cells on one 3k-dimensional chart."""

    cells: tuple[ContactStructure, ...]
    chart: Chart
    metric: TensorField               # block diagonal of the lifted cell metrics
    f: TensorField                    # block diagonal of the lifted cell affinors
    framing: tuple[TensorField, ...]  # lifted Reeb fields, one per cell
    coframing: tuple[TensorField, ...]
    blocks: tuple[tuple[int, ...], ...]       # product coordinate indices per cell
    adapted_positions: tuple[int, ...]        # product index of each cell's t

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    def median(self) -> TensorField:
        """The unit field ``(xi_1 + ... + xi_k)/sqrt(k)``."""
        k = self.cell_count
        scale = 1.0 / math.sqrt(k)
        comps = [Num(0.0)] * self.chart.dim
        for framing in self.framing:
            for pos, node in enumerate(framing.components):
                if node != Num(0.0):
                    comps[pos] = _scaled(node, scale)
        return TensorField(self.chart, 1, 0, tuple(comps))

    def normal_frame(self) -> tuple[TensorField, ...]:
        """Unit fields spanning the complement of the diagonal inside Ker(f).

        The l-th field is proportional to
        ``xi_1 + ... + xi_{l-1} - (l-1) xi_l`` (pairwise orthogonal to each
        other and to the median); each is normalized by the exact constant
        ``1/sqrt(l(l-1))`` per leading term.
        """
        k = self.cell_count
        fields = []
        for l in range(2, k + 1):
            lead = 1.0 / math.sqrt(l * (l - 1))
            coeffs = [lead] * (l - 1) + [-(l - 1) * lead] + [0.0] * (k - l)
            comps = [Num(0.0)] * self.chart.dim
            for j, coeff in enumerate(coeffs):
                if coeff == 0.0:
                    continue
                for pos, node in enumerate(self.framing[j].components):
                    if node != Num(0.0):
                        comps[pos] = _scaled(node, coeff)
            fields.append(TensorField(self.chart, 1, 0, tuple(comps)))
        return tuple(fields)

    def project_point(self, point, cell_index: int) -> np.ndarray:
        return np.asarray(point)[list(self.blocks[cell_index])]


def build_product(cells: Sequence[ContactStructure]) -> ProductDefinition:
    """Lift the cells onto the product chart with block tensors."""
    _require_sewable(cells)
    k = len(cells)
    names: list[str] = []
    for i, cell in enumerate(cells):
        names.extend(_suffix_map(cell, i)[name] for name in cell.chart.coords)
    if len(set(names)) != len(names):
        raise SewingError(f"coordinate name collision after renaming: {names}")
    constraints = _collect_constraints(cells, _suffix_map)
    chart = Chart(tuple(names), constraints, adapted_index=None)

    dim = 3 * k
    metric_grid = [[Num(0.0)] * dim for _ in range(dim)]
    f_grid = [[Num(0.0)] * dim for _ in range(dim)]
    framing: list[TensorField] = []
    coframing: list[TensorField] = []
    blocks: list[tuple[int, ...]] = []
    adapted_positions: list[int] = []
    for i, cell in enumerate(cells):
        base = 3 * i
        blocks.append(tuple(range(base, base + 3)))
        adapted_positions.append(base + cell.chart.adapted_index)
        mapping = _suffix_map(cell, i)
        renamed_metric = cell.metric.renamed_grid(mapping)
        renamed_phi = cell.phi.renamed_grid(mapping)
        for a in range(3):
            for b in range(3):
                metric_grid[base + a][base + b] = renamed_metric[a][b]
                f_grid[base + a][base + b] = renamed_phi[a][b]
        xi_comps = [Num(0.0)] * dim
        eta_comps = [Num(0.0)] * dim
        renamed_xi = cell.xi.renamed_grid(mapping)
        renamed_eta = cell.eta.renamed_grid(mapping)
        for a in range(3):
            xi_comps[base + a] = renamed_xi[a]
            eta_comps[base + a] = renamed_eta[a]
        framing.append(TensorField(chart, 1, 0, tuple(xi_comps)))
        coframing.append(TensorField(chart, 0, 1, tuple(eta_comps)))

    return ProductDefinition(
        cells=tuple(cells),
        chart=chart,
        metric=TensorField(chart, 0, 2, tuple(tuple(row) for row in metric_grid)),
        f=TensorField(chart, 1, 1, tuple(tuple(row) for row in f_grid)),
        framing=tuple(framing),
        coframing=tuple(coframing),
        blocks=tuple(blocks),
        adapted_positions=tuple(adapted_positions),
    )


def _collect_constraints(cells, mapper) -> tuple[Constraint, ...]:
    collected: list[Constraint] = []
    seen: set[str] = set()
    for i, cell in enumerate(cells):
        mapping = mapper(cell, i)
        for constraint in cell.chart.constraints:
            renamed = Constraint(rename_variables(constraint.positive, mapping))
            if renamed.source() not in seen:
                seen.add(renamed.source())
                collected.append(renamed)
    return tuple(collected)


# ---------------------------------------------------------------------------
# Product verification
# ---------------------------------------------------------------------------

def verify_f_structure(product: ProductDefinition, samples: Sequence[PointSample], tol: float) -> ValidationReport:
    """Axioms of the product affinor: f^3 + f = 0, skewness, kernel = framing."""
    k = product.cell_count
    median = product.median()
    r_cubed = r_skew = r_kernel_span = r_framing = r_median = r_dual = r_closed = 0.0
    rank_ok = True
    worst_rank = 2 * k
    for sample in samples:
        point = sample.array()
        g = product.metric.evaluate(point)
        f = product.f.evaluate(point)
        r_cubed = max(r_cubed, float(np.max(np.abs(f @ f @ f + f))))
        r_skew = max(r_skew, float(np.max(np.abs(f.T @ g + g @ f))))
        xi_vals = [tf.evaluate(point) for tf in product.framing]
        eta_vals = [tf.evaluate(point) for tf in product.coframing]
        for xi in xi_vals:
            r_kernel_span = max(r_kernel_span, float(np.max(np.abs(f @ xi))))
        gram = np.array([[xi_a @ g @ xi_b for xi_b in xi_vals] for xi_a in xi_vals])
        r_framing = max(r_framing, float(np.max(np.abs(gram - np.eye(k)))))
        duality = np.array([[eta_a @ xi_b for xi_b in xi_vals] for eta_a in eta_vals])
        r_dual = max(r_dual, float(np.max(np.abs(duality - np.eye(k)))))
        med = median.evaluate(point)
        r_median = max(r_median, abs(float(med @ g @ med) - 1.0))
        for coframe in product.coframing:
            r_closed = max(r_closed, float(np.max(np.abs(exterior_derivative(coframe, point)))))
        rank = numeric_rank(f)
        worst_rank = rank if rank != 2 * k else worst_rank
        rank_ok = rank_ok and rank == 2 * k
    checks = (
        CheckResult("f_cubed_plus_f", r_cubed, tol, r_cubed <= tol),
        CheckResult("f_metric_skew", r_skew, tol, r_skew <= tol),
        CheckResult("f_kills_framing", r_kernel_span, tol, r_kernel_span <= tol),
        CheckResult("kernel_rank", float(abs(worst_rank - 2 * k)), 0.0, rank_ok,
                    note=f"rank {worst_rank}, expected {2 * k} (kernel dimension {k})"),
        CheckResult("framing_orthonormal", r_framing, tol, r_framing <= tol),
        CheckResult("coframing_duality", r_dual, tol, r_dual <= tol),
        CheckResult("coframing_closed", r_closed, tol, r_closed <= tol),
        CheckResult("median_unit_length", r_median, tol, r_median <= tol),
    )
    return ValidationReport(f"f-structure of {len(product.cells)}-cell product", len(samples), checks)


def verify_lift_laws(
    product: ProductDefinition,
    samples: Sequence[PointSample],
    tol: float,
    cross_tol: float | None = None,
) -> ValidationReport:
    """Covariant derivative and curvature respect the block splitting.

    Within a block the product connection coefficients coincide with the
    lifted cell connection; across blocks both the connection and the
    curvature operator vanish; brackets of the affinor-image fields and the
    median stay inside their span.
    """
    if cross_tol is None:
        cross_tol = tol * 0.1
    dim = product.chart.dim
    median = product.median()
    normals = product.normal_frame()
    columns = [column_field(product.f, j) for j in range(dim)]
    r_lift = r_cross_conn = r_cross_curv = r_invol = 0.0
    for sample in samples:
        point = sample.array()
        gamma_bar = christoffel(product.metric, point).gamma
        riem_bar = riemann(product.metric, point).riem
        for i, cell in enumerate(product.cells):
            block = list(product.blocks[i])
            cell_gamma = christoffel(cell.metric, product.project_point(point, i)).gamma
            expected = np.zeros((dim, 3, 3))
            expected[block] = cell_gamma
            actual = gamma_bar[:, block, :][:, :, block]
            r_lift = max(r_lift, float(np.max(np.abs(actual - expected))))
            for j in range(len(product.cells)):
                if j == i:
                    continue
                other = list(product.blocks[j])
                r_cross_conn = max(
                    r_cross_conn, float(np.max(np.abs(gamma_bar[:, block, :][:, :, other])))
                )
                r_cross_curv = max(
                    r_cross_curv, float(np.max(np.abs(riem_bar[:, block, :, :][:, :, other, :])))
                )
        g = product.metric.evaluate(point)
        normal_vals = [tf.evaluate(point) for tf in normals]

        def distribution_residual(bracket: np.ndarray) -> float:
            return max((abs(float(bracket @ g @ u)) for u in normal_vals), default=0.0)

        for a in range(dim):
            for b in range(a + 1, dim):
                r_invol = max(r_invol, distribution_residual(lie_bracket(columns[a], columns[b], point)))
            r_invol = max(r_invol, distribution_residual(lie_bracket(columns[a], median, point)))
    checks = (
        CheckResult("lifted_covariant_derivative", r_lift, tol, r_lift <= tol),
        CheckResult("cross_block_connection", r_cross_conn, cross_tol, r_cross_conn <= cross_tol),
        CheckResult("cross_block_curvature", r_cross_curv, cross_tol, r_cross_curv <= cross_tol),
        CheckResult("image_median_involutive", r_invol, tol, r_invol <= tol),
    )
    return ValidationReport(f"lift laws of {len(product.cells)}-cell product", len(samples), checks)


# ---------------------------------------------------------------------------
# Sewing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SewnManifold(ContactStructure):
    """The diagonal submanifold with its induced structure; eta = sqrt(k) ds."""

    cell_count: int = 0
    sources: tuple[str, ...] = ()

    @property
    def eta_scale(self) -> float:
        return math.sqrt(self.cell_count)


def sew(cells: Sequence[ContactStructure]) -> SewnManifold:
    """Construct the sewn manifold of the given cells symbolically."""
    _require_sewable(cells)
    k = len(cells)
    u_names: list[list[str]] = []
    for i, cell in enumerate(cells):
        mapping = _suffix_map(cell, i)
        u_names.append(
            [mapping[name] for a, name in enumerate(cell.chart.coords) if a != cell.chart.adapted_index]
        )
    names = ("s",) + tuple(name for block in u_names for name in block)
    if len(set(names)) != len(names):
        raise SewingError(f"coordinate name collision after renaming: {names}")
    constraints = _collect_constraints(cells, _diagonal_map)
    chart = Chart(names, constraints, adapted_index=0)
    dim = 2 * k + 1

    _probe_diagonal_consistency(cells)

    # Position of each cell's non-adapted coordinates in the diagonal chart.
    positions: list[dict[int, int]] = []
    cursor = 1
    for i, cell in enumerate(cells):
        local = {}
        for a in range(3):
            if a == cell.chart.adapted_index:
                continue
            local[a] = cursor
            cursor += 1
        positions.append(local)

    metric_grid = [[Num(0.0)] * dim for _ in range(dim)]
    phi_grid = [[Num(0.0)] * dim for _ in range(dim)]
    xi_comps = [Num(0.0)] * dim
    scale = 1.0 / math.sqrt(k)
    ss_terms = []
    for i, cell in enumerate(cells):
        t = cell.chart.adapted_index
        mapping = _diagonal_map(cell, i)
        g = cell.metric.renamed_grid(mapping)
        p = cell.phi.renamed_grid(mapping)
        xi = cell.xi.renamed_grid(mapping)
        ss_terms.append(g[t][t])
        for a, pos_a in positions[i].items():
            metric_grid[0][pos_a] = g[t][a]
            metric_grid[pos_a][0] = g[a][t]
            phi_grid[pos_a][0] = p[a][t]
            xi_comps[pos_a] = _scaled(xi[a], scale)
            for b, pos_b in positions[i].items():
                metric_grid[pos_a][pos_b] = g[a][b]
                phi_grid[pos_a][pos_b] = p[a][b]
    metric_grid[0][0] = _sum_nodes(ss_terms)
    xi_comps[0] = Num(scale)
    eta_comps = [Num(0.0)] * dim
    eta_comps[0] = Num(math.sqrt(k))

    return SewnManifold(
        name="-".join(cell.name for cell in cells),
        chart=chart,
        metric=TensorField(chart, 0, 2, tuple(tuple(row) for row in metric_grid)),
        phi=TensorField(chart, 1, 1, tuple(tuple(row) for row in phi_grid)),
        xi=TensorField(chart, 1, 0, tuple(xi_comps)),
        eta=TensorField(chart, 0, 1, tuple(eta_comps)),
        cell_count=k,
        sources=tuple(cell.name for cell in cells),
    )


def _probe_diagonal_consistency(cells: Sequence[ContactStructure]) -> None:
    """The median must be tangent to the diagonal and the affinor block-exact.

    On an adapted chart this means the distinguished component of the Reeb
    field is 1 and the distinguished row of the affinor vanishes.
    """
    for cell in cells:
        t = cell.chart.adapted_index
        for point in _probe_points(cell.chart):
            xi = cell.xi.evaluate(point)
            if abs(float(xi[t]) - 1.0) > _TANGENCY_TOL:
                raise SewingError(
                    f"cell {cell.name!r}: median tangency fails (xi^t = {xi[t]!r})"
                )
            phi = cell.phi.evaluate(point)
            if float(np.max(np.abs(phi[t]))) > _TANGENCY_TOL:
                raise SewingError(
                    f"cell {cell.name!r}: affinor maps into the distinguished direction"
                )


def embedding_matrix(product: ProductDefinition, sewn: SewnManifold) -> np.ndarray:
    """Constant pushforward matrix of the diagonal chart into the product."""
    e = np.zeros((product.chart.dim, sewn.chart.dim))
    for pos in product.adapted_positions:
        e[pos, 0] = 1.0
    for a, name in enumerate(sewn.chart.coords[1:], start=1):
        e[product.chart.index_of(name), a] = 1.0
    return e


def embed_point(product: ProductDefinition, sewn: SewnManifold, point) -> np.ndarray:
    return embedding_matrix(product, sewn) @ np.asarray(point, dtype=float)


# ---------------------------------------------------------------------------
# Extrinsic geometry of the sewn submanifold
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExtrinsicSample:
    point: PointSample
    second_fundamental: np.ndarray      # [a, b, alpha]: normal components of nabla_a e_b
    weingarten: np.ndarray              # [alpha, a, b]: S_alpha in diagonal-chart coordinates
    normal_connection_residual: float
    s_alpha_xi_norm: float
    curvature_tangency_residual: float
    curvature_match_residual: float


@dataclass(frozen=True)
class ExtrinsicReport:
    subject: str
    samples: tuple[ExtrinsicSample, ...]
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def extrinsic_report(
    cells: Sequence[ContactStructure],
    samples: Sequence[PointSample] | None = None,
    count: int = 25,
    seed: int = 7,
    tol: float = 1e-8,
) -> ExtrinsicReport:
    """Second fundamental form, normal connection and curvature restriction."""
    product = build_product(cells)
    sewn = sew(cells)
    if samples is None:
        samples = sample_points(sewn.chart, count, seed)
    k = product.cell_count
    dim_n = sewn.chart.dim
    e_mat = embedding_matrix(product, sewn)
    median = product.median()
    normals = product.normal_frame()

    out_samples: list[ExtrinsicSample] = []
    r_frame = r_perp = r_dperp = r_weinxi = r_tangency = r_match = 0.0
    for sample in samples:
        p = sample.array()
        q = e_mat @ p
        gamma_bar = christoffel(product.metric, q).gamma
        riem_bar = riemann(product.metric, q).riem
        g = product.metric.evaluate(q)
        xi_bar = median.evaluate(q)
        normal_data = [tf.evaluate_with_grads(q) for tf in normals]
        normal_vals = [vals for vals, _ in normal_data]

        for a, (u_a, _) in enumerate(normal_data):
            r_perp = max(r_perp, float(np.max(np.abs(e_mat.T @ (g @ u_a)))))
            for b, (u_b, _) in enumerate(normal_data):
                gram = float(u_a @ g @ u_b)
                r_frame = max(r_frame, abs(gram - (1.0 if a == b else 0.0)))

        def nabla_along(v: np.ndarray, w_vals: np.ndarray, w_grads: np.ndarray) -> np.ndarray:
            return np.einsum("a,ja->j", v, w_grads) + np.einsum("a,jam,m->j", v, gamma_bar, w_vals)

        def split(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            coeffs = np.array([float(v @ g @ u) for u in normal_vals])
            normal = sum((c * u for c, u in zip(coeffs, normal_vals)), np.zeros_like(v))
            return v - normal, normal

        g_n = e_mat.T @ g @ e_mat
        g_n_inv = np.linalg.inv(g_n)
        second = np.zeros((dim_n, dim_n, k - 1))
        for a in range(dim_n):
            for b in range(dim_n):
                deriv = np.einsum("i,m,jim->j", e_mat[:, a], e_mat[:, b], gamma_bar)
                second[a, b] = [float(deriv @ g @ u) for u in normal_vals]
        weingarten = np.zeros((k - 1, dim_n, dim_n))
        for alpha, (u_vals, u_grads) in enumerate(normal_data):
            for b in range(dim_n):
                deriv = nabla_along(e_mat[:, b], u_vals, u_grads)
                for beta, u_other in enumerate(normal_vals):
                    r_dperp = max(r_dperp, abs(float(deriv @ g @ u_other)))
                tangential, _ = split(deriv)
                weingarten[alpha, :, b] = -(g_n_inv @ (e_mat.T @ (g @ tangential)))
            xi_deriv = nabla_along(xi_bar, u_vals, u_grads)
            tangential, _ = split(xi_deriv)
            r_weinxi = max(r_weinxi, float(np.max(np.abs(tangential))))

        riem_n = riemann(sewn.metric, p).riem
        xi_n = sewn.xi.evaluate(p)
        intrinsic = np.einsum("labm,m->lab", riem_n, xi_n)
        for a in range(dim_n):
            for b in range(a + 1, dim_n):
                ambient = np.einsum("lijm,i,j,m->l", riem_bar, e_mat[:, a], e_mat[:, b], xi_bar)
                tangential, normal = split(ambient)
                r_tangency = max(r_tangency, float(np.max(np.abs(normal))))
                pushed = e_mat @ intrinsic[:, a, b]
                r_match = max(r_match, float(np.max(np.abs(tangential - pushed))))

        out_samples.append(
            ExtrinsicSample(
                point=sample,
                second_fundamental=second,
                weingarten=weingarten,
                normal_connection_residual=r_dperp,
                s_alpha_xi_norm=r_weinxi,
                curvature_tangency_residual=r_tangency,
                curvature_match_residual=r_match,
            )
        )

    checks = (
        CheckResult("normal_frame_orthonormal", r_frame, tol, r_frame <= tol),
        CheckResult("normal_frame_perpendicular", r_perp, tol, r_perp <= tol),
        CheckResult("normal_connection_flat", r_dperp, tol, r_dperp <= tol),
        CheckResult("weingarten_kills_xi", r_weinxi, tol, r_weinxi <= tol),
        CheckResult("curvature_xi_tangent", r_tangency, tol, r_tangency <= tol),
        CheckResult("curvature_restriction_match", r_match, tol, r_match <= tol),
    )
    return ExtrinsicReport(sewn.name, tuple(out_samples), checks)


# ---------------------------------------------------------------------------
# Classification and nullity transfer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NullityTransferRow:
    point: PointSample
    sewn: NullityFit
    cell_kappa: float
    cell_mu: float
    cell_muprime: float
    kappa_defect: float
    mu_defect: float
    muprime_defect: float


@dataclass(frozen=True)
class ConventionComparison:
    """Which h' normalization makes mu' scale by 1/k under sewing."""

    cell_count: int
    alpha_cell: float
    alpha_sewn: float
    cell_raw: tuple[float, float, float]
    cell_normalized: tuple[float, float, float]
    sewn_raw: tuple[float, float, float]
    sewn_normalized: tuple[float, float, float]
    muprime_ratio_raw: float
    muprime_ratio_normalized: float
    reproduces_inverse_k: str  # "kenmotsu", "raw" or "neither"


@dataclass(frozen=True)
class TheoremReport:
    subject: str
    cells_are_copies: bool
    cell_classification: Classification
    sewn_classification: Classification
    checks: tuple[CheckResult, ...]
    nullity_rows: tuple[NullityTransferRow, ...]
    generalized: GeneralizedNullityReport | None
    convention_comparison: ConventionComparison | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _mean_fit(struct: ContactStructure, points, convention: Convention) -> tuple[float, float, float]:
    fits = [fit_nullity(struct, p, convention) for p in points]
    return (
        float(np.mean([f.kappa for f in fits])),
        float(np.mean([f.mu for f in fits])),
        float(np.mean([f.muprime for f in fits])),
    )


def verify_sewing_theorems(
    cells: Sequence[ContactStructure],
    samples: Sequence[PointSample] | None = None,
    tol: float = 1e-8,
    convention: Convention = RAW,
    count: int = 25,
    seed: int = 7,
    require_copies: bool = False,
) -> TheoremReport:
    """Check classification transfer, nullity transfer and the commutation laws.

    Classification: sewn almost cosymplectic cells stay almost cosymplectic,
    and equal-weight alpha-Kenmotsu cells sew to weight ``alpha/sqrt(k)``.
    Nullity (identical cell copies): at every sample with diagonal value s,
    the sewn fit must match the cell fit at the projected point via
    ``kappa -> kappa/k`` and ``mu, mu' -> mu/sqrt(k), mu'/sqrt(k)`` in the raw
    convention, and the fitted functions must be aligned with the structure
    form.  Finally the operators ``P = -kappa phi^2``, ``H1 = mu h``,
    ``H2 = mu' h'`` built from the fitted data must be g-symmetric, commute or
    anticommute with phi as required, commute with each other and kill xi.
    """
    product = build_product(cells)
    sewn = sew(cells)
    k = product.cell_count
    if samples is None:
        per_group = max(2, count // 5)
        samples = sample_points_grouped(sewn.chart, 5, per_group, seed)
    e_mat = embedding_matrix(product, sewn)
    copies = all(_same_definition(cell, cells[0]) for cell in cells[1:])
    if require_copies and not copies:
        raise SewingError("nullity transfer needs identical cell copies")

    cell_points = [
        [product.project_point(e_mat @ s.array(), i) for s in samples] for i in range(k)
    ]
    cell_samples = [
        [PointSample(tuple(float(v) for v in p), s.seed, s.draw) for p, s in zip(pts, samples)]
        for pts in cell_points
    ]
    cell_class = classify(cells[0], cell_samples[0], tol)
    sewn_class = classify(sewn, samples, tol)

    checks: list[CheckResult] = []
    agree = all(
        classify(cell, cell_samples[i], tol).kind == cell_class.kind for i, cell in enumerate(cells)
    )
    checks.append(CheckResult("cell_classifications_agree", 0.0 if agree else 1.0, 0.0, agree,
                              note=cell_class.describe()))
    if cell_class.kind == ALMOST_COSYMPLECTIC:
        ok = sewn_class.kind == ALMOST_COSYMPLECTIC
        checks.append(CheckResult("classification_transfer", 0.0 if ok else 1.0, 0.0, ok,
                                  note=sewn_class.describe()))
    elif cell_class.kind == ALMOST_ALPHA_KENMOTSU:
        expected = cell_class.alpha / math.sqrt(k)
        defect = abs((sewn_class.alpha or math.inf) - expected)
        ok = sewn_class.kind == ALMOST_ALPHA_KENMOTSU and defect <= tol
        checks.append(CheckResult("classification_transfer", defect, tol, ok,
                                  note=f"expected alpha {expected!r}, {sewn_class.describe()}"))
    else:
        checks.append(CheckResult("classification_transfer", sewn_class.fit_residual_max, tol,
                                  sewn_class.fit_residual_max <= tol,
                                  note=f"weight-function cells; {sewn_class.describe()}"))
    checks.append(CheckResult("sewn_weight_fit_residual", sewn_class.fit_residual_max, tol,
                              sewn_class.fit_residual_max <= tol))

    nullity_rows: list[NullityTransferRow] = []
    generalized: GeneralizedNullityReport | None = None
    comparison: ConventionComparison | None = None
    if copies:
        r_kappa = r_mu = r_muprime = r_res = 0.0
        sqrt_k = math.sqrt(k)
        commut = _CommutationResiduals()
        for j, s in enumerate(samples):
            p = s.array()
            sewn_fit = fit_nullity(sewn, p, RAW)
            r_res = max(r_res, sewn_fit.residual)
            cell_fits = [fit_nullity(cells[i], cell_points[i][j], RAW) for i in range(k)]
            for cf in cell_fits:
                r_res = max(r_res, cf.residual)
                r_kappa = max(r_kappa, abs(sewn_fit.kappa - cf.kappa / k))
                if cf.determinate_mu and sewn_fit.determinate_mu:
                    r_mu = max(r_mu, abs(sewn_fit.mu - cf.mu / sqrt_k))
                    r_muprime = max(r_muprime, abs(sewn_fit.muprime - cf.muprime / sqrt_k))
            first = cell_fits[0]
            nullity_rows.append(NullityTransferRow(
                point=s,
                sewn=sewn_fit,
                cell_kappa=first.kappa,
                cell_mu=first.mu,
                cell_muprime=first.muprime,
                kappa_defect=abs(sewn_fit.kappa - first.kappa / k),
                mu_defect=abs(sewn_fit.mu - first.mu / sqrt_k) if first.determinate_mu else 0.0,
                muprime_defect=abs(sewn_fit.muprime - first.muprime / sqrt_k) if first.determinate_mu else 0.0,
            ))
            commut.accumulate(sewn, p, sewn_fit)
        checks.append(CheckResult("nullity_fit_residuals", r_res, tol, r_res <= tol))
        checks.append(CheckResult("kappa_transfer", r_kappa, tol, r_kappa <= tol,
                                  note=f"kappa -> kappa/{k}"))
        checks.append(CheckResult("mu_transfer", r_mu, tol, r_mu <= tol,
                                  note=f"mu -> mu/sqrt({k}), raw convention"))
        checks.append(CheckResult("muprime_transfer", r_muprime, tol, r_muprime <= tol,
                                  note=f"mu' -> mu'/sqrt({k}), raw convention"))
        generalized = check_generalized(sewn, samples, tol, RAW)
        checks.append(CheckResult("eta_aligned", generalized.group_spread_max, tol,
                                  generalized.eta_aligned))
        checks.extend(commut.checks(tol))
        if cell_class.kind == ALMOST_ALPHA_KENMOTSU and sewn_class.kind == ALMOST_ALPHA_KENMOTSU:
            comparison = _compare_conventions(
                cells[0], sewn, cell_points[0], [s.array() for s in samples],
                cell_class.alpha, sewn_class.alpha, k, tol,
            )
    return TheoremReport(
        subject=sewn.name,
        cells_are_copies=copies,
        cell_classification=cell_class,
        sewn_classification=sewn_class,
        checks=tuple(checks),
        nullity_rows=tuple(nullity_rows),
        generalized=generalized,
        convention_comparison=comparison,
    )


class _CommutationResiduals:
    """Max residuals of the fitted-operator commutation relations."""

    def __init__(self) -> None:
        self.symmetry = 0.0
        self.p_phi = 0.0
        self.h_phi = 0.0
        self.p_h = 0.0
        self.kills_xi = 0.0

    def accumulate(self, struct: ContactStructure, point, fit: NullityFit) -> None:
        from .geometry import h_tensor

        g, phi, xi, _ = struct.values_at(point)
        tensors = h_tensor(struct, point)
        p_op = -fit.kappa * (phi @ phi)
        h1 = fit.mu * tensors.h
        h2 = fit.muprime * tensors.hprime
        for op in (p_op, h1, h2):
            self.symmetry = max(self.symmetry, float(np.max(np.abs(g @ op - (g @ op).T))))
            self.kills_xi = max(self.kills_xi, float(np.max(np.abs(op @ xi))))
        self.p_phi = max(self.p_phi, float(np.max(np.abs(p_op @ phi - phi @ p_op))))
        for h_op in (h1, h2):
            self.h_phi = max(self.h_phi, float(np.max(np.abs(h_op @ phi + phi @ h_op))))
            self.p_h = max(self.p_h, float(np.max(np.abs(p_op @ h_op - h_op @ p_op))))

    def checks(self, tol: float) -> list[CheckResult]:
        return [
            CheckResult("operators_g_symmetric", self.symmetry, tol, self.symmetry <= tol),
            CheckResult("P_commutes_with_phi", self.p_phi, tol, self.p_phi <= tol),
            CheckResult("H_anticommutes_with_phi", self.h_phi, tol, self.h_phi <= tol),
            CheckResult("P_commutes_with_H", self.p_h, tol, self.p_h <= tol),
            CheckResult("operators_kill_xi", self.kills_xi, tol, self.kills_xi <= tol),
        ]


def _same_definition(a: ContactStructure, b: ContactStructure) -> bool:
    return (
        a.chart == b.chart
        and a.metric.components == b.metric.components
        and a.phi.components == b.phi.components
        and a.xi.components == b.xi.components
        and a.eta.components == b.eta.components
    )


def _compare_conventions(cell, sewn, cell_points, sewn_points, alpha_cell, alpha_sewn, k, tol):
    cell_raw = _mean_fit(cell, cell_points, RAW)
    cell_norm = _mean_fit(cell, cell_points, kenmotsu_convention(alpha_cell))
    sewn_raw = _mean_fit(sewn, sewn_points, RAW)
    sewn_norm = _mean_fit(sewn, sewn_points, kenmotsu_convention(alpha_sewn))
    # the ratio is meaningless when the cells have mu' = 0 in the first place
    if abs(cell_raw[2]) <= 1e-8 or abs(cell_norm[2]) <= 1e-8:
        ratio_raw = ratio_norm = math.nan
        verdict = "indeterminate (mu' vanishes on the cells)"
    else:
        ratio_raw = sewn_raw[2] / cell_raw[2]
        ratio_norm = sewn_norm[2] / cell_norm[2]
        target = 1.0 / k
        if abs(ratio_norm - target) <= max(tol, 1e-6):
            verdict = "kenmotsu"
        elif abs(ratio_raw - target) <= max(tol, 1e-6):
            verdict = "raw"
        else:
            verdict = "neither"
    return ConventionComparison(
        cell_count=k,
        alpha_cell=alpha_cell,
        alpha_sewn=alpha_sewn,
        cell_raw=cell_raw,
        cell_normalized=cell_norm,
        sewn_raw=sewn_raw,
        sewn_normalized=sewn_norm,
        muprime_ratio_raw=ratio_raw,
        muprime_ratio_normalized=ratio_norm,
        reproduces_inverse_k=verdict,
    )
