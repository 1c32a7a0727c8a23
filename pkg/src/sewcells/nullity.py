"""Fitting the curvature-of-xi decomposition and its constancy structure.

At a point, ``R(X, Y) xi`` is projected (in least squares over all coordinate
field pairs) onto the three-parameter family

    kappa (eta(Y) X - eta(X) Y) + mu (eta(Y) h X - eta(X) h Y)
        + mu' (eta(Y) h' X - eta(X) h' Y),

with ``h = 1/2 L_xi phi`` and ``h' = h phi`` (or ``h'/alpha`` under the
normalized convention).  When ``h`` vanishes the mu/mu' directions are
meaningless, so only kappa is fitted and the pair is flagged undetermined.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .charts import ChartError, ContactStructure, PointSample
from .geometry import h_tensor, riemann

H_DEGENERACY_THRESHOLD = 1e-8

RAW_HPRIME = "raw"
KENMOTSU_HPRIME = "kenmotsu"


class NullityFitError(RuntimeError):
    """Degenerate normal equations with a non-negligible h."""


@dataclass(frozen=True)
class Convention:
    """Which normalization of h' enters the fitted decomposition."""

    kind: str
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (RAW_HPRIME, KENMOTSU_HPRIME):
            raise ValueError(f"unknown convention {self.kind!r}")
        if self.kind == KENMOTSU_HPRIME and not self.alpha:
            raise ValueError("the normalized convention needs a nonzero alpha")

    def label(self) -> str:
        if self.kind == RAW_HPRIME:
            return "raw-h'"
        return f"kenmotsu-h'({self.alpha!r})"


RAW = Convention(RAW_HPRIME)


def kenmotsu_convention(alpha: float) -> Convention:
    return Convention(KENMOTSU_HPRIME, alpha)


@dataclass(frozen=True)
class NullityFit:
    kappa: float
    mu: float
    muprime: float
    residual: float
    h_norm: float
    determinate_mu: bool
    convention: Convention


def fit_nullity(struct: ContactStructure, point, convention: Convention = RAW) -> NullityFit:
    """Least-squares (kappa, mu, mu') at one point; see the module docstring."""
    n = struct.dim
    riem = riemann(struct.metric, point).riem
    xi = struct.xi.evaluate(point)
    eta = struct.eta.evaluate(point)
    tensors = h_tensor(struct, point, alpha=convention.alpha)
    h = tensors.h
    hp = tensors.kenmotsu_hprime if convention.kind == KENMOTSU_HPRIME else tensors.hprime
    h_norm = float(np.max(np.abs(h)))

    lhs_rows: list[np.ndarray] = []
    basis_rows: list[list[np.ndarray]] = []
    r_xi = np.einsum("lijm,m->lij", riem, xi)  # l-th component of R(e_i, e_j) xi
    identity = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            lhs_rows.append(r_xi[:, i, j])
            basis_rows.append([
                eta[j] * identity[:, i] - eta[i] * identity[:, j],
                eta[j] * h[:, i] - eta[i] * h[:, j],
                eta[j] * hp[:, i] - eta[i] * hp[:, j],
            ])
    b = np.concatenate(lhs_rows)
    columns = [np.concatenate([row[c] for row in basis_rows]) for c in range(3)]

    if h_norm <= H_DEGENERACY_THRESHOLD:
        a_kappa = columns[0]
        denom = float(a_kappa @ a_kappa)
        kappa = float(a_kappa @ b) / denom if denom > 0.0 else 0.0
        residual = float(np.linalg.norm(b - kappa * a_kappa))
        return NullityFit(kappa, 0.0, 0.0, residual, h_norm, False, convention)

    a = np.stack(columns, axis=1)
    solution, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < 3:
        raise NullityFitError(
            f"degenerate nullity fit (rank {rank}) with |h| = {h_norm:.3e}"
        )
    kappa, mu, muprime = (float(v) for v in solution)
    residual = float(np.linalg.norm(b - a @ solution))
    return NullityFit(kappa, mu, muprime, residual, h_norm, True, convention)


@dataclass(frozen=True)
class GeneralizedNullityReport:
    """Per-sample fits plus constancy flags along and across the leaves of eta."""

    samples: tuple[PointSample, ...]
    fits: tuple[NullityFit, ...]
    group_values: tuple[float, ...]        # shared adapted-coordinate value per group
    group_sizes: tuple[int, ...]
    constant_kappa: bool
    constant_mu: bool
    constant_muprime: bool
    eta_aligned: bool
    kappa_spread: float
    group_spread_max: float

    def kappa_by_group(self) -> dict[float, list[float]]:
        out: dict[float, list[float]] = {}
        cursor = 0
        for value, size in zip(self.group_values, self.group_sizes):
            out[value] = [self.fits[cursor + k].kappa for k in range(size)]
            cursor += size
        return out


def check_generalized(
    struct: ContactStructure,
    samples: Sequence[PointSample],
    tol: float,
    convention: Convention = RAW,
) -> GeneralizedNullityReport:
    """Group samples sharing the adapted coordinate and test constancy.

    ``eta_aligned`` is true when the fitted values agree within ``tol`` inside
    every shared-coordinate group - the numerical form of
    ``d kappa ^ eta = 0``.  Needs at least 3 distinct shared values with at
    least 2 samples each.
    """
    t_axis = struct.chart.adapted_index
    if t_axis is None:
        raise ChartError("generalized-nullity checks need an adapted chart")
    groups: dict[float, list[PointSample]] = {}
    for sample in samples:
        groups.setdefault(sample.coords[t_axis], []).append(sample)
    rich = {t: members for t, members in groups.items() if len(members) >= 2}
    if len(rich) < 3:
        raise ValueError(
            "insufficient sample structure: need >= 2 samples sharing each of >= 3 adapted values"
        )

    ordered_samples: list[PointSample] = []
    fits: list[NullityFit] = []
    group_values: list[float] = []
    group_sizes: list[int] = []
    group_spread = 0.0
    for t_value in sorted(groups):
        members = groups[t_value]
        group_values.append(t_value)
        group_sizes.append(len(members))
        member_fits = [fit_nullity(struct, s.array(), convention) for s in members]
        ordered_samples.extend(members)
        fits.extend(member_fits)
        if len(members) >= 2:
            for pick in (
                [f.kappa for f in member_fits],
                [f.mu for f in member_fits if f.determinate_mu],
                [f.muprime for f in member_fits if f.determinate_mu],
            ):
                if pick:
                    group_spread = max(group_spread, max(pick) - min(pick))

    def spread(values: list[float]) -> float:
        return max(values) - min(values) if values else 0.0

    kappa_spread = spread([f.kappa for f in fits])
    mu_spread = spread([f.mu for f in fits])
    muprime_spread = spread([f.muprime for f in fits])
    return GeneralizedNullityReport(
        samples=tuple(ordered_samples),
        fits=tuple(fits),
        group_values=tuple(group_values),
        group_sizes=tuple(group_sizes),
        constant_kappa=kappa_spread <= tol,
        constant_mu=mu_spread <= tol,
        constant_muprime=muprime_spread <= tol,
        eta_aligned=group_spread <= tol,
        kappa_spread=kappa_spread,
        group_spread_max=group_spread,
    )
