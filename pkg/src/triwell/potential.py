"""Triple-well potentials on the plane and their well data.

A :class:`Potential` bundles vectorized evaluators for ``(W, grad W, hess W)``
with metadata about its zeros.  Two builtin families are provided:

* :func:`builtin_degenerate_triple` -- collinear wells at (-1,0), (0,0), (1,0)
  with transverse confinement, so the well-to-well distances have closed-form
  quadrature values and the middle well sits exactly on every geodesic between
  the outer wells (the distance between the outer wells splits additively).
* :func:`builtin_double_well` -- the classic two-well fixture with the exact
  ``tanh`` connection, used by unit tests.

Hypothesis checking for user-supplied potentials is sampled, not symbolic:
:func:`validate_potential` probes grids and circles and reports per-hypothesis
flags.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

# Default tolerances; all overridable through ValidationConfig.
TOL_WELL = 1e-10
TOL_ZERO = 1e-8
TOL_PATH = 1e-3


@dataclass(frozen=True)
class Well:
    """A nondegenerate zero of the potential.

    ``hessian_eigenvalues`` are the eigenvalues of D2W at the well, sorted
    ascending; ``hessian_eigenvectors`` holds the matching orthonormal
    eigenvectors as columns.  The quadratic model near the well is
    ``W(p + x) ~ (1/2) x^T D2W x``, so the coefficients of the model form
    are ``hessian_eigenvalues / 2``.
    """

    label: int
    position: np.ndarray
    hessian_eigenvalues: tuple[float, float]
    hessian_eigenvectors: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        object.__setattr__(self, "position", pos)
        lam1, lam2 = self.hessian_eigenvalues
        if not (0.0 < lam1 < lam2):
            raise ConfigurationError(
                f"well {self.label}: need 0 < lam1 < lam2, got ({lam1}, {lam2})"
            )
        V = np.asarray(self.hessian_eigenvectors, dtype=float)
        if not np.allclose(V.T @ V, np.eye(2), atol=1e-12):
            raise ConfigurationError(f"well {self.label}: eigenvectors not orthonormal")
        object.__setattr__(self, "hessian_eigenvectors", V)

    @property
    def quadratic_model_eigenvalues(self) -> tuple[float, float]:
        """Eigenvalues of D2W/2, the coefficients of the local quadratic model."""
        l1, l2 = self.hessian_eigenvalues
        return (l1 / 2.0, l2 / 2.0)


@dataclass(frozen=True)
class Potential:
    """A smooth nonnegative potential with analytic derivatives.

    The three callables accept arrays of shape (..., 2) and return values of
    shape (...,), (..., 2) and (..., 2, 2) respectively.  Evaluation is pure
    and reentrant; concurrent reads are safe.
    """

    w: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    wells: tuple[Well, ...]
    coercivity_radius: float = 0.0
    family: str = "custom"
    family_params: dict = field(default_factory=dict)

    def well(self, label: int) -> Well:
        for w in self.wells:
            if w.label == label:
                return w
        raise KeyError(f"no well labeled {label}")

    def well_positions(self) -> np.ndarray:
        return np.stack([w.position for w in self.wells])


def from_callables(
    w: Callable,
    grad: Callable,
    hess: Callable,
    well_positions: Sequence[Sequence[float]],
    coercivity_radius: float = 0.0,
    family: str = "custom",
    family_params: dict | None = None,
) -> Potential:
    """Build a Potential from raw evaluators, deriving well data from ``hess``.

    Well labels are assigned 1, 2, ... in the order given.
    """
    wells = []
    for k, pos in enumerate(well_positions, start=1):
        pos = np.asarray(pos, dtype=float)
        H = np.asarray(hess(pos), dtype=float)
        lam, V = np.linalg.eigh(H)
        wells.append(
            Well(
                label=k,
                position=pos,
                hessian_eigenvalues=(float(lam[0]), float(lam[1])),
                hessian_eigenvectors=V,
            )
        )
    return Potential(
        w=w,
        grad=grad,
        hess=hess,
        wells=tuple(wells),
        coercivity_radius=float(coercivity_radius),
        family=family,
        family_params=dict(family_params or {}),
    )


def w_derivatives(potential: Potential, point) -> tuple[float, np.ndarray, np.ndarray]:
    """Evaluate (W, grad W, D2W) at a single target-plane point."""
    p = np.asarray(point, dtype=float)
    if p.shape != (2,) or not np.all(np.isfinite(p)):
        raise DomainError(f"point must be a finite 2-vector, got {point!r}")
    W = float(potential.w(p))
    g = np.asarray(potential.grad(p), dtype=float)
    H = np.asarray(potential.hess(p), dtype=float)
    H = 0.5 * (H + H.T)  # enforce exact symmetry
    return W, g, H


def builtin_degenerate_triple(lam: float, mu: float, scale: float = 1.0) -> Potential:
    """Collinear triple-well family W = scale^2 * (u1^2(u1^2-1)^2 + (lam+mu*u1^2) u2^2).

    Wells sit at (-1,0), (0,0), (1,0).  Since W(u1,u2) >= W(u1,0) with equality
    only on the axis, every geodesic between wells lies on the u1-axis, so
    d(p1,p3) = d(p1,p2) + d(p2,p3) holds exactly and the only geodesic between
    the outer wells passes through the middle one.

    ``lam > 1`` makes the u1-axis the small-eigenvalue direction of D2W at the
    middle well; ``2(lam+mu) != 8`` keeps the outer-well eigenvalues distinct.
    ``scale`` multiplies W by scale^2 (distances then scale linearly); it keeps
    the geometry and convexity regions unchanged while slowing all exponential
    rates, which is useful when a decay has to stay measurable in double
    precision.
    """
    if not lam > 1.0:
        raise ConfigurationError(
            f"lam must exceed 1 so the middle well's small-eigenvalue direction "
            f"is the well axis; got lam={lam}"
        )
    if mu < 0.0:
        raise ConfigurationError(f"mu must be >= 0, got mu={mu}")
    if abs(2.0 * (lam + mu) - 8.0) < 1e-12:
        raise ConfigurationError(
            f"2*(lam+mu) = 8 makes the outer-well Hessian eigenvalues equal "
            f"(lam={lam}, mu={mu}); distinct eigenvalues are required"
        )
    if not scale > 0.0:
        raise ConfigurationError(f"scale must be positive, got {scale}")
    s2 = scale * scale

    def w(u):
        u = np.asarray(u, dtype=float)
        x, y = u[..., 0], u[..., 1]
        x2 = x * x
        return s2 * (x2 * (x2 - 1.0) ** 2 + (lam + mu * x2) * y * y)

    def grad(u):
        u = np.asarray(u, dtype=float)
        x, y = u[..., 0], u[..., 1]
        x2 = x * x
        gx = 2.0 * x * (x2 - 1.0) ** 2 + 4.0 * x * x2 * (x2 - 1.0) + 2.0 * mu * x * y * y
        gy = 2.0 * (lam + mu * x2) * y
        return s2 * np.stack([gx, gy], axis=-1)

    def hess(u):
        u = np.asarray(u, dtype=float)
        x, y = u[..., 0], u[..., 1]
        x2 = x * x
        hxx = 30.0 * x2 * x2 - 24.0 * x2 + 2.0 + 2.0 * mu * y * y
        hxy = 4.0 * mu * x * y
        hyy = 2.0 * (lam + mu * x2) * np.ones_like(x)
        H = np.empty(u.shape[:-1] + (2, 2))
        H[..., 0, 0] = hxx
        H[..., 0, 1] = hxy
        H[..., 1, 0] = hxy
        H[..., 1, 1] = hyy
        return s2 * H

    return from_callables(
        w,
        grad,
        hess,
        well_positions=[(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)],
        coercivity_radius=3.0,
        family="degenerate_triple",
        family_params={"lam": lam, "mu": mu, "scale": scale},
    )


def builtin_double_well() -> Potential:
    """Two-well test fixture W = (1-u1^2)^2/2 + u2^2, wells at (+-1, 0).

    Exact heteroclinic t -> (tanh t, 0) with connection energy 4/3.
    """

    def w(u):
        u = np.asarray(u, dtype=float)
        x, y = u[..., 0], u[..., 1]
        return 0.5 * (1.0 - x * x) ** 2 + y * y

    def grad(u):
        u = np.asarray(u, dtype=float)
        x, y = u[..., 0], u[..., 1]
        return np.stack([2.0 * x * (x * x - 1.0), 2.0 * y], axis=-1)

    def hess(u):
        u = np.asarray(u, dtype=float)
        x = u[..., 0]
        H = np.empty(u.shape[:-1] + (2, 2))
        H[..., 0, 0] = 6.0 * x * x - 2.0
        H[..., 0, 1] = 0.0
        H[..., 1, 0] = 0.0
        H[..., 1, 1] = 2.0
        return H

    return from_callables(
        w,
        grad,
        hess,
        well_positions=[(-1.0, 0.0), (1.0, 0.0)],
        coercivity_radius=3.0,
        family="double_well",
        family_params={},
    )


def quadratic_well(lam1: float, lam2: float, center=(0.0, 0.0)) -> Potential:
    """Single-well quadratic fixture W = lam1*x^2 + lam2*y^2 (model coefficients
    lam1, lam2; D2W eigenvalues are 2*lam1, 2*lam2).  Unit-test plumbing."""
    if not (0.0 < lam1 < lam2):
        raise ConfigurationError(f"need 0 < lam1 < lam2, got ({lam1}, {lam2})")
    c = np.asarray(center, dtype=float)

    def w(u):
        u = np.asarray(u, dtype=float) - c
        return lam1 * u[..., 0] ** 2 + lam2 * u[..., 1] ** 2

    def grad(u):
        u = np.asarray(u, dtype=float) - c
        return np.stack([2.0 * lam1 * u[..., 0], 2.0 * lam2 * u[..., 1]], axis=-1)

    def hess(u):
        u = np.asarray(u, dtype=float)
        H = np.zeros(u.shape[:-1] + (2, 2))
        H[..., 0, 0] = 2.0 * lam1
        H[..., 1, 1] = 2.0 * lam2
        return H

    return from_callables(
        w, grad, hess, well_positions=[c], family="quadratic", family_params={"lam1": lam1, "lam2": lam2}
    )


# ---------------------------------------------------------------------------
# Convexity radius estimation
# ---------------------------------------------------------------------------

def convexity_radius(potential: Potential, well: Well, r_max: float = 2.0, n_angles: int = 64) -> float:
    """Largest radius r (dyadic search) such that D2W stays positive definite on
    the sampled disk B_r around the well."""

    def pd_on_circle(r: float) -> bool:
        th = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
        for frac in (0.25, 0.5, 0.75, 1.0):
            pts = well.position + frac * r * np.stack([np.cos(th), np.sin(th)], axis=-1)
            H = potential.hess(pts)
            tr = H[..., 0, 0] + H[..., 1, 1]
            det = H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]
            lam_min = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))
            if not np.all(lam_min > 0.0):
                return False
        return True

    lo, hi = 0.0, r_max
    if pd_on_circle(r_max):
        return r_max
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if pd_on_circle(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationConfig:
    tol_well: float = TOL_WELL
    tol_zero: float = TOL_ZERO
    tol_path: float = TOL_PATH
    tol_defect: float = 1e-3
    grid_halfwidth: float = 3.0
    grid_n: int = 121
    winfin_angles: int = 360
    distance_n: int = 513


@dataclass
class ValidationReport:
    """Per-hypothesis flags for a potential; values are 'pass', 'fail' or
    'inconclusive' (the latter only when a distance solve did not converge)."""

    posdef: str
    winfin: str
    zero_set: str
    degenerate_equality: str
    geodesic_through_p2: bool
    eigenvalues: dict
    triangle_defect: float
    distances: dict
    notes: list = field(default_factory=list)

    def all_pass(self) -> bool:
        flags = (self.posdef, self.winfin, self.zero_set, self.degenerate_equality)
        return all(f == "pass" for f in flags) and self.geodesic_through_p2

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def validate_potential(potential: Potential, config: ValidationConfig | None = None) -> ValidationReport:
    """Check the standing hypotheses on a sampled basis.

    Nondegeneracy of wells (distinct positive Hessian eigenvalues, vanishing
    gradient), outward radial growth on the circle |p| = M, the sampled zero
    set, the additive splitting of the outer-well distance, and whether the
    computed geodesic between the outer wells passes near the middle well.
    """
    from . import metric  # local import; metric depends on potential types

    cfg = config or ValidationConfig()
    notes: list[str] = []

    # (posdef) + well stationarity
    posdef = "pass"
    eigen = {}
    for wl in potential.wells:
        Wv, g, H = w_derivatives(potential, wl.position)
        lam = np.linalg.eigvalsh(H)
        eigen[f"p{wl.label}"] = [float(lam[0]), float(lam[1])]
        if Wv > cfg.tol_well or np.max(np.abs(g)) > cfg.tol_well:
            posdef = "fail"
            notes.append(f"well p{wl.label}: not a critical zero (W={Wv:.2e}, |grad|={np.max(np.abs(g)):.2e})")
        if not (lam[0] > 0.0 and lam[1] - lam[0] > 1e-6):
            posdef = "fail"
            notes.append(f"well p{wl.label}: eigenvalues {lam} not distinct positive")

    # (Winfin) sampled on one circle |p| = M
    M = potential.coercivity_radius
    winfin = "pass"
    if M > 0.0:
        th = np.linspace(-np.pi, np.pi, cfg.winfin_angles, endpoint=False)
        pts = M * np.stack([np.cos(th), np.sin(th)], axis=-1)
        radial = np.einsum("ij,ij->i", pts, potential.grad(pts))
        if np.min(radial) < -1e-12:
            winfin = "fail"
            notes.append(f"p.grad W(p) < 0 at |p| = {M} (min {np.min(radial):.3e})")
    else:
        winfin = "inconclusive"
        notes.append("no coercivity radius configured; radial growth unchecked")

    # sampled zero set == wells
    xs = np.linspace(-cfg.grid_halfwidth, cfg.grid_halfwidth, cfg.grid_n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    Wg = potential.w(pts)
    zero_set = "pass"
    if np.min(Wg) < -1e-14:
        zero_set = "fail"
        notes.append(f"W < 0 on sample grid (min {np.min(Wg):.3e})")
    near_zero = Wg < cfg.tol_zero
    dist_to_wells = np.min(
        np.linalg.norm(pts[..., None, :] - potential.well_positions()[None, None, :, :], axis=-1),
        axis=-1,
    )
    spurious = near_zero & (dist_to_wells > 0.25)
    if np.any(spurious):
        zero_set = "fail"
        notes.append(f"{int(np.sum(spurious))} sampled near-zeros away from wells")

    # degenerate distance splitting + geodesic through the middle well
    degenerate = "inconclusive"
    through_p2 = False
    defect = float("nan")
    distances = {}
    if len(potential.wells) == 3:
        p1, p2, p3 = (potential.well(k).position for k in (1, 2, 3))
        opts = metric.DistanceOpts(n=cfg.distance_n)
        r12 = metric.degenerate_distance(potential, p1, p2, opts)
        r23 = metric.degenerate_distance(potential, p2, p3, opts)
        r13 = metric.degenerate_distance(potential, p1, p3, opts)
        distances = {"d12": r12.value, "d23": r23.value, "d13": r13.value}
        if all(r.converged for r in (r12, r23, r13)):
            defect = r12.value + r23.value - r13.value
            degenerate = "pass" if abs(defect) < cfg.tol_defect else "fail"
            gap = np.min(np.linalg.norm(r13.path.samples - p2, axis=1))
            through_p2 = bool(gap < cfg.tol_path)
            if not through_p2:
                notes.append(f"geodesic p1->p3 stays {gap:.2e} away from p2")
        else:
            notes.append("distance solver did not converge; splitting inconclusive")
    else:
        notes.append("not a triple-well potential; splitting unchecked")

    return ValidationReport(
        posdef=posdef,
        winfin=winfin,
        zero_set=zero_set,
        degenerate_equality=degenerate,
        geodesic_through_p2=through_p2,
        eigenvalues=eigen,
        triangle_defect=float(defect),
        distances=distances,
        notes=notes,
    )
