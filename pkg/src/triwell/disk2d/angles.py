"""Transition angles of a boundary trace, and synthetic traces built from
wall profiles.

A trace that is pinned near the outer wells on the far left/right arcs and
whose 1D energy barely exceeds twice the outer well-to-well distance must
cross the middle well on both half circles.  Running the 1D structure
analysis on each half recovers six angles: the two wall positions and the
middle resting angle per half, ordered

    pi/4 < alpha32 < alpha_bar < alpha21 < 3 pi/4   (upper half)
    -3 pi/4 < beta12 < beta_bar < beta23 < -pi/4    (lower half)

together with the chord lengths and wall-budget parameter derived from them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, PreconditionError, StructureError
from ..heteroclinic1d import HeteroclinicProfile, solve_heteroclinic, truncate_heteroclinic
from ..metric import Path1D, nearest_well_distance
from ..potential import Potential
from ..structure1d import SplitPoints, default_eta, locate_split
from .grid import BoundaryTrace, trace_from_function


@dataclass(frozen=True)
class AngleSet:
    """The six transition angles on the circle of radius R, with derived
    chord lengths and the wall-budget parameter."""

    R: float
    alpha21: float
    alpha32: float
    alpha_bar: float
    beta12: float
    beta23: float
    beta_bar: float

    def __post_init__(self):
        if not (np.pi / 4 < self.alpha32 < self.alpha_bar < self.alpha21 < 3 * np.pi / 4):
            raise ConfigurationError(
                f"upper angles violate pi/4 < alpha32 < alpha_bar < alpha21 < 3pi/4: "
                f"({self.alpha32:.4f}, {self.alpha_bar:.4f}, {self.alpha21:.4f})"
            )
        if not (-3 * np.pi / 4 < self.beta12 < self.beta_bar < self.beta23 < -np.pi / 4):
            raise ConfigurationError(
                f"lower angles violate -3pi/4 < beta12 < beta_bar < beta23 < -pi/4: "
                f"({self.beta12:.4f}, {self.beta_bar:.4f}, {self.beta23:.4f})"
            )

    def _point(self, angle: float) -> np.ndarray:
        return self.R * np.array([np.cos(angle), np.sin(angle)])

    @property
    def a1(self) -> np.ndarray:
        return self._point(self.alpha21)

    @property
    def b1(self) -> np.ndarray:
        return self._point(self.beta12)

    @property
    def a3(self) -> np.ndarray:
        return self._point(self.alpha32)

    @property
    def b3(self) -> np.ndarray:
        return self._point(self.beta23)

    @property
    def L1(self) -> float:
        return float(np.linalg.norm(self.a1 - self.b1))

    @property
    def L3(self) -> float:
        return float(np.linalg.norm(self.a3 - self.b3))

    @property
    def alpha_min(self) -> float:
        return float(
            min(
                self.alpha_bar - self.alpha32,
                self.alpha21 - self.alpha_bar,
                self.beta23 - self.beta_bar,
                self.beta_bar - self.beta12,
            )
        )

    @property
    def ell(self) -> float:
        """Half of R times the smallest angular gap: the wall half-width
        budget."""
        return 0.5 * self.R * self.alpha_min

    @property
    def eps(self) -> float:
        """How far the four transition angles are from vertical."""
        return float(
            max(
                abs(self.alpha21 - np.pi / 2),
                abs(self.beta12 + np.pi / 2),
                abs(self.alpha32 - np.pi / 2),
                abs(self.beta23 + np.pi / 2),
            )
        )


def symmetric_angles(R: float, spread: float, bar_offset: float = 0.0) -> AngleSet:
    """Vertical-symmetric angle set: transitions at +-(pi/2 -+ spread)."""
    return AngleSet(
        R=R,
        alpha21=np.pi / 2 + spread,
        alpha32=np.pi / 2 - spread,
        alpha_bar=np.pi / 2 + bar_offset,
        beta12=-np.pi / 2 - spread,
        beta23=-np.pi / 2 + spread,
        beta_bar=-np.pi / 2 + bar_offset,
    )


@dataclass(frozen=True)
class AngleReport:
    angles: AngleSet
    upper: SplitPoints
    lower: SplitPoints
    boundary_energy: float
    gamma_measured: float
    off_arc_max_distance: float
    h1_distances: dict


def boundary_angles(
    potential: Potential,
    trace: BoundaryTrace,
    eta: float,
    gamma: float,
    profiles: tuple[HeteroclinicProfile, HeteroclinicProfile] | None = None,
    d13: float | None = None,
) -> AngleReport:
    """Recover the transition angles of a near-minimal two-transition trace.

    Preconditions: the trace is eta-close (Euclidean) to the outer wells on
    the far half-arcs |x| > R/2, and its 1D energy along the circle is at most
    2*d13 + gamma.  The 1D split analysis runs separately on each half circle;
    its representative parameters map to angles.
    """
    R = trace.R
    p1 = potential.well(1).position
    p3 = potential.well(3).position
    th = trace.thetas
    pts = R * np.stack([np.cos(th), np.sin(th)], axis=-1)
    left = pts[:, 0] < -R / 2
    right = pts[:, 0] > R / 2
    worst_left = float(np.max(np.linalg.norm(trace.samples[left] - p1, axis=1))) if np.any(left) else np.inf
    worst_right = float(np.max(np.linalg.norm(trace.samples[right] - p3, axis=1))) if np.any(right) else np.inf
    if worst_left > eta:
        raise PreconditionError(
            f"trace strays {worst_left:.3g} from the left well on the arc x < -R/2 (eta={eta})"
        )
    if worst_right > eta:
        raise PreconditionError(
            f"trace strays {worst_right:.3g} from the right well on the arc x > R/2 (eta={eta})"
        )
    if d13 is None:
        from ..metric import degenerate_distance

        d13 = degenerate_distance(potential, p1, p3).value
    e_boundary = trace.energy(potential)
    if e_boundary > 2.0 * d13 + gamma:
        raise PreconditionError(
            f"boundary energy {e_boundary:.6f} exceeds 2*d13 + gamma = {2*d13 + gamma:.6f}"
        )
    if profiles is None:
        profiles = (solve_heteroclinic(potential, 1, 2), solve_heteroclinic(potential, 2, 3))

    # upper half runs 3 -> 2 -> 1 in arclength; reverse it to reuse the
    # 1 -> 2 -> 3 split analysis, then map parameters back
    upper = trace.half_path(upper=True)
    upper_rev = Path1D(upper.t_start, upper.t_end, upper.samples[::-1].copy())
    try:
        sp_up = locate_split(potential, upper_rev, profiles=profiles, d13=d13)
    except StructureError as exc:
        raise StructureError(f"upper half circle: {exc}") from exc
    lower = trace.half_path(upper=False)
    try:
        sp_lo = locate_split(potential, lower, profiles=profiles, d13=d13)
    except StructureError as exc:
        raise StructureError(f"lower half circle: {exc}") from exc

    S = np.pi * R
    angles = AngleSet(
        R=R,
        alpha21=(S - sp_up.a) / R,
        alpha_bar=(S - sp_up.T) / R,
        alpha32=(S - sp_up.b) / R,
        beta12=sp_lo.a / R,
        beta_bar=sp_lo.T / R,
        beta23=sp_lo.b / R,
    )

    # off-arc closeness to the wells, in the degenerate distance
    eta_d = default_eta(potential)
    arcs = [
        (angles.alpha_bar, 3 * np.pi / 4),
        (np.pi / 4, angles.alpha_bar),
        (-3 * np.pi / 4, angles.beta_bar),
        (angles.beta_bar, -np.pi / 4),
    ]
    outside = np.ones(trace.m, dtype=bool)
    for lo, hi in arcs:
        outside &= ~((th >= lo) & (th <= hi))
    dmin, _ = nearest_well_distance(potential, trace.samples[outside])
    off_arc = float(np.max(dmin)) if np.any(outside) else 0.0

    return AngleReport(
        angles=angles,
        upper=sp_up,
        lower=sp_lo,
        boundary_energy=e_boundary,
        gamma_measured=float(e_boundary - 2.0 * d13),
        off_arc_max_distance=off_arc,
        h1_distances={
            "upper_12": sp_up.h1_dist_12,
            "upper_23": sp_up.h1_dist_23,
            "lower_12": sp_lo.h1_dist_12,
            "lower_23": sp_lo.h1_dist_23,
        },
    )


# ---------------------------------------------------------------------------
# Synthetic traces
# ---------------------------------------------------------------------------

def synthetic_trace(
    potential: Potential,
    R: float,
    alpha21: float,
    alpha32: float,
    beta12: float,
    beta23: float,
    ell: float | None = None,
    profiles: tuple[HeteroclinicProfile, HeteroclinicProfile] | None = None,
    m: int | None = None,
) -> BoundaryTrace:
    """Boundary data assembled from truncated wall profiles at four angles.

    On the upper half the trace runs p3 -> p2 -> p1 through walls centered at
    alpha32 and alpha21; on the lower half p1 -> p2 -> p3 through walls at
    beta12 and beta23.  Truncation keeps the walls disjoint, so the map is
    exactly the wells between transitions.
    """
    if profiles is None:
        profiles = (solve_heteroclinic(potential, 1, 2), solve_heteroclinic(potential, 2, 3))
    z12, z23 = profiles
    p1 = potential.well(1).position
    p2 = potential.well(2).position
    p3 = potential.well(3).position
    if ell is None:
        gaps = [
            alpha21 - alpha32,
            beta23 - beta12,
            3 * np.pi / 4 - alpha21,
            alpha32 - np.pi / 4,
            beta12 + 3 * np.pi / 4,
            -np.pi / 4 - beta23,
        ]
        ell = max(2.0, 0.45 * R * min(gaps))
    t12 = truncate_heteroclinic(z12, ell)
    t23 = truncate_heteroclinic(z23, ell)
    if m is None:
        m = max(256, 8 * int(np.ceil(R)))

    def wall(path: Path1D, s):
        return path.at(np.clip(s, path.t_start, path.t_end))

    def fn(pts):
        th = np.arctan2(pts[:, 1], pts[:, 0])
        upper = th >= 0.0
        out = np.empty((pts.shape[0], 2))
        # upper: p3 + [z32(s-R(th-alpha32)) - p3] + [z21 at alpha21 - p2]
        # where z32, z21 are the reversed walls; in forward form:
        s = R * th
        up32 = wall(t23, -(s - R * alpha32))  # z32(x) = z23(-x)
        up21 = wall(t12, -(s - R * alpha21))  # z21(x) = z12(-x)
        out_up = p3 + (up32 - p3) + (up21 - p2)
        lo12 = wall(t12, s - R * beta12)
        lo23 = wall(t23, s - R * beta23)
        out_lo = p1 + (lo12 - p1) + (lo23 - p2)
        out[upper] = out_up[upper]
        out[~upper] = out_lo[~upper]
        return out

    return trace_from_function(R, fn, m)
