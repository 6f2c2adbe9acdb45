"""Explicit low-energy competitor fields on the disk, and the closed-form
upper bound they realize.

The construction splits the disk along the line L through the two middle
resting angles.  Each side carries a wall field built from a truncated
heteroclinic of the signed distance to its boundary chord: constant along the
chord direction in the bulk, dilated over two bands of width sigma so the
wall center moves an extra rho away from L, and continued as a function of
the chord-normal coordinate in the small cap regions beyond the chord's span.
A one-cell-thick annulus interpolates radially between the prescribed
boundary trace and the interior rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..heteroclinic1d import HeteroclinicProfile, solve_heteroclinic
from ..potential import Potential
from .angles import AngleSet
from .grid import BoundaryTrace, Field2D, trace_from_function


@dataclass(frozen=True)
class ChordFrame:
    """Orthonormal frame of a boundary chord: origin at the chord line's
    closest point to the disk center, normal pointing toward the center."""

    origin: np.ndarray
    normal: np.ndarray  # x' axis; positive side faces the separating line
    tangent: np.ndarray  # y' axis along the chord
    half_span: float  # half-length of chord intersected with B_{R-1}

    def coords(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rel = pts - self.origin
        return rel @ self.normal, rel @ self.tangent


def _chord_frame(A: np.ndarray, B: np.ndarray, R_inner: float) -> ChordFrame:
    t = (B - A) / np.linalg.norm(B - A)
    # foot of the perpendicular from the origin to the chord line
    foot = A - (A @ t) * t
    dist = np.linalg.norm(foot)
    if dist < 1e-9:
        raise ConfigurationError("chord passes through the disk center; frame undefined")
    n = -foot / dist  # toward the center, i.e. toward the separating line
    half = np.sqrt(max(R_inner * R_inner - dist * dist, 0.0))
    return ChordFrame(origin=foot, normal=n, tangent=t, half_span=half)


def _eval_truncated(profile: HeteroclinicProfile, ell: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Vectorized truncated-profile evaluation with per-point half-width ell:
    left well for s <= -ell, profile for |s| <= ell-1, right well for
    s >= ell, linear on the unit buffers."""
    path = profile.path
    p_i = path.samples[0]
    p_j = path.samples[-1]
    base = path.at(np.clip(s, path.t_start, path.t_end))
    out = base.copy()
    vL = path.at(np.clip(-(ell - 1.0), path.t_start, path.t_end))
    vR = path.at(np.clip(ell - 1.0, path.t_start, path.t_end))
    out[s <= -ell] = p_i
    out[s >= ell] = p_j
    mL = (s > -ell) & (s < -(ell - 1.0))
    lam = (s + ell)[mL, None]
    out[mL] = p_i[None, :] + lam * (vL[mL] - p_i[None, :])
    mR = (s > (ell - 1.0)) & (s < ell)
    lam = (s - (ell - 1.0))[mR, None]
    out[mR] = vR[mR] + lam * (p_j[None, :] - vR[mR])
    return out


def _interior_rule(
    pts: np.ndarray,
    angles: AngleSet,
    z12: HeteroclinicProfile,
    z23: HeteroclinicProfile,
    ell: float,
    rho: float,
    sigma: float,
    R_inner: float,
) -> np.ndarray:
    """The competitor's value at arbitrary points of B_{R-1}."""
    R = angles.R
    e_abar = R * np.array([np.cos(angles.alpha_bar), np.sin(angles.alpha_bar)])
    e_bbar = R * np.array([np.cos(angles.beta_bar), np.sin(angles.beta_bar)])
    L_dir = (e_abar - e_bbar) / np.linalg.norm(e_abar - e_bbar)
    L_normal = np.array([-L_dir[1], L_dir[0]])
    # orient the normal toward the left region (the one holding the 1-2 chord)
    mid12 = 0.5 * (angles.a1 + angles.b1)
    if (mid12 - e_bbar) @ L_normal < 0:
        L_normal = -L_normal
    side = (pts - e_bbar) @ L_normal  # > 0: left region (wall 1-2)

    fr12 = _chord_frame(angles.a1, angles.b1, R_inner)
    fr23 = _chord_frame(angles.a3, angles.b3, R_inner)
    out = np.empty_like(pts)

    left = side >= 0.0
    for mask, frame, prof, sgn in ((left, fr12, z12, +1.0), (~left, fr23, z23, -1.0)):
        if not np.any(mask):
            continue
        x, y = frame.coords(pts[mask])
        # dilation profile: full shift rho in the bulk, tapering linearly to
        # zero across the two bands of width sigma, zero beyond the chord span
        tau = rho * np.clip((frame.half_span - np.abs(y)) / sigma, 0.0, 1.0)
        # wall coordinate increases toward the separating line on both sides;
        # shifting by +tau moves the wall center away from it
        out[mask] = _eval_truncated(prof, ell + tau, sgn * (x + tau))
    return out


def build_competitor(
    potential: Potential,
    trace: BoundaryTrace,
    angles: AngleSet,
    ell: float,
    rho: float,
    sigma: float,
    h: float,
    profiles: tuple[HeteroclinicProfile, HeteroclinicProfile] | None = None,
    geometry_constant: float = 1.0,
    eps_max: float = 0.2,
) -> Field2D:
    """Assemble the explicit competitor with wall budget ell and dilation
    parameters (rho, sigma).

    Preconditions: geometry_constant <= rho, sigma <= R / geometry_constant;
    the transition angles within eps_max of vertical; ell at most the distance
    from each chord to the separating line (otherwise the two sides cannot
    both be at the middle well on it).
    """
    R = angles.R
    C = geometry_constant
    for name, val in (("rho", rho), ("sigma", sigma)):
        if not (C <= val <= R / C):
            raise ConfigurationError(f"{name}={val} outside the allowed range [{C}, {R / C}]")
    if angles.eps > eps_max:
        raise ConfigurationError(
            f"transition angles are {angles.eps:.3f} from vertical; the cap construction "
            f"degenerates beyond {eps_max}"
        )
    if ell < 2.0:
        raise ConfigurationError(f"wall budget ell={ell} must be >= 2")
    if profiles is None:
        profiles = (solve_heteroclinic(potential, 1, 2), solve_heteroclinic(potential, 2, 3))
    z12, z23 = profiles
    R_inner = R - 1.0

    # the chords must clear the separating line by at least ell
    e_abar = R * np.array([np.cos(angles.alpha_bar), np.sin(angles.alpha_bar)])
    e_bbar = R * np.array([np.cos(angles.beta_bar), np.sin(angles.beta_bar)])
    for A, B in ((angles.a1, angles.b1), (angles.a3, angles.b3)):
        t = (B - A) / np.linalg.norm(B - A)
        n = np.array([-t[1], t[0]])
        gaps = [abs((q - A) @ n) for q in (e_abar, e_bbar)]
        if min(gaps) < ell:
            raise ConfigurationError(
                f"wall budget ell={ell:.3f} exceeds the chord-to-separating-line "
                f"distance {min(gaps):.3f}"
            )

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=1)
        out = np.empty_like(pts)
        inner = r <= R_inner
        if np.any(inner):
            out[inner] = _interior_rule(pts[inner], angles, z12, z23, ell, rho, sigma, R_inner)
        ring = ~inner
        if np.any(ring):
            p = pts[ring]
            rr = r[ring]
            theta = np.arctan2(p[:, 1], p[:, 0])
            safe = np.where(rr > 1e-12, rr, 1.0)
            proj = p * (R_inner / safe)[:, None]
            v_in = _interior_rule(proj, angles, z12, z23, ell, rho, sigma, R_inner)
            v_out = trace.at(theta)
            lam = np.clip((rr - R_inner)[:, None], 0.0, 1.0)
            out[ring] = (1.0 - lam) * v_in + lam * v_out
        return out

    n = int(round(2.0 * R / h)) + 1
    xs = np.linspace(-R, R, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vals = fn(np.stack([X, Y], axis=-1).reshape(-1, 2)).reshape(n, n, 2)
    return Field2D(R=R, h=h, values=vals, trace=trace)


def competitor_trace(
    potential: Potential,
    angles: AngleSet,
    ell: float,
    rho: float,
    sigma: float,
    profiles: tuple[HeteroclinicProfile, HeteroclinicProfile] | None = None,
    m: int | None = None,
) -> BoundaryTrace:
    """The interior rule extended to the boundary circle itself: boundary data
    for which the annulus interpolation is nearly radial-constant."""
    if profiles is None:
        profiles = (solve_heteroclinic(potential, 1, 2), solve_heteroclinic(potential, 2, 3))
    z12, z23 = profiles
    R = angles.R
    if m is None:
        m = max(512, 16 * int(np.ceil(R)))

    def fn(pts):
        return _interior_rule(np.asarray(pts, dtype=float), angles, z12, z23, ell, rho, sigma, R)

    return trace_from_function(R, fn, m)


def upper_bound_formula(
    angles: AngleSet,
    R: float,
    ell: float,
    rho: float,
    sigma: float,
    eta: float,
    gamma: float,
    d12: float,
    d23: float,
    amplitude: float,
    rate: float,
) -> float:
    """Closed-form ceiling for the competitor energy:

        d12 L1 + d23 L3
          + amplitude * ( rho^2/sigma + (sigma/rho) e^{-rate ell}
                          + R e^{-rate (ell+rho)} + eta ell e^{-rate ell}
                          + e^{-rate ell} + gamma + eta^2 )

    with (amplitude, rate) calibrated per potential.
    """
    err = (
        rho * rho / sigma
        + (sigma / rho) * np.exp(-rate * ell)
        + R * np.exp(-rate * (ell + rho))
        + eta * ell * np.exp(-rate * ell)
        + np.exp(-rate * ell)
        + gamma
        + eta * eta
    )
    return float(d12 * angles.L1 + d23 * angles.L3 + amplitude * err)
