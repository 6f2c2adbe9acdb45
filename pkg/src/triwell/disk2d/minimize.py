"""Direct minimization of the disk energy with pinned boundary data.

The descent functional couples nearest-neighbour differences on the grid
edges (dual-area weighted, exact fractions at the circle) with nodal
potential quadrature.  Steps are spectral (Barzilai-Borwein) with halving on
any energy increase, so the recorded energy sequence is non-increasing by
construction; the iteration is single-threaded and bitwise deterministic for
a fixed configuration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..heteroclinic1d import minimize_path_energy
from ..metric import Path1D
from ..potential import Potential
from .grid import BoundaryTrace, EnergyReport, Field2D, energy_2d

log = logging.getLogger(__name__)


@dataclass
class MinimizeOpts:
    tol_opt: float = 1e-6
    max_iters: int = 5000
    step0: float = 0.2
    record_every: int = 1


@dataclass
class MinimizeResult:
    field: Field2D
    energies: np.ndarray  # recorded descent-functional values, non-increasing
    converged: bool
    iterations: int
    grad_sup: float
    report: EnergyReport


def _geometry(field: Field2D):
    """Edge weights, node weights and pin masks for the descent functional."""
    A = field.cell_fractions * (field.h * field.h)
    n = field.n
    # dual areas: x-edge (i -> i+1, j) borders cells (i, j-1) and (i, j)
    wx = np.zeros((n - 1, n))
    wx[:, 1:] += 0.5 * A
    wx[:, :-1] += 0.5 * A
    wy = np.zeros((n, n - 1))
    wy[1:, :] += 0.5 * A
    wy[:-1, :] += 0.5 * A
    wnode = field.node_weights
    mask = field.mask
    # ring: in-disk nodes adjacent to the outside; ghosts: outside nodes
    # adjacent to the inside -- both carry the trace and stay pinned
    nb_out = np.zeros_like(mask)
    nb_out[1:, :] |= ~mask[:-1, :]
    nb_out[:-1, :] |= ~mask[1:, :]
    nb_out[:, 1:] |= ~mask[:, :-1]
    nb_out[:, :-1] |= ~mask[:, 1:]
    ring = mask & nb_out
    nb_in = np.zeros_like(mask)
    nb_in[1:, :] |= mask[:-1, :]
    nb_in[:-1, :] |= mask[1:, :]
    nb_in[:, 1:] |= mask[:, :-1]
    nb_in[:, :-1] |= mask[:, 1:]
    ghost = (~mask) & nb_in
    active = mask & ~ring
    # edges touching any node with zero dual weight never contribute
    return wx, wy, wnode, active, ring | ghost


def _pin_boundary(field: Field2D, pinned: np.ndarray) -> None:
    xs = field.xs
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    theta = np.arctan2(Y[pinned], X[pinned])
    field.values[pinned] = field.trace.at(theta)


def descent_energy_grad(potential: Potential, field: Field2D, wx, wy, wnode):
    """Value and gradient of the edge-based descent functional."""
    u = field.values
    dx = u[1:, :] - u[:-1, :]
    dy = u[:, 1:] - u[:, :-1]
    e_kin = 0.5 * (np.sum(wx[..., None] * dx * dx) + np.sum(wy[..., None] * dy * dy)) / (field.h**2)
    Wv = potential.w(u)
    e_pot = float(np.sum(wnode * Wv))
    g = np.zeros_like(u)
    fx = wx[..., None] * dx / (field.h**2)
    g[1:, :] += fx
    g[:-1, :] -= fx
    fy = wy[..., None] * dy / (field.h**2)
    g[:, 1:] += fy
    g[:, :-1] -= fy
    g += wnode[..., None] * potential.grad(u)
    return float(e_kin) + e_pot, g


def minimize_field(
    potential: Potential,
    boundary: BoundaryTrace,
    h: float,
    init,
    opts: MinimizeOpts | None = None,
) -> MinimizeResult:
    """Energy descent on the disk with the boundary ring pinned to the trace.

    ``init`` is a Field2D on the same grid or a vectorized map pts -> values.
    Descent runs until the sup-norm of the active-node gradient drops below
    ``tol_opt`` or the iteration budget is spent; the energy sequence of
    accepted steps never increases.
    """
    opts = opts or MinimizeOpts()
    R = boundary.R
    n = int(round(2.0 * R / h)) + 1
    if isinstance(init, Field2D):
        if init.n != n or abs(init.R - R) > 1e-12:
            raise DomainError("init field grid does not match the requested grid")
        values = init.values.copy()
    else:
        xs = np.linspace(-R, R, n)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        values = np.asarray(init(np.stack([X, Y], axis=-1).reshape(-1, 2)), dtype=float).reshape(n, n, 2)
    field = Field2D(R=R, h=h, values=values, trace=boundary)
    wx, wy, wnode, active, pinned = _geometry(field)
    _pin_boundary(field, pinned)
    act3 = active[..., None]

    e, g = descent_energy_grad(potential, field, wx, wy, wnode)
    g = np.where(act3, g, 0.0)
    energies = [e]
    step = opts.step0
    u_prev = None
    g_prev = None
    it = 0
    gsup = float(np.max(np.abs(g)))
    while it < opts.max_iters and gsup > opts.tol_opt:
        it += 1
        if u_prev is not None:
            du = (field.values - u_prev)[active].ravel()
            dg = (g - g_prev)[active].ravel()
            dd = float(np.dot(du, dg))
            if dd > 1e-300:
                step = float(np.dot(du, du)) / dd
                step = min(max(step, 1e-10), 50.0)
        u_prev = field.values.copy()
        g_prev = g
        accepted = False
        while step > 1e-16:
            trial = field.values - step * g
            trial_field = Field2D(R=R, h=h, values=trial, trace=boundary, _geom=field._geom)
            e_new, g_new = descent_energy_grad(potential, trial_field, wx, wy, wnode)
            if e_new <= e:  # monotone safeguard
                field = trial_field
                e = e_new
                g = np.where(act3, g_new, 0.0)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            log.debug("descent stalled at iteration %d (step underflow)", it)
            break
        if it % opts.record_every == 0:
            energies.append(e)
        gsup = float(np.max(np.abs(g)))
    converged = gsup <= opts.tol_opt
    report = energy_2d(potential, field)
    return MinimizeResult(
        field=field,
        energies=np.asarray(energies),
        converged=converged,
        iterations=it,
        grad_sup=gsup,
        report=report,
    )


# ---------------------------------------------------------------------------
# Templates and the width-constrained single-wall comparison field
# ---------------------------------------------------------------------------

def wall_template(profile_values, center: float = 0.0):
    """Vectorized map (pts -> values) sweeping a 1D profile along x."""

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        return profile_values(pts[:, 0] - center)

    return fn


def split_wall_template(potential: Potential, z12, z23, separation: float):
    """Two-wall map: the 1-2 wall at x = -separation/2, the 2-3 wall at
    x = +separation/2 (glued through the middle well)."""
    p2 = potential.well(2).position

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        x = pts[:, 0]
        v12 = z12.path.at(np.clip(x + separation / 2.0, z12.path.t_start, z12.path.t_end))
        v23 = z23.path.at(np.clip(x - separation / 2.0, z23.path.t_start, z23.path.t_end))
        return v12 + v23 - p2[None, :]

    return fn


def single_wall_profile(potential: Potential, width: float, n: int = 2001) -> Path1D:
    """Best 1D transition from the first to the third well confined to a band
    of half-width ``width``: the profile is pinned to the outer wells at
    +-width, which keeps its two component walls adjacent."""
    p1 = potential.well(1).position
    p3 = potential.well(3).position
    t = np.linspace(-width, width, n)
    lam = 0.5 * (1.0 + np.tanh(2.0 * t / max(width, 1.0)))
    init = Path1D(-width, width, p1[None, :] + lam[:, None] * (p3 - p1)[None, :])
    path, _, _ = minimize_path_energy(potential, init, pin_left=p1, pin_right=p3, tol_grad=1e-8)
    return path


def single_wall_field(
    potential: Potential,
    boundary: BoundaryTrace,
    h: float,
    width: float = 3.0,
) -> Field2D:
    """The tightest single-wall comparison field: the width-constrained 1D
    profile swept along x inside B_{R-1}, radially blended to the boundary
    trace across the outer unit annulus."""
    prof = single_wall_profile(potential, width)
    R = boundary.R
    R_inner = R - 1.0

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        core = prof.at(np.clip(pts[:, 0], -width, width))
        r = np.linalg.norm(pts, axis=1)
        lam = np.clip((r - R_inner), 0.0, 1.0)[:, None]
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        return (1.0 - lam) * core + lam * boundary.at(theta)

    n = int(round(2.0 * R / h)) + 1
    xs = np.linspace(-R, R, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vals = fn(np.stack([X, Y], axis=-1).reshape(-1, 2)).reshape(n, n, 2)
    return Field2D(R=R, h=h, values=vals, trace=boundary)
