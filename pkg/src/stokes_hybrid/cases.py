"""Benchmark Stokes problems with known exact solutions.

Each case bundles a velocity field, its gradient, a pressure, the body
force, and metadata the discretization and error machinery need: where the
solution is singular (for adaptive-depth error quadrature), which angular
branch polar coordinates use, and whether the body force is a pure gradient
(the divergence-free part of the load vanishes, so velocity errors of a
pressure-robust method are independent of the viscosity).

All fields take points of shape (n, 2) and an optional ``side`` array of
hint points used to resolve double-valued traces on a crack: a hint below
the slit selects the angle branch approaching 2*pi.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import mesh as meshmod

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ExactSolution:
    name: str
    nu: float
    velocity: Callable
    velocity_gradient: Callable
    pressure: Callable
    body_force: Optional[Callable]           # None means zero
    singular_points: tuple = ()
    theta_branch: tuple = (0.0, math.pi)
    helmholtz_projection_is_zero: bool = False
    mesh_factory: Callable = None
    default_n0: int = 2

    def make_mesh(self, n=None):
        return self.mesh_factory(self.default_n0 if n is None else n)


def _polar(pts, branch_hi, side=None):
    """Polar coordinates with the angle in [0, branch_hi].

    atan2 angles in (-pi, 0) are shifted by 2*pi, which covers every branch
    used here. On a slit along the positive x axis (branch_hi = 2*pi) the
    angle of a point with y == 0, x > 0 is ambiguous; a ``side`` hint with
    negative y selects the lower-lip value 2*pi.
    """
    pts = np.asarray(pts, dtype=float)
    x = pts[..., 0]
    y = pts[..., 1]
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    theta = np.where(theta < 0.0, theta + TWO_PI, theta)
    if branch_hi > 1.75 * math.pi and side is not None:
        side = np.asarray(side, dtype=float)
        on_slit = (y == 0.0) & (x > 0.0) & (side[..., 1] < 0.0)
        theta = np.where(on_slit, TWO_PI, theta)
    return r, theta


def _grad_from_polar(r, theta, lam, W, Wp):
    """Cartesian gradient of r^lam * W(theta) given W and W'."""
    c = np.cos(theta)
    s = np.sin(theta)
    rad = r ** (lam - 1.0)
    gx = rad * (lam * c * W - s * Wp)
    gy = rad * (lam * s * W + c * Wp)
    return gx, gy


# -- corner singularity on the unit square / slit singularity on a crack ----
#
# The velocity 1.5 * sqrt(r) * (A(theta), B(theta)) with
#   A = cos(theta/2) - cos(3 theta/2)
#   B = 3 sin(theta/2) - sin(3 theta/2)
# and pressure -6 cos(theta/2) / sqrt(r) solve the homogeneous Stokes
# equations (nu = 1, f = 0) with zero divergence; the velocity vanishes on
# both rays theta = 0 and theta = 2 pi while the pressure traces there are
# -6/sqrt(r) and +6/sqrt(r).


def _ab(theta):
    A = np.cos(0.5 * theta) - np.cos(1.5 * theta)
    B = 3.0 * np.sin(0.5 * theta) - np.sin(1.5 * theta)
    Ap = -0.5 * np.sin(0.5 * theta) + 1.5 * np.sin(1.5 * theta)
    Bp = 1.5 * (np.cos(0.5 * theta) - np.cos(1.5 * theta))
    return A, B, Ap, Bp


def _sqrt_singular_velocity(branch_hi):
    def velocity(pts, side=None):
        r, theta = _polar(pts, branch_hi, side)
        A, B, _, _ = _ab(theta)
        fac = 1.5 * np.sqrt(r)
        return np.stack([fac * A, fac * B], axis=-1)
    return velocity


def _sqrt_singular_velocity_gradient(branch_hi):
    def velocity_gradient(pts, side=None):
        r, theta = _polar(pts, branch_hi, side)
        A, B, Ap, Bp = _ab(theta)
        g = np.empty(r.shape + (2, 2))
        g[..., 0, 0], g[..., 0, 1] = _grad_from_polar(r, theta, 0.5, 1.5 * A, 1.5 * Ap)
        g[..., 1, 0], g[..., 1, 1] = _grad_from_polar(r, theta, 0.5, 1.5 * B, 1.5 * Bp)
        return g
    return velocity_gradient


def _sqrt_singular_pressure(branch_hi):
    def pressure(pts, side=None):
        r, theta = _polar(pts, branch_hi, side)
        return -6.0 * np.cos(0.5 * theta) / np.sqrt(r)
    return pressure


def case_square_min_reg():
    """Zero body force, velocity ~ sqrt(r) at the origin corner of (0,1)^2."""
    return ExactSolution(
        name="square-mr", nu=1.0,
        velocity=_sqrt_singular_velocity(0.5 * math.pi),
        velocity_gradient=_sqrt_singular_velocity_gradient(0.5 * math.pi),
        pressure=_sqrt_singular_pressure(0.5 * math.pi),
        body_force=None,
        singular_points=((0.0, 0.0),),
        theta_branch=(0.0, 0.5 * math.pi),
        helmholtz_projection_is_zero=True,
        mesh_factory=meshmod.unit_square_mesh,
        default_n0=2)


def case_cracked_square():
    """Same singular pair on the cracked square, full branch (0, 2 pi)."""
    return ExactSolution(
        name="crack", nu=1.0,
        velocity=_sqrt_singular_velocity(TWO_PI),
        velocity_gradient=_sqrt_singular_velocity_gradient(TWO_PI),
        pressure=_sqrt_singular_pressure(TWO_PI),
        body_force=None,
        singular_points=((0.0, 0.0),),
        theta_branch=(0.0, TWO_PI),
        helmholtz_projection_is_zero=True,
        mesh_factory=meshmod.cracked_square_mesh,
        default_n0=4)


# -- L-shaped domain -----------------------------------------------------
#
# Velocity r^lam * (U(theta), V(theta)) derived from the stream function
# r^(1+lam) * psi(theta); lam is the smallest positive root of
# sin(lam w) + lam sin(w) = 0 with opening w = 3 pi / 2, stored as the
# rational approximation 856399/1572864. The pressure splits into the
# harmonic-conjugate part p1 balancing -nu lap(u) and a smooth part
# p2 = x^3 + y^3 whose gradient is the entire body force.

LSHAPE_LAMBDA = 856399.0 / 1572864.0
LSHAPE_OMEGA = 1.5 * math.pi
_COS_LW = math.cos(LSHAPE_LAMBDA * LSHAPE_OMEGA)


def _psi_derivatives(theta):
    lp = 1.0 + LSHAPE_LAMBDA
    lm = 1.0 - LSHAPE_LAMBDA
    sp = np.sin(lp * theta)
    cp = np.cos(lp * theta)
    sm = np.sin(lm * theta)
    cm = np.cos(lm * theta)
    psi = sp * _COS_LW / lp - cp - sm * _COS_LW / lm + cm
    psi1 = _COS_LW * (cp - cm) + lp * sp - lm * sm
    psi2 = _COS_LW * (-lp * sp + lm * sm) + lp * lp * cp - lm * lm * cm
    psi3 = _COS_LW * (-lp * lp * cp + lm * lm * cm) - lp ** 3 * sp + lm ** 3 * sm
    return psi, psi1, psi2, psi3


def _lshape_uv(theta):
    lam = LSHAPE_LAMBDA
    psi, psi1, psi2, _ = _psi_derivatives(theta)
    c = np.cos(theta)
    s = np.sin(theta)
    U = (1.0 + lam) * s * psi + c * psi1
    V = -(1.0 + lam) * c * psi + s * psi1
    Up = (1.0 + lam) * c * psi + lam * s * psi1 + c * psi2
    Vp = (1.0 + lam) * s * psi - lam * c * psi1 + s * psi2
    return U, V, Up, Vp


def _lshape_velocity(pts, side=None):
    r, theta = _polar(pts, LSHAPE_OMEGA, side)
    U, V, _, _ = _lshape_uv(theta)
    rad = r ** LSHAPE_LAMBDA
    return np.stack([rad * U, rad * V], axis=-1)


def _lshape_velocity_gradient(pts, side=None):
    r, theta = _polar(pts, LSHAPE_OMEGA, side)
    U, V, Up, Vp = _lshape_uv(theta)
    g = np.empty(r.shape + (2, 2))
    g[..., 0, 0], g[..., 0, 1] = _grad_from_polar(r, theta, LSHAPE_LAMBDA, U, Up)
    g[..., 1, 0], g[..., 1, 1] = _grad_from_polar(r, theta, LSHAPE_LAMBDA, V, Vp)
    return g


def _lshape_pressure_singular(pts, side=None):
    lam = LSHAPE_LAMBDA
    r, theta = _polar(pts, LSHAPE_OMEGA, side)
    _, psi1, _, psi3 = _psi_derivatives(theta)
    return -(r ** (lam - 1.0)) * ((1.0 + lam) ** 2 * psi1 + psi3) / (1.0 - lam)


def _lshape_pressure_smooth(pts):
    pts = np.asarray(pts, dtype=float)
    return pts[..., 0] ** 3 + pts[..., 1] ** 3


def _lshape_body_force(pts):
    pts = np.asarray(pts, dtype=float)
    return np.stack([3.0 * pts[..., 0] ** 2, 3.0 * pts[..., 1] ** 2], axis=-1)


def case_lshape(nu=1.0):
    """L-shaped domain; f is the gradient of x^3 + y^3, so the velocity of a
    pressure-robust method does not depend on nu."""
    def pressure(pts, side=None):
        return nu * _lshape_pressure_singular(pts, side) + _lshape_pressure_smooth(pts)
    return ExactSolution(
        name="lshape", nu=nu,
        velocity=_lshape_velocity,
        velocity_gradient=_lshape_velocity_gradient,
        pressure=pressure,
        body_force=_lshape_body_force,
        singular_points=((0.0, 0.0),),
        theta_branch=(0.0, LSHAPE_OMEGA),
        helmholtz_projection_is_zero=True,
        mesh_factory=meshmod.lshape_mesh,
        default_n0=2)


CASE_FACTORIES = {
    "square-mr": case_square_min_reg,
    "crack": case_cracked_square,
    "lshape": case_lshape,
}


def get_case(name, nu=1.0):
    if name not in CASE_FACTORIES:
        raise KeyError("unknown case %r (expected one of %s)" % (name, ", ".join(sorted(CASE_FACTORIES))))
    if name == "lshape":
        return case_lshape(nu)
    case = CASE_FACTORIES[name]()
    if nu != case.nu:
        raise ValueError("case %r is defined for nu = %r only" % (name, case.nu))
    return case


# -- benchmark drivers -----------------------------------------------------


@dataclass
class LevelResult:
    level: int
    cells: int
    h: float
    dofs_condensed: int
    report: object                      # analysis.ErrorReport
    velocity: np.ndarray = field(default=None, repr=False)


@dataclass
class ConvergenceReport:
    case: str
    method: str
    degree: int
    nu: float
    alpha: float
    levels: list

    CSV_COLUMNS = (
        "level", "cells", "h", "dofs_condensed",
        "err_u_l2", "rate_u_l2", "err_u_energy", "rate_u_energy",
        "err_p_l2", "rate_p_l2", "div_sup", "normal_jump_sup")

    def rates(self, field_name):
        from .analysis import eoc
        return eoc([getattr(lv.report, field_name) for lv in self.levels])

    def table(self):
        """Rows of plain values matching CSV_COLUMNS; rates are None on the
        first level."""
        r_l2 = self.rates("err_u_l2")
        r_en = self.rates("err_u_energy")
        r_p = self.rates("err_p_l2")
        rows = []
        for i, lv in enumerate(self.levels):
            rep = lv.report
            rows.append({
                "level": lv.level, "cells": lv.cells, "h": lv.h,
                "dofs_condensed": lv.dofs_condensed,
                "err_u_l2": rep.err_u_l2, "rate_u_l2": r_l2[i],
                "err_u_energy": rep.err_u_energy, "rate_u_energy": r_en[i],
                "err_p_l2": rep.err_p_l2, "rate_p_l2": r_p[i],
                "div_sup": rep.div_sup, "normal_jump_sup": rep.normal_jump_sup,
            })
        return rows


@dataclass
class RobustnessReport:
    blocks: list                        # (method, nu, ConvergenceReport)
    max_rel_velocity_diff: float        # between the two robust-method runs


def _solve_level(case, cfg, mesh, keep_velocity=False):
    from .analysis import error_report
    from .solver import solve_condensed
    from .spaces import build_spaces, interpolate_facet_dirichlet

    spaces = build_spaces(mesh, cfg)
    bc = interpolate_facet_dirichlet(case, mesh, spaces.facet_velocity)
    sol, info = solve_condensed(mesh, cfg, spaces, f=case.body_force, bc=bc)
    rep = error_report(case, sol, mesh)
    vel = sol.velocity_coefficients() if keep_velocity else None
    return rep, info, vel


def mesh_hierarchy(case, levels, n0=None):
    meshes = [case.make_mesh(n0)]
    for _ in range(levels - 1):
        meshes.append(meshmod.refine_uniform(meshes[-1]))
    return meshes


def run_convergence(case, cfg, levels, n0=None, keep_velocity=False, meshes=None):
    """Solve on a hierarchy of uniformly refined meshes and collect error
    reports per level."""
    if meshes is None:
        meshes = mesh_hierarchy(case, levels, n0)
    out = []
    for lvl, mesh in enumerate(meshes):
        rep, info, vel = _solve_level(case, cfg, mesh, keep_velocity)
        out.append(LevelResult(
            level=lvl, cells=mesh.n_cells, h=mesh.h_max(),
            dofs_condensed=info.n_condensed, report=rep, velocity=vel))
    return ConvergenceReport(
        case=case.name, method=cfg.method, degree=cfg.degree, nu=cfg.nu,
        alpha=cfg.alpha, levels=out)


def run_pressure_robustness(degree=1, levels=3, n0=None,
                            nus=(1.0, 1e-5), methods=("edg", "edg-hdg"),
                            robust_method="edg-hdg", case_name="lshape"):
    """Convergence runs of each method at each viscosity on shared meshes,
    plus the largest relative difference between the velocity coefficient
    vectors of the robust method across viscosities (per mesh level)."""
    from .spaces import MethodConfig

    base_case = get_case(case_name, nus[0])
    meshes = mesh_hierarchy(base_case, levels, n0)
    blocks = []
    robust_vel = {}
    for method in methods:
        for nu in nus:
            case = get_case(case_name, nu)
            cfg = MethodConfig(method=method, degree=degree, nu=nu)
            keep = method == robust_method
            report = run_convergence(case, cfg, levels, meshes=meshes,
                                     keep_velocity=keep)
            if keep:
                robust_vel[nu] = [lv.velocity for lv in report.levels]
            blocks.append((method, nu, report))
    diff = 0.0
    ref_nu = nus[0]
    for nu in nus[1:]:
        for va, vb in zip(robust_vel[ref_nu], robust_vel[nu]):
            scale = float(np.abs(va).max()) or 1.0
            diff = max(diff, float(np.abs(va - vb).max()) / scale)
    return RobustnessReport(blocks=blocks, max_rel_velocity_diff=diff)
