"""A family of rotationally symmetric hypersurfaces with a known foliation.

The family lives in R^(2n+1) and is served in two charts: a polar chart
where the structure formulas are short, and a cartesian chart that stays
regular on the coordinate axes, which is where all the interesting
dynamics sits (the zeros and the closed orbits are polar-degenerate).
The divergence sign of the characteristic field does not depend on the
chart or on the choice of volume, so census signs carry over.

The census exploits the circle symmetry. Closed orbits are rigid
rotations, so their location reduces to a one dimensional root find and
their monodromy has the exact rotating-frame form exp(T (J - w G)) with
G the rotation generator. This is not a shortcut for convenience: the
transverse log-multipliers are of size 2 pi / sqrt(eps) per loop, so a
shooting method would have to invert a return map that amplifies
floating point noise by seventeen orders of magnitude. The module keeps
find_orbit available for the perturbation model, where the multipliers
are moderate, and the test suite demonstrates that shooting honestly
refuses the stiff cases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import certify, policy
from .contact import (ContactScene, FoliationField, Hypersurface,
                      alpha_data_at, graph_foliation_check,
                      hamiltonian_residuals)
from .dynamics import (EventSpec, Flow, OrbitInfo, RefinedOrbit,
                       _integrate_core, classify_orbit, classify_zero,
                       find_orbit, find_zeros, wrap_diff)
from .errors import ConstructiveFailure, NoOrbitError, PolarDomainError
from .expr import Call
from .exterior import Chart, KForm, ScalarField


def _fn(name: str, f: ScalarField) -> ScalarField:
    return ScalarField(f.chart, Call(name, [f.node]))


# scene construction ----------------------------------------------------

@dataclass(frozen=True)
class MoriConstants:
    """Closed-form landmarks of the reduced flow for one (n, eps)."""

    axis_z: float        # heights of the two zeros on the symmetry axis
    orbit_z: float       # heights of the two closed orbit circles
    ring_r: float        # radius of the saddle ring of the reduced flow
    ring_rho: float      # transverse radius of the saddle ring
    torus_slope: float   # fiber over base angular rate on the invariant torus


class MoriScene:
    """Both charts of one member of the family, with their foliations."""

    def __init__(self, n: int, eps: float,
                 tols: policy.Tolerances = policy.DEFAULT):
        if int(n) != n or n < 2:
            raise ValueError("n must be an integer >= 2")
        if not 0.0 < eps <= 0.3:
            raise ValueError("eps must lie in (0, 0.3]")
        if eps > 0.15:
            warnings.warn("eps > 0.15 leaves little room between the shell "
                          "and the model core; expect poor conditioning")
        self.n = int(n)
        self.eps = float(eps)
        self.tols = tols

        x = (1.0 + eps) - math.sqrt(eps * (1.0 + eps))   # ring radius squared
        self.constants = MoriConstants(
            axis_z=eps * math.sqrt(1.0 + eps),
            orbit_z=eps ** 1.5,
            ring_r=math.sqrt(x),
            ring_rho=eps * math.sqrt(1.0 + eps - x),
            torus_slope=(2.0 * x * x - 2.0 * x + 1.0)
                        / (eps ** 2 * (1.0 + 2.0 * eps)))
        # closer to an axis than this, use the cartesian chart
        self.polar_floor = min(0.05, 0.6 * eps * math.sqrt((1.0 + eps)
                                                           / (n - 1)))

        e2 = eps ** -2
        m = n - 1

        pnames = ["z", "r", "theta"]
        for i in range(1, n):
            pnames += [f"rho{i}", f"phi{i}"]
        pang = ["theta"] + [f"phi{i}" for i in range(1, n)]
        pch = Chart(pnames, angular=pang)
        z, r = pch.var("z"), pch.var("r")
        comps = {(0,): r * r * 2.0 - 1.0,
                 (2,): r * r * (r * r - 1.0)}
        rho_sq = None
        for i in range(1, n):
            rho = pch.var(f"rho{i}")
            comps[(pch.index(f"phi{i}"),)] = rho * rho
            rho_sq = rho * rho if rho_sq is None else rho_sq + rho * rho
        alpha_p = KForm(pch, 1, comps)
        Fp = r * r + (z * z + rho_sq) * e2 - (1.0 + eps)
        zmax = 1.5 * self.constants.axis_z
        pdom = {"z": (-zmax, zmax), "r": (0.0, 1.2),
                **{f"rho{i}": (0.0, 0.8) for i in range(1, n)}}
        self.polar = ContactScene(pch, alpha_p, name=f"mori-polar-n{n}",
                                  domain=pdom, params={"eps": eps, "n": n})
        self.surface_polar = Hypersurface(ScalarField(pch, Fp.node),
                                          label="shell")

        cnames = ["x", "y"]
        for i in range(1, n):
            cnames += [f"u{i}", f"v{i}"]
        cnames.append("z")
        cch = Chart(cnames)
        xx, yy, zz = cch.var("x"), cch.var("y"), cch.var("z")
        rr = xx * xx + yy * yy
        comps = {(cch.index("z"),): rr * 2.0 - 1.0,
                 (cch.index("x"),): -((rr - 1.0) * yy),
                 (cch.index("y"),): (rr - 1.0) * xx}
        usum = None
        for i in range(1, n):
            u, v = cch.var(f"u{i}"), cch.var(f"v{i}")
            comps[(cch.index(f"u{i}"),)] = -v
            comps[(cch.index(f"v{i}"),)] = u
            s = u * u + v * v
            usum = s if usum is None else usum + s
        alpha_c = KForm(cch, 1, comps)
        Fc = rr + (zz * zz + usum) * e2 - (1.0 + eps)
        cdom = {"x": (-1.2, 1.2), "y": (-1.2, 1.2), "z": (-zmax, zmax),
                **{k: (-0.8, 0.8) for k in cnames[2:-1]}}
        self.cartesian = ContactScene(cch, alpha_c, name=f"mori-cartesian-n{n}",
                                      domain=cdom, params={"eps": eps, "n": n})
        self.surface_cartesian = Hypersurface(ScalarField(cch, Fc.node),
                                              label="shell")

        self.field_polar = FoliationField(self.polar, self.surface_polar, tols)
        self.field_cartesian = FoliationField(self.cartesian,
                                              self.surface_cartesian, tols)

    # point helpers -----------------------------------------------------

    def polar_point(self, z: float, r: float, theta: float,
                    rho, phi) -> np.ndarray:
        """Assemble a polar point; None entries of rho are filled from the
        shell constraint, split evenly."""
        rho = list(rho)
        phi = list(phi)
        if len(rho) != self.n - 1 or len(phi) != self.n - 1:
            raise ValueError(f"need {self.n - 1} transverse radii and angles")
        budget = self.eps ** 2 * (1.0 + self.eps - r * r) - z * z
        known = sum(v * v for v in rho if v is not None)
        holes = [i for i, v in enumerate(rho) if v is None]
        if holes:
            left = (budget - known) / len(holes)
            if left <= 0.0:
                raise ValueError("no transverse budget left at this (z, r)")
            for i in holes:
                rho[i] = math.sqrt(left)
        p = np.empty(self.polar.chart.dim)
        p[0], p[1], p[2] = z, r, theta
        for i in range(self.n - 1):
            p[3 + 2 * i] = rho[i]
            p[4 + 2 * i] = phi[i]
        return p

    def cartesian_point(self, polar_pt) -> np.ndarray:
        z, r, th = polar_pt[0], polar_pt[1], polar_pt[2]
        q = np.empty(self.cartesian.chart.dim)
        q[0], q[1] = r * math.cos(th), r * math.sin(th)
        for i in range(self.n - 1):
            rho, ph = polar_pt[3 + 2 * i], polar_pt[4 + 2 * i]
            q[2 + 2 * i] = rho * math.cos(ph)
            q[3 + 2 * i] = rho * math.sin(ph)
        q[-1] = z
        return q

    def _transition_jacobian(self, polar_pt) -> np.ndarray:
        """d(cartesian)/d(polar) at a polar point."""
        dc, dp = self.cartesian.chart.dim, self.polar.chart.dim
        r, th = polar_pt[1], polar_pt[2]
        J = np.zeros((dc, dp))
        J[0, 1], J[0, 2] = math.cos(th), -r * math.sin(th)
        J[1, 1], J[1, 2] = math.sin(th), r * math.cos(th)
        for i in range(self.n - 1):
            rho, ph = polar_pt[3 + 2 * i], polar_pt[4 + 2 * i]
            iu, ir = 2 + 2 * i, 3 + 2 * i
            J[iu, ir], J[iu, ir + 1] = math.cos(ph), -rho * math.sin(ph)
            J[iu + 1, ir], J[iu + 1, ir + 1] = math.sin(ph), rho * math.cos(ph)
        J[-1, 0] = 1.0
        return J


def mori_scene(n: int = 2, eps: float = 0.1,
               tols: policy.Tolerances = policy.DEFAULT) -> MoriScene:
    """Build one member of the family in both charts."""
    return MoriScene(n, eps, tols)


def cartesian_lift(scene: MoriScene, zrr, theta: float = 0.0,
                   phi: float = 0.0) -> np.ndarray:
    """Lift a reduced point (z, r, rho) to the cartesian chart.

    The transverse mass rho is split evenly over the n-1 planes, all at
    phase phi; for n = 2 this is just (u, v) = rho (cos phi, sin phi).
    """
    z, r, rho = zrr
    q = np.empty(scene.cartesian.chart.dim)
    q[0], q[1] = r * math.cos(theta), r * math.sin(theta)
    each = rho / math.sqrt(scene.n - 1)
    for i in range(scene.n - 1):
        q[2 + 2 * i] = each * math.cos(phi)
        q[3 + 2 * i] = each * math.sin(phi)
    q[-1] = z
    return q


# the reference field ----------------------------------------------------

def reference_field(scene: MoriScene, point) -> np.ndarray:
    """The closed-form representative of the characteristic direction.

    Polar components, valid away from the coordinate axes. On the shell
    it is tangent and never vanishes, so it fixes the direction of the
    foliation everywhere the polar chart is honest.
    """
    p = np.asarray(point, dtype=float)
    eps, e2 = scene.eps, scene.eps ** -2
    z, r = p[0], p[1]
    floor = scene.polar_floor
    if r < floor or any(p[3 + 2 * i] < floor for i in range(scene.n - 1)):
        raise PolarDomainError(
            f"point sits within {floor:g} of a polar axis; evaluate on the "
            "cartesian chart instead")
    out = np.zeros_like(p)
    r2 = r * r
    out[0] = (r2 - 1.0) ** 2 + (2.0 * r2 - 1.0) * (e2 * z * z - eps)
    out[1] = e2 * r * (r2 - 1.0) * z
    out[2] = 1.0 + 2.0 * eps - 2.0 * e2 * z * z
    for i in range(scene.n - 1):
        out[3 + 2 * i] = e2 * (2.0 * r2 - 1.0) * z * p[3 + 2 * i]
        out[4 + 2 * i] = e2 * (2.0 * r2 * r2 - 2.0 * r2 + 1.0)
    return out


def sample_surface_polar(scene: MoriScene, rng, count: int) -> list:
    """Polar-regular random points on the shell.

    Transverse radii and height are drawn inside the constraint budget,
    then r picks up the slack, so no rejection loop is needed.
    """
    eps, n = scene.eps, scene.n
    budget = eps ** 2 * (1.0 + eps)
    lo = scene.polar_floor * 1.05
    hi = math.sqrt(0.5 * budget / (n - 1))
    if not lo < hi:
        raise ConstructiveFailure("polar floor eats the whole shell budget")
    pts = []
    for _ in range(count):
        rho = rng.uniform(lo, hi, n - 1)
        used = float(np.sum(rho * rho))
        z = math.copysign(math.sqrt(rng.uniform(0.0, 0.9) * (budget - used)),
                          rng.uniform(-1.0, 1.0))
        r = math.sqrt(1.0 + eps - (z * z + used) / eps ** 2)
        ang = rng.uniform(0.0, 2.0 * math.pi, n)
        pts.append(scene.polar_point(z, r, ang[0], list(rho), list(ang[1:])))
    return pts


def direction_match(scene: MoriScene, count: int = 200, rng=None,
                    mutate=None) -> dict:
    """Compare the solved polar direction against the reference field.

    Fits a pointwise scale factor and reports the worst relative
    deviation plus the factor range; the factor must come out positive
    everywhere for the orientations to agree. mutate(point, vec),
    if given, tampers with the reference before the comparison, which
    is how the test suite checks the comparison has teeth.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    fmin, fmax = math.inf, -math.inf
    for p in sample_surface_polar(scene, rng, count):
        X = scene.field_polar.vector(p)
        ref = reference_field(scene, p)
        if mutate is not None:
            ref = np.asarray(mutate(p, ref), dtype=float)
        c = float(np.dot(X, ref) / np.dot(ref, ref))
        dev = float(np.linalg.norm(X - c * ref) / np.linalg.norm(X))
        worst = max(worst, dev)
        fmin, fmax = min(fmin, c), max(fmax, c)
    return {"samples": count, "max_angle": worst,
            "factor_min": fmin, "factor_max": fmax}


def chart_agreement(scene: MoriScene, count: int = 100, rng=None) -> dict:
    """Polar and cartesian charts against each other at random shell points.

    Checks that the cartesian form pulls back to the polar form, that
    the defining functions agree, and that the two solved directions
    are positively proportional under the transition map.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    worst_a = worst_f = worst_x = 0.0
    fmin = math.inf
    for p in sample_surface_polar(scene, rng, count):
        q = scene.cartesian_point(p)
        J = scene._transition_jacobian(p)
        a_p, _ = alpha_data_at(scene.polar, p)
        a_c, _ = alpha_data_at(scene.cartesian, q)
        pb = J.T @ a_c
        worst_a = max(worst_a, float(np.max(np.abs(pb - a_p))
                                     / max(1.0, np.max(np.abs(a_p)))))
        worst_f = max(worst_f, abs(float(scene.surface_polar.F(list(p)))
                                   - float(scene.surface_cartesian.F(list(q)))))
        Xp = J @ scene.field_polar.vector(p)
        Xc = scene.field_cartesian.vector(q)
        c = float(np.dot(Xc, Xp) / np.dot(Xp, Xp))
        fmin = min(fmin, c)
        worst_x = max(worst_x, float(np.linalg.norm(Xc - c * Xp)
                                     / np.linalg.norm(Xc)))
    return {"max_pullback_dev": worst_a, "max_level_dev": worst_f,
            "direction_dev": worst_x, "factor_min": fmin, "samples": count}


# the reduced flow -------------------------------------------------------

def pushforward_field(scene: MoriScene, zrr) -> np.ndarray:
    """The reduced (z, r, rho) components of the reference field."""
    z, r, rho = (float(v) for v in zrr)
    eps, e2 = scene.eps, scene.eps ** -2
    r2 = r * r
    return np.array([
        (r2 - 1.0) ** 2 + (2.0 * r2 - 1.0) * (e2 * z * z - eps),
        e2 * r * (r2 - 1.0) * z,
        e2 * (2.0 * r2 - 1.0) * z * rho,
    ])


def reduced_constraint(scene: MoriScene, zrr) -> float:
    z, r, rho = (float(v) for v in zrr)
    return r * r + (z * z + rho * rho) / scene.eps ** 2 - (1.0 + scene.eps)


def _reduced_rates(scene: MoriScene, z: float, rho: float):
    """Engine (zdot, rhodot) on the shell slice theta = phi = 0."""
    rr = 1.0 + scene.eps - (z * z + rho * rho) / scene.eps ** 2
    if rr <= 0.0:
        raise ConstructiveFailure("reduced point left the shell")
    p = cartesian_lift(scene, (z, math.sqrt(rr), rho))
    X = scene.field_cartesian.vector(p)
    each = rho / math.sqrt(scene.n - 1)
    rdot = sum(p[2 + 2 * i] * X[2 + 2 * i] + p[3 + 2 * i] * X[3 + 2 * i]
               for i in range(scene.n - 1))
    return float(X[-1]), float(rdot / rho), p, X


def torus_base_point(scene: MoriScene,
                     tols: policy.Tolerances = policy.DEFAULT) -> tuple:
    """Newton on the engine's reduced rates for the saddle ring.

    Returns (z, r, rho). Independent of the closed forms in
    MoriConstants apart from the initial guess scale.
    """
    w = np.array([0.0, 0.9 * scene.constants.ring_rho])

    def res(wv):
        zd, rd, _, X = _reduced_rates(scene, wv[0], wv[1])
        return np.array([zd, rd]), float(np.max(np.abs(X)))

    for _ in range(40):
        r0, scale = res(w)
        if float(np.max(np.abs(r0))) < 1e-13 * scale:
            break
        J = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * (1.0 + abs(w[j]))
            wp = w.copy()
            wp[j] += h
            rp, _ = res(wp)
            J[:, j] = (rp - r0) / h
        step = np.linalg.solve(J, -r0)
        w = w + step
    else:
        raise ConstructiveFailure("saddle ring search did not converge")
    z, rho = float(w[0]), float(w[1])
    r = math.sqrt(1.0 + scene.eps - (z * z + rho * rho) / scene.eps ** 2)
    return z, r, rho


def torus_loop_time(scene: MoriScene) -> float:
    """Engine time for one base loop of the invariant torus."""
    z, r, rho = torus_base_point(scene)
    p = cartesian_lift(scene, (z, r, rho), theta=0.3, phi=1.1)
    X = scene.field_cartesian.vector(p)
    thdot = (p[0] * X[1] - p[1] * X[0]) / (r * r)
    return 2.0 * math.pi / abs(float(thdot))


def torus_probe(scene: MoriScene, samples: int = 100, rng=None,
                tols: policy.Tolerances = policy.DEFAULT) -> dict:
    """Invariance and return-map evidence for the torus over the ring.

    All checks are pointwise algebra. A trajectory-based probe is out of
    reach: the transverse saddle exponent per base loop is about 25 at
    eps = 0.1, an e^25 noise amplification, so no computed trajectory
    can shadow the torus for even one loop. What is verified instead: the field is tangent to the
    torus, the two angular rates are constant on it (so first returns
    act by a rigid rotation with unit-modulus fiber multiplier), and the
    rate ratio matches the closed form.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    z0, r0, rho0 = torus_base_point(scene, tols)
    field = scene.field_cartesian
    each = rho0 / math.sqrt(scene.n - 1)
    worst_inv = 0.0
    rates = []
    for _ in range(samples):
        th = float(rng.uniform(0.0, 2.0 * math.pi))
        ph = float(rng.uniform(0.0, 2.0 * math.pi))
        p = cartesian_lift(scene, (z0, r0, rho0), theta=th, phi=ph)
        X = field.vector(p)
        scale = float(np.max(np.abs(X)))
        rdot = (p[0] * X[0] + p[1] * X[1]) / r0
        pdot = sum(p[2 + 2 * i] * X[2 + 2 * i] + p[3 + 2 * i] * X[3 + 2 * i]
                   for i in range(scene.n - 1)) / rho0
        worst_inv = max(worst_inv,
                        max(abs(float(X[-1])), abs(float(rdot)),
                            abs(float(pdot))) / scale)
        thdot = (p[0] * X[1] - p[1] * X[0]) / (r0 * r0)
        phdot = (p[2] * X[3] - p[3] * X[2]) / (each * each)
        rates.append((float(thdot), float(phdot)))
    rates = np.asarray(rates)
    mean = rates.mean(axis=0)
    variation = float(np.max(np.abs(rates - mean)) / np.max(np.abs(mean)))
    slope = float(mean[1] / mean[0])

    # fiber direction against (1 + 2 eps, closed-form slope), one factor
    fac = mean[0] / (1.0 + 2.0 * scene.eps)
    fdev = abs(mean[1] - fac * (1.0 + 2.0 * scene.eps)
               * scene.constants.torus_slope) / abs(mean[1])

    # transverse linearization of the reduced engine flow at the ring
    def red(wv):
        zd, rd, _, _ = _reduced_rates(scene, wv[0], wv[1])
        return np.array([zd, rd])

    w0 = np.array([z0, rho0])
    base = red(w0)
    A = np.empty((2, 2))
    for j in range(2):
        h = 1e-6 * (1.0 + abs(w0[j]))
        wp = w0.copy()
        wp[j] += h
        A[:, j] = (red(wp) - base) / h
    lam = float(np.max(np.real(np.linalg.eigvals(A))))
    loop = 2.0 * math.pi / abs(float(mean[0]))
    note = ("the rate ratio varies continuously with eps, and nothing "
            "downstream depends on whether it is rational; retuning eps to "
            "force rationality is a documented no-op")
    return {"point": (z0, r0, rho0),
            "samples": samples,
            "invariance_residual": worst_inv,
            "angular_rate_variation": variation,
            "slope": slope,
            "fiber_direction_dev": float(fdev),
            "fiber_multiplier": 1.0,
            "transverse_exponent_per_loop": lam * loop,
            "loop_time": loop,
            "slope_note": note}


def tune_torus_slope(scene: MoriScene, target=None) -> str:
    """Historically one adjusts eps until the torus slope is irrational.

    Nothing in this package consumes the rationality of the slope, so
    there is nothing to adjust; this is a documented no-op that leaves
    the scene untouched and says so.
    """
    return (f"torus slope at eps = {scene.eps:g} is "
            f"{scene.constants.torus_slope:.12g}; adjustment is a no-op "
            "because no computed quantity depends on its rationality"
            + (f" (requested target: {target})" if target is not None else ""))


def torus_recurrence_candidate(scene: MoriScene):
    """A recurrence candidate for the certificate machinery.

    Carries one point of the invariant torus and a verifier that
    re-derives the rigid-rotation evidence on demand.
    """
    z0, r0, rho0 = torus_base_point(scene)
    point = cartesian_lift(scene, (z0, r0, rho0), theta=0.0, phi=0.0)

    def verify(field, tols):
        rep = torus_probe(scene, samples=40, rng=np.random.default_rng(202),
                          tols=tols)
        if rep["invariance_residual"] > 1e-6:
            return None
        return {"kind": "invariant torus",
                "unit_modulus_fiber_multiplier": rep["fiber_multiplier"],
                "slope": rep["slope"],
                "transverse_exponent_per_loop":
                    rep["transverse_exponent_per_loop"],
                "angular_rate_variation": rep["angular_rate_variation"]}

    return certify.RecurrenceCandidate(
        point=point,
        description="invariant torus over the reduced saddle ring",
        verify=verify)


# census -----------------------------------------------------------------

@dataclass
class CensusOrbit:
    """A closed orbit element: classification plus its sampled loop."""

    info: object                 # dynamics.OrbitInfo
    loop: np.ndarray             # points along the closed curve
    omega: float                 # engine angular rate of the rigid rotation
    evidence: dict


def _edge_orbit(scene: MoriScene, sign: float,
                tols: policy.Tolerances) -> CensusOrbit:
    field = scene.field_cartesian
    eps = scene.eps
    d = scene.cartesian.chart.dim

    def lift(z):
        rr = 1.0 + eps - z * z / eps ** 2
        q = np.zeros(d)
        q[0], q[-1] = math.sqrt(rr), z
        return q

    def zdot(z):
        return float(field.vector(lift(z))[-1])

    z = sign * 0.9 * eps ** 1.5
    for _ in range(60):
        f0 = zdot(z)
        scale = float(np.max(np.abs(field.vector(lift(z)))))
        if abs(f0) < 1e-13 * scale:
            break
        h = 1e-9 * (1.0 + abs(z))
        dz = (zdot(z + h) - f0) / h
        z = z - f0 / dz
    else:
        raise ConstructiveFailure("edge orbit height search stalled")

    p = lift(z)
    X, J = field.vector_and_jacobian(p)
    omega = float(X[1] / p[0])
    scale = float(np.max(np.abs(X)))
    transverse = max(abs(float(X[i])) for i in range(d) if i != 1) / scale
    T = 2.0 * math.pi / abs(omega)

    G = np.zeros((d, d))
    G[0, 1], G[1, 0] = -1.0, 1.0
    A = J - omega * G
    kres = float(np.max(np.abs(A @ X)) / (np.max(np.abs(A)) * scale))

    # divergence is constant along the rotation orbit; spot-check that
    div = field.divergence(p)
    rotdev = 0.0
    for th in (1.1, 2.7):
        c, s = math.cos(th), math.sin(th)
        q = p.copy()
        q[0], q[1] = c * p[0] - s * p[1], s * p[0] + c * p[1]
        rotdev = max(rotdev, abs(field.divergence(q) - div) / abs(div))

    # classify in the expanding time direction: a multiplier of e^-40
    # sits below the roundoff floor of the section projection, while its
    # inverse is perfectly representable. The return map of the reversed
    # flow is exactly the inverse on the same section, so the forward
    # data comes back by inverting.
    expanding = div > 0.0
    tsign = 1.0 if expanding else -1.0
    M = expm(tsign * T * A)
    orbit = RefinedOrbit(point=p, period=T, residual=transverse,
                         monodromy=M, div_integral=tsign * T * div)
    raw = classify_orbit(field, orbit, tols)
    if expanding:
        info = raw
    else:
        mult = 1.0 / raw.multipliers
        moduli = np.abs(mult)
        band = tols.hyperbolic_band
        C = 1.0 / raw.C
        info = OrbitInfo(point=p, period=T, multipliers=mult, C=C,
                         det_residual=raw.det_residual,
                         pairing_residual=raw.pairing_residual,
                         div_residual=raw.div_residual,
                         positive=bool(C > 1.0),
                         liouville_sign=(1 if C > 1.0 else -1),
                         stable_index=int(np.sum(moduli < 1.0 - band)) + 1,
                         hyperbolic=bool(np.all(np.abs(moduli - 1.0) > band)))
    th = np.linspace(0.0, 2.0 * math.pi, 97)[:-1]
    loop = np.zeros((96, d))
    loop[:, 0] = p[0] * np.cos(th)
    loop[:, 1] = p[0] * np.sin(th)
    loop[:, -1] = z
    return CensusOrbit(info=info, loop=loop, omega=omega,
                       evidence={"transverse_residual": transverse,
                                 "generator_kernel_residual": kres,
                                 "divergence_rotation_dev": rotdev})


def census(scene: MoriScene, tols: policy.Tolerances = policy.DEFAULT,
           rng=None) -> dict:
    """All zeros and closed orbits of the foliation on the shell.

    Zeros come from Newton refinement over axis seeds plus a random
    sweep; orbits from the rotation symmetry, with monodromy in the
    rotating frame. See the module docstring for why shooting is not
    an option here.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    field = scene.field_cartesian
    d = scene.cartesian.chart.dim
    az = scene.constants.axis_z
    seeds = []
    for s in (-1.1, -0.9, 0.9, 1.1):
        q = np.zeros(d)
        q[-1] = s * az
        seeds.append(q)
    sweep = scene.cartesian.sample_points(rng, 12)
    for q in sweep:
        try:
            seeds.append(scene.surface_cartesian.project(q, tols))
        except Exception:
            continue
    pts = find_zeros(field, seeds, tols)
    zeros = [classify_zero(field, p, tols) for p in pts]
    zeros.sort(key=lambda zi: zi.point[-1])
    orbits = [_edge_orbit(scene, -1.0, tols), _edge_orbit(scene, +1.0, tols)]
    return {"zeros": zeros, "orbits": orbits}


def verify_orbit_closure(scene: MoriScene, orbits,
                         tols: policy.Tolerances = policy.DEFAULT) -> dict:
    """Dynamic evidence that the census orbits close up.

    Integrates one full loop in the contracting time direction of each
    orbit (the expanding direction is hopeless by design) and reports
    the worst return gap and the deviation of the measured return time
    from the rotation period.
    """
    field = scene.field_cartesian
    worst_gap = worst_T = 0.0
    for o in orbits:
        sense = -1 if o.info.positive else +1
        flow = Flow(field, tols, sense=sense)
        p = np.asarray(o.info.point, dtype=float)
        T = o.info.period
        direction = 1 if sense * o.omega > 0.0 else -1
        ev = EventSpec(fn=lambda y: float(y[1]), direction=direction,
                       terminal=True)
        res = flow.integrate(p, 1.4 * T, events=[ev])
        if res.status != "event":
            raise ConstructiveFailure("orbit loop produced no section return")
        gap = float(np.max(np.abs(res.y - p)))
        worst_gap = max(worst_gap, gap / max(1.0, float(np.max(np.abs(p)))))
        worst_T = max(worst_T, abs(res.t - T) / T)
    return {"max_return_gap": worst_gap, "max_period_dev": worst_T}


def phase_portrait_data(scene: MoriScene, trajectories: int = 6,
                        span: float = 2.5,
                        tols: policy.Tolerances = policy.DEFAULT) -> list:
    """Reduced (z, r, rho) trajectories for plotting, as a list of rows."""
    eps = scene.eps
    az, rr0 = scene.constants.axis_z, scene.constants.ring_rho

    def rhs(y):
        return pushforward_field(scene, y)

    def proj(y):
        out = y.copy()
        for _ in range(10):
            c = reduced_constraint(scene, out)
            if abs(c) < 1e-13:
                return out
            g = np.array([2.0 * out[0] / eps ** 2, 2.0 * out[1],
                          2.0 * out[2] / eps ** 2])
            out = out - (c / float(g @ g)) * g
        return out

    ptols = policy.replace(tols, ode_max_step=0.05)
    rows = []
    for k in range(trajectories):
        f = (k + 0.5) / trajectories
        z0 = (2.0 * f - 1.0) * 0.75 * az
        rho0 = rr0 * (0.6 + 0.3 * f)
        rr = 1.0 + eps - (z0 * z0 + rho0 * rho0) / eps ** 2
        if rr <= 0.04:
            continue
        y0 = proj(np.array([z0, math.sqrt(rr), rho0]))
        for sgn in (+1.0, -1.0):
            res = _integrate_core(lambda y: sgn * rhs(y), y0, span, ptols,
                                  post=proj, record=True)
            for t, y in res.path:
                rows.append({"id": f"{k}{'+' if sgn > 0 else '-'}",
                             "t": sgn * t, "z": float(y[0]),
                             "r": float(y[1]), "rho": float(y[2])})
    return rows


# the column perturbation -------------------------------------------------

@dataclass(frozen=True)
class PerturbationSpec:
    """Shape parameters of the compactly supported contact Hamiltonian.

    The profile lives on a circle of the given circumference; delta
    bounds the sup norm of the Hamiltonian and of its first derivatives,
    and everything else fixes where the bump lives and how fast it dies.
    The defaults keep every slope bound proportional to delta alone: a
    short circle cannot host a bump that is simultaneously C1-small,
    numerically supported inside the column, and large enough in
    integral to give usable multiplier margins, which is why the
    circumference is not 2 pi.
    """

    delta: float = 0.05
    circumference: float = 60.0
    column: tuple = (0.5, 59.5)
    bump_scale: float = 1.35
    bump_depth: float = 28.0
    window_edge: float = 18.0
    window_scale: float = 13.5
    box_radius: float = 19.0
    plateau_radius: float = 0.5

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        if not 0.0 < self.column[0] < self.column[1] < self.circumference:
            raise ValueError("column interval must sit inside the circle")
        if min(self.bump_scale, self.bump_depth, self.window_scale) <= 0.0:
            raise ValueError("profile scales must be positive")
        if self.window_edge >= self.box_radius:
            raise ValueError("box must contain the transverse window edge")


def column_bump(spec: PerturbationSpec):
    """The periodic s-profile as a plain vectorized function.

    exp(-mu exp(-D(s)^2 / c^2)) with D a smooth periodic distance to the
    seam s = 0. The double exponential keeps the slope bound independent
    of the suppression depth mu, and the profile is exactly periodic, so
    the integrator never needs to reduce s mod the circumference.
    """
    L, c, mu = spec.circumference, spec.bump_scale, spec.bump_depth
    k = 2.0 * math.pi / L
    amp = 0.5 * (L / math.pi) ** 2

    def chi(s):
        d2 = amp * (1.0 - np.cos(k * np.asarray(s, dtype=float)))
        return np.exp(-mu * np.exp(-d2 / c ** 2))

    return chi


def _column_bump_slope(spec: PerturbationSpec):
    L, c, mu = spec.circumference, spec.bump_scale, spec.bump_depth
    k = 2.0 * math.pi / L

    def slope(s):
        s = np.asarray(s, dtype=float)
        d2 = 0.5 * (L / math.pi) ** 2 * (1.0 - np.cos(k * s))
        inner = np.exp(-d2 / c ** 2)
        return (np.exp(-mu * inner) * mu * inner
                * (L / math.pi) * np.sin(k * s) / c ** 2)

    return slope


def _transverse_window(spec: PerturbationSpec):
    e2, cg, mu = spec.window_edge ** 2, spec.window_scale, spec.bump_depth

    def g(r2):
        return np.exp(-mu * np.exp((np.asarray(r2, dtype=float) - e2) / cg))

    def gslope(rho):
        rho = np.asarray(rho, dtype=float)
        inner = np.exp((rho * rho - e2) / cg)
        return np.exp(-mu * inner) * mu * inner * 2.0 * rho / cg

    return g, gslope


def _column_profile_data(spec: PerturbationSpec) -> dict:
    """Measured sup norms of the profile factors and the amplitude.

    The amplitude is chosen from the measured slopes so that the sup
    norms of H and dH land just under delta whatever the shape
    parameters are; nothing here assumes the defaults.
    """
    L = spec.circumference
    chi, chip = column_bump(spec), _column_bump_slope(spec)
    g, gp = _transverse_window(spec)
    sgrid = np.concatenate([np.linspace(0.0, L, 24001),
                            np.linspace(-8.0 * spec.bump_scale,
                                        8.0 * spec.bump_scale, 8001)])
    rgrid = np.linspace(0.0, spec.box_radius, 24001)
    sup_chi = float(np.max(chi(sgrid)))
    sup_chip = float(np.max(np.abs(chip(sgrid))))
    sup_g = float(np.max(g(rgrid * rgrid)))
    sup_gp = float(np.max(np.abs(gp(rgrid))))
    M = max(1.0, sup_chip * sup_g, sup_chi * sup_gp)
    A = 0.98 * spec.delta / M
    inside = np.linspace(spec.column[0], spec.column[1], 24001)
    I = float(np.trapezoid(chi(inside), inside))
    lo, hi = spec.column
    outside = np.concatenate([np.linspace(hi - L, lo, 2001)])
    out_sup = float(np.max(chi(outside))) * sup_g * A
    return {"amplitude": A,
            "sup_H": A * sup_chi * sup_g,
            "sup_dH": A * max(sup_chip * sup_g, sup_chi * sup_gp,
                              sup_chi * sup_g),
            "outside_sup": out_sup,
            "center_window": float(g(0.0)),
            "bump_integral": I,
            "sup_bump_slope": sup_chip,
            "sup_window_slope": sup_gp}


def column_scene(spec: PerturbationSpec,
                 tols: policy.Tolerances = policy.DEFAULT):
    """The long-column model carrying the perturbation.

    Ambient chart (t, s, a, b, psi) with the product contact form
    t ds + (d psi + a db - b da); the hypersurface is the graph
    t = H with H = A chi(s) g(a^2 + b^2) sin(psi). Returns
    (scene, surface, info) where info carries the measured profile data
    and the ambient Hamiltonian field.
    """
    prof = _column_profile_data(spec)
    A = prof["amplitude"]
    L, c, mu = spec.circumference, spec.bump_scale, spec.bump_depth
    cg, e2 = spec.window_scale, spec.window_edge ** 2
    box = spec.box_radius

    ch = Chart(("t", "s", "a", "b", "psi"),
               angular={"s": L, "psi": 2.0 * math.pi})
    t_, s_, a_, b_, psi_ = (ch.var(k) for k in ch.names)
    d2 = (1.0 - _fn("cos", s_ * (2.0 * math.pi / L))) \
        * (0.5 * (L / math.pi) ** 2)
    chi_f = _fn("exp", -(_fn("exp", -(d2 * (1.0 / c ** 2))) * mu))
    g_f = _fn("exp", -(_fn("exp", (a_ * a_ + b_ * b_ - e2) * (1.0 / cg)) * mu))
    H = chi_f * g_f * _fn("sin", psi_) * A

    alpha = KForm(ch, 1, {(1,): t_, (4,): ch.constant(1.0),
                          (3,): a_, (2,): -b_})
    scene = ContactScene(ch, alpha, name="column",
                         domain={"t": (-1.0, 1.0), "a": (-box, box),
                                 "b": (-box, box)},
                         params={"delta": spec.delta})
    surface = Hypersurface.graph(ch, "t", H, label="perturbed graph")
    info = {"profile": prof, "H": H, "spec": spec}
    return scene, surface, info


def _base_scene(spec: PerturbationSpec):
    ch = Chart(("a", "b", "psi"), angular=("psi",))
    a_, b_ = ch.var("a"), ch.var("b")
    lam = KForm(ch, 1, {(2,): ch.constant(1.0), (1,): a_, (0,): -b_})
    return ContactScene(ch, lam, name="column-base",
                        domain={"a": (-spec.box_radius, spec.box_radius),
                                "b": (-spec.box_radius, spec.box_radius)})


def _predicted_lift(scene: ContactScene, base: ContactScene, H: ScalarField):
    """Predicted direction: the s-translation minus the Hamiltonian field,
    lifted to the graph (the t component is forced by tangency)."""
    ch = scene.chart
    it, is_ = ch.index("t"), ch.index("s")
    sel = np.array([ch.index("a"), ch.index("b"), ch.index("psi")])

    def predicted(p):
        p = np.asarray(p, dtype=float)
        q = p[sel]
        avec, Mm = alpha_data_at(base, q)
        Asys = np.vstack([Mm.T, avec])
        rhs = np.zeros(len(q) + 1)
        rhs[-1] = 1.0
        R, *_ = np.linalg.lstsq(Asys, rhs, rcond=None)
        hval, hg = H.value_and_grad(list(p))
        hg = np.asarray(hg, dtype=float)
        hq = hg[sel]
        b = np.append(float(hq @ R) * avec - hq, float(hval))
        Y, *_ = np.linalg.lstsq(Asys, b, rcond=None)
        out = np.zeros(ch.dim)
        out[is_] = 1.0
        out[sel] = -Y
        out[it] = float(hg @ out)
        return out

    return predicted


@dataclass
class ColumnOrbit:
    """A perturbed closed orbit with its distance from the original circle."""

    info: object
    loop: np.ndarray
    psi: float
    transverse_shift: float


def _column_orbit(field: FoliationField, H: ScalarField, psi0: float,
                  spec: PerturbationSpec,
                  tols: policy.Tolerances) -> ColumnOrbit:
    ch = field.scene.chart
    seed = np.zeros(ch.dim)
    seed[ch.index("s")] = 5.0
    seed[ch.index("a")] = 0.02
    seed[ch.index("b")] = -0.01
    seed[ch.index("psi")] = psi0 + 0.1
    seed[ch.index("t")] = float(H(list(seed)))
    sdot = float(field.vector(seed)[ch.index("s")])
    guess = spec.circumference / abs(sdot)
    orb = find_orbit(field, seed, guess, tols)
    info = classify_orbit(field, orb, tols)
    p = orb.point
    psi = float(p[ch.index("psi")])
    psi = (psi + math.pi) % (2.0 * math.pi) - math.pi
    shift = math.hypot(float(p[ch.index("a")]), float(p[ch.index("b")]))
    sgrid = np.linspace(0.0, spec.circumference, 129)[:-1]
    loop = np.zeros((len(sgrid), ch.dim))
    loop[:, ch.index("s")] = sgrid
    loop[:, ch.index("a")] = p[ch.index("a")]
    loop[:, ch.index("b")] = p[ch.index("b")]
    loop[:, ch.index("psi")] = p[ch.index("psi")]
    for i, s in enumerate(sgrid):
        q = loop[i].copy()
        loop[i, ch.index("t")] = float(H(list(q)))
    return ColumnOrbit(info=info, loop=loop, psi=psi, transverse_shift=shift)


def perturb_analysis(spec: PerturbationSpec,
                     tols: policy.Tolerances = policy.DEFAULT,
                     rng=None) -> dict:
    """Full dossier for one perturbation strength.

    Builds the column scene, checks the Hamiltonian size and support
    invariants, verifies the predicted direction and the defining
    equations of the Hamiltonian field, locates the two surviving
    orbits by shooting, compares their multipliers with the bump
    integral, and runs the certificate. For delta below the hyperbolic
    resolution the orbit family is degenerate; the dossier then reports
    the collapse instead of inventing isolated orbits.
    """
    if spec.delta > 0.1:
        raise ValueError("perturbation strengths above 0.1 are out of scope")
    rng = np.random.default_rng(0) if rng is None else rng
    scene, surface, info = column_scene(spec, tols)
    field = FoliationField(scene, surface, tols)
    H = info["H"]
    prof = info["profile"]
    ch = scene.chart
    base = _base_scene(spec)

    # center line really is flat: the transverse gradient vanishes on it
    cg = 0.0
    for s in (3.0, 20.0, 41.0):
        for psi in (0.4, 2.2):
            q = np.zeros(ch.dim)
            q[ch.index("s")], q[ch.index("psi")] = s, psi
            _, hgrad = H.value_and_grad(list(q))
            cg = max(cg, abs(hgrad[ch.index("a")]), abs(hgrad[ch.index("b")]))
    ham = dict(prof)
    ham["center_gradient"] = cg

    pts = []
    for _ in range(200):
        q = np.zeros(ch.dim)
        q[ch.index("s")] = rng.uniform(0.0, spec.circumference)
        q[ch.index("a")] = rng.uniform(-2.0, 2.0)
        q[ch.index("b")] = rng.uniform(-2.0, 2.0)
        q[ch.index("psi")] = rng.uniform(0.0, 2.0 * math.pi)
        q[ch.index("t")] = float(H(list(q)))
        pts.append(q)
    direction = graph_foliation_check(field, _predicted_lift(scene, base, H),
                                      pts)

    bch = base.chart
    ab, bb = bch.var("a"), bch.var("b")
    mid = float(column_bump(spec)(0.5 * spec.circumference))
    gb = _fn("exp", -(_fn("exp",
                          (ab * ab + bb * bb - spec.window_edge ** 2)
                          * (1.0 / spec.window_scale)) * spec.bump_depth))
    Hb = gb * _fn("sin", bch.var("psi")) * (prof["amplitude"] * mid)
    bpts = [np.array([rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                      rng.uniform(0.0, 2.0 * math.pi)]) for _ in range(100)]
    ham_res = hamiltonian_residuals(base, Hb, bpts)

    orbits = []
    failure = None
    for psi0 in (0.0, math.pi):
        try:
            orbits.append(_column_orbit(field, H, psi0, spec, tols))
        except NoOrbitError as e:
            failure = e
    degenerate = bool(failure) or any(not o.info.hyperbolic for o in orbits)

    ctols = policy.replace(tols, ode_max_step=2.0, flow_budget=900.0,
                           ode_rtol=1e-7, ode_atol=1e-9)
    seeds = []
    for _ in range(10):
        q = np.zeros(ch.dim)
        q[ch.index("s")] = rng.uniform(0.0, spec.circumference)
        ang = rng.uniform(0.0, 2.0 * math.pi)
        rad = rng.uniform(0.1, 0.9)
        q[ch.index("a")] = rad * math.cos(ang)
        q[ch.index("b")] = rad * math.sin(ang)
        q[ch.index("psi")] = rng.uniform(0.0, 2.0 * math.pi)
        q[ch.index("t")] = float(H(list(q)))
        seeds.append(q)
    cert = certify.check_morse_smale(field, zeros=(), orbits=orbits,
                                     tols=ctols, seed_points=seeds)

    A, I = prof["amplitude"], prof["bump_integral"]
    if orbits and not degenerate:
        margin = min(float(np.min(np.abs(np.abs(o.info.multipliers) - 1.0)))
                     for o in orbits)
        max_shift = max(o.transverse_shift for o in orbits)
        pers44 = {"holds": bool(max_shift < 1e-8),
                  "max_shift": max_shift,
                  "margin": margin,
                  "predicted_margin": 1.0 - math.exp(-0.5 * A * I)}
    else:
        pers44 = {"holds": False, "max_shift": math.nan, "margin": 0.0,
                  "predicted_margin": 1.0 - math.exp(-0.5 * A * I)}

    return {"spec": spec, "scene": scene, "surface": surface, "field": field,
            "hamiltonian": ham, "direction_check": direction,
            "hamiltonian_residuals": ham_res, "orbits": orbits,
            "degenerate": degenerate, "persistence": pers44,
            "certificate": cert}
