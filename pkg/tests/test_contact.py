"""Characteristic direction solve against hand-computed cases."""

import math

import numpy as np
import pytest

from charfol.contact import (ContactScene, FoliationField, Hypersurface,
                             graph_foliation_check, hamiltonian_field_at,
                             hamiltonian_residuals, reeb_at)
from charfol.errors import ContactConditionError, ProjectionError
from charfol.exterior import Chart, KForm


def darboux3():
    ch = Chart(["x", "y", "z"])
    alpha = KForm.one_form(ch, [ch.constant(0.0), ch.var("x"), ch.constant(1.0)])
    return ContactScene(ch, alpha, name="darboux3")


def linear_scene():
    # dz + y dx + 2x dy on {z = 0}: direction field (2x, -y, 0) exactly
    ch = Chart(["x", "y", "z"])
    alpha = KForm.one_form(ch, [ch.var("y"), 2.0 * ch.var("x"), ch.constant(1.0)])
    scene = ContactScene(ch, alpha, name="linear")
    surf = Hypersurface(ch.var("z"), label="plane")
    return scene, surf


def test_plane_in_standard_form():
    scene = darboux3()
    surf = Hypersurface(scene.chart.var("z"))
    fld = FoliationField(scene, surf)
    for x, y in [(0.5, 0.2), (-1.2, 0.7), (2.0, -3.0)]:
        X = fld.vector([x, y, 0.0])
        assert np.allclose(X, [x, 0.0, 0.0], atol=1e-14)


def test_linear_scene_field_and_jacobian():
    scene, surf = linear_scene()
    fld = FoliationField(scene, surf)
    X = fld.vector([0.3, -0.4, 0.0])
    assert np.allclose(X, [0.6, 0.4, 0.0], atol=1e-14)
    _, J = fld.vector_and_jacobian([0.0, 0.0, 0.0])
    assert np.allclose(J[:2, :2], [[2.0, 0.0], [0.0, -1.0]], atol=1e-12)
    # exact divergence: trace of the restricted linearization
    assert fld.divergence([0.0, 0.0, 0.0]) == pytest.approx(1.0, abs=1e-13)
    assert fld.divergence([0.9, 1.1, 0.0]) == pytest.approx(1.0, abs=1e-13)


def test_direction_lies_in_both_hyperplane_fields():
    # alpha(X) = 0 and dF(X) = 0 must hold wherever the solve succeeds
    ch = Chart(["x", "y", "z"])
    alpha = KForm.one_form(ch, [ch.parse("y - 0.3*z^2"),
                                ch.parse("2*x + 0.1*sin(y)"),
                                ch.parse("1 + 0.2*x^2")])
    scene = ContactScene(ch, alpha)
    surf = Hypersurface(ch.parse("z - 0.4*x^2 + 0.25*y^2 - 0.1"), label="saddle")
    fld = FoliationField(scene, surf)
    rng = np.random.default_rng(3)
    for _ in range(25):
        x, y = rng.uniform(-1, 1, 2)
        p = surf.project([x, y, 0.0])
        assert fld.tangency_residual(p) < 1e-12
        assert fld.contact_plane_residual(p) < 1e-12


def test_projection_converges_and_reports_failure():
    ch = Chart(["x", "y", "z"])
    sphere = Hypersurface(ch.parse("x^2 + y^2 + z^2 - 1"))
    p = sphere.project([1.3, -0.2, 0.4])
    assert abs(p @ p - 1.0) < 1e-12
    flat = Hypersurface(ch.parse("(x^2 + y^2 + z^2 - 1)^2"))
    with pytest.raises(ProjectionError):
        flat.project([1.4, 0.0, 0.0])


def test_reeb_and_hamiltonian_closed_forms():
    scene = darboux3()
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1.0, 1.0, (20, 3))
    for p in pts:
        R = reeb_at(scene, p)
        assert np.allclose(R, [0.0, 0.0, 1.0], atol=1e-12)
    # H = x^2 y + z has Y = (x - x^2, 2xy, z - x^2 y) in this form
    H = scene.chart.parse("x^2*y + z")
    for p in pts:
        Y = hamiltonian_field_at(scene, H, p)
        x, y, z = p
        assert np.allclose(Y, [x - x * x, 2 * x * y, z - x * x * y], atol=1e-10)
    rep = hamiltonian_residuals(scene, H, pts)
    assert rep["alpha_residual"] < 1e-10
    assert rep["pairing_residual"] < 1e-10


def test_unit_hamiltonian_recovers_reeb():
    ch = Chart(["x", "y", "z"])
    alpha = KForm.one_form(ch, [-0.5 * ch.var("y"), 0.5 * ch.var("x"),
                                ch.constant(1.0)])
    scene = ContactScene(ch, alpha)
    H = ch.constant(1.0)
    rng = np.random.default_rng(12)
    for p in rng.uniform(-1.0, 1.0, (10, 3)):
        Y = hamiltonian_field_at(scene, H, p)
        R = reeb_at(scene, p)
        assert np.allclose(Y, R, atol=1e-11)


def test_contact_condition_verification():
    scene = darboux3()
    rng = np.random.default_rng(13)
    pts = rng.uniform(-1.0, 1.0, (30, 3))
    vals = scene.verify_contact(pts)
    assert all(v > 0 for v in vals) or all(v < 0 for v in vals)

    ch = Chart(["x", "y", "z"])
    degenerate = ContactScene(ch, KForm.one_form(
        ch, [ch.constant(0.0), ch.constant(0.0), ch.constant(1.0)]))
    with pytest.raises(ContactConditionError):
        degenerate.verify_contact(pts)

    flipping = ContactScene(ch, KForm.one_form(
        ch, [ch.constant(0.0), ch.parse("x^2"), ch.constant(1.0)]))
    with pytest.raises(ContactConditionError):
        flipping.verify_contact([[1.0, 0, 0], [-1.0, 0, 0]])


def graph_model(delta=0.3):
    ch = Chart(["t", "s", "psi"], angular=("s", "psi"))
    alpha = KForm.one_form(ch, [ch.constant(0.0), ch.var("t"), ch.constant(1.0)])
    scene = ContactScene(ch, alpha, name="graph3")
    H = ch.parse(f"{delta} * sin(psi)")
    surf = Hypersurface.graph(ch, "t", H, label="graph")
    return scene, surf, H


def test_graph_prediction_matches_engine():
    scene, surf, H = graph_model(delta=0.3)
    fld = FoliationField(scene, surf)

    def predicted(p):
        _, s, psi = p
        h = 0.3 * math.sin(psi)
        h_s, h_psi = 0.0, 0.3 * math.cos(psi)
        return [h_s - h * h_psi, 1.0, -h]

    rng = np.random.default_rng(5)
    pts = []
    for _ in range(30):
        s, psi = rng.uniform(0.0, 2 * math.pi, 2)
        pts.append([0.3 * math.sin(psi), s, psi])
    rep = graph_foliation_check(fld, predicted, pts)
    assert rep["max_rel_dev"] < 1e-10
    assert rep["factor_min"] > 0.0


def test_graph_constructor_rejects_self_dependence():
    ch = Chart(["t", "s", "psi"], angular=("s", "psi"))
    with pytest.raises(ValueError):
        Hypersurface.graph(ch, "t", ch.parse("t + sin(psi)"))
