"""Benchmark problem definitions and their closed-form consistency checks."""
from __future__ import annotations

import numpy as np
import pytest

from fbsde.problems import (
    FbsdeProblem,
    PROBLEMS,
    _sigmoid,
    example1,
    example2,
    example3,
    feynman_kac_residual,
    get_problem,
    terminal_gap,
    z_consistency_gap,
)


def test_registry_contents():
    assert set(PROBLEMS) == {"example1", "example2", "example3"}
    for name in PROBLEMS:
        assert get_problem(name).name == name


def test_unknown_problem_is_a_keyerror_with_listing():
    with pytest.raises(KeyError) as err:
        get_problem("nope")
    assert "nope" in str(err.value)
    assert "example1" in str(err.value)


@pytest.mark.parametrize(
    "factory,n,m,d,coupled,x0",
    [
        (example1, 1, 1, 1, False, [1.0]),
        (example2, 1, 1, 1, True, [1.5]),
        (example3, 2, 2, 1, False, [0.0, 0.0]),
    ],
)
def test_dimensions_and_flags(factory, n, m, d, coupled, x0):
    p = factory()
    assert (p.n, p.m, p.d) == (n, m, d)
    assert p.coupled is coupled
    assert p.T == 1.0
    assert p.x0.tolist() == x0
    assert p.has_analytic


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_coefficient_shapes_with_batch_dims(name):
    p = get_problem(name)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(4, 3, p.n))
    y = p.analytic_y(0.3, x)
    z = p.analytic_z(0.3, x)
    assert y.shape == (4, 3, p.m)
    assert z.shape == (4, 3, p.m, p.d)
    assert p.a(0.3, x, y, z).shape == (4, 3, p.n)
    assert p.b(0.3, x, y, z).shape == (4, 3, p.n, p.d)
    assert p.f(0.3, x, y, z).shape == (4, 3, p.m)
    assert p.g(x).shape == (4, 3, p.m)


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_pde_residual_vanishes_at_random_points(name):
    """Coefficients, driver, and closed form must satisfy the associated PDE."""
    p = get_problem(name)
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(25):
        t = float(rng.uniform(0.0, p.T))
        x = p.x0 + rng.uniform(-1.0, 1.0, size=p.n)
        worst = max(worst, float(np.max(np.abs(feynman_kac_residual(p, t, x)))))
    assert worst < 2e-8


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_z_matches_gradient_times_diffusion(name):
    p = get_problem(name)
    rng = np.random.default_rng(23)
    for _ in range(10):
        t = float(rng.uniform(0.0, p.T))
        x = p.x0 + rng.uniform(-1.0, 1.0, size=p.n)
        assert float(np.max(z_consistency_gap(p, t, x))) < 1e-9


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_terminal_condition_matches_solution(name):
    p = get_problem(name)
    rng = np.random.default_rng(29)
    for _ in range(10):
        x = p.x0 + rng.uniform(-2.0, 2.0, size=p.n)
        assert float(np.max(terminal_gap(p, x))) < 1e-12


def test_consistency_checks_require_closed_form():
    p = get_problem("example1")
    import dataclasses

    bare = dataclasses.replace(p, analytic_y=None, analytic_z=None)
    assert not bare.has_analytic
    with pytest.raises(ValueError):
        feynman_kac_residual(bare, 0.5, bare.x0)
    with pytest.raises(ValueError):
        z_consistency_gap(bare, 0.5, bare.x0)
    with pytest.raises(ValueError):
        terminal_gap(bare, bare.x0)


def test_sigmoid_is_overflow_free_and_exact_at_tails():
    with np.errstate(over="raise", invalid="raise"):
        vals = _sigmoid(np.array([-800.0, -30.0, 0.0, 30.0, 800.0]))
    assert vals[0] == 0.0
    assert vals[-1] == 1.0
    assert vals[2] == 0.5
    assert vals == pytest.approx(1.0 / (1.0 + np.exp(-np.clip([-800, -30, 0, 30, 800], -700, 700))), abs=1e-15)


def test_problem_validation():
    p = get_problem("example1")
    with pytest.raises(ValueError):
        FbsdeProblem(
            name="bad", n=2, m=1, d=1, T=1.0, x0=np.array([0.0]),
            a=p.a, b=p.b, f=p.f, g=p.g, coupled=False,
        )
    with pytest.raises(ValueError):
        FbsdeProblem(
            name="bad", n=1, m=0, d=1, T=1.0, x0=np.array([0.0]),
            a=p.a, b=p.b, f=p.f, g=p.g, coupled=False,
        )
    with pytest.raises(ValueError):
        FbsdeProblem(
            name="bad", n=1, m=1, d=1, T=0.0, x0=np.array([0.0]),
            a=p.a, b=p.b, f=p.f, g=p.g, coupled=False,
        )


def test_example1_solution_values():
    p = get_problem("example1")
    x = np.array([1.0])
    y = p.analytic_y(0.0, x)
    s = 1.0 / (1.0 + np.exp(-1.0))
    assert y[0] == pytest.approx(s, rel=1e-15)
    z = p.analytic_z(0.0, x)
    assert z[0, 0] == pytest.approx(s * s * (1.0 - s), rel=1e-14)


def test_example2_diffusion_collapses_on_solution_manifold():
    """Along the closed-form solution the diffusion must equal cos(t+x)."""
    p = get_problem("example2")
    rng = np.random.default_rng(31)
    for _ in range(10):
        t = float(rng.uniform(0.0, 1.0))
        x = np.array([float(rng.uniform(0.0, 3.0))])
        y = p.analytic_y(t, x)
        z = p.analytic_z(t, x)
        b = p.b(t, x, y, z)
        assert b[0, 0] == pytest.approx(float(np.cos(t + x[0])), abs=1e-14)
